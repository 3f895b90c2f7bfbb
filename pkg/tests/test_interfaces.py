import numpy as np
import pytest

from lscurv.interfaces import (
    CircleInterface,
    RoseInterface,
    SineInterface,
    circle_closest_point,
    circle_level_set,
    global_to_local,
    local_to_global,
    rose_closest_point,
    rose_closest_point_batch,
    rose_curvature,
    rose_level_set,
    sine_closest_point,
    sine_closest_point_batch,
    sine_curvature,
    sine_level_set,
    sine_level_set_batch,
)


def parametric_curvature_fd(x_fn, y_fn, t, dt=1e-5):
    """Finite-difference signed curvature of a parametric curve."""
    xp = (x_fn(t + dt) - x_fn(t - dt)) / (2 * dt)
    yp = (y_fn(t + dt) - y_fn(t - dt)) / (2 * dt)
    xpp = (x_fn(t + dt) - 2 * x_fn(t) + x_fn(t - dt)) / dt**2
    ypp = (y_fn(t + dt) - 2 * y_fn(t) + y_fn(t - dt)) / dt**2
    return (xp * ypp - yp * xpp) / (xp * xp + yp * yp) ** 1.5


class TestFrameTransform:
    def test_identity(self):
        out = global_to_local((0.3, -0.2), 0.0, (0.0, 0.0))
        assert np.allclose(out, [0.3, -0.2], atol=1e-16)

    def test_quarter_rotation(self):
        out = global_to_local((1.0, 0.0), np.pi / 2, (0.0, 0.0))
        assert np.allclose(out, [0.0, -1.0], atol=1e-15)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        p = rng.normal(size=(50, 2))
        tilt, shift = 0.7, (0.3, -0.4)
        back = local_to_global(global_to_local(p, tilt, shift), tilt, shift)
        assert np.abs(back - p).max() <= 1e-12

    def test_isometry(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(30, 2))
        b = rng.normal(size=(30, 2))
        la = global_to_local(a, -0.5, (0.1, 0.2))
        lb = global_to_local(b, -0.5, (0.1, 0.2))
        d0 = np.hypot(*(a - b).T)
        d1 = np.hypot(*(la - lb).T)
        assert np.abs(d0 - d1).max() <= 1e-12


class TestSineCurvature:
    def test_zero_at_origin(self):
        assert sine_curvature(0.0, 0.1, 10.0) == 0.0

    def test_crest_value(self):
        # at omega*t = pi/2 the cosine term vanishes: kappa = -A omega^2
        assert sine_curvature(np.pi / 20, 0.1, 10.0) == pytest.approx(-10.0, abs=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.uniform(0.05, 0.3)
            w = rng.uniform(2.0, 20.0)
            t = rng.uniform(-1.0, 1.0)
            ref = parametric_curvature_fd(lambda s: s, lambda s: a * np.sin(w * s), t)
            got = sine_curvature(t, a, w)
            assert abs(got - ref) <= 1e-6 * max(1.0, abs(ref))

    def test_antisymmetry(self):
        t = np.linspace(-1, 1, 101)
        assert np.allclose(
            sine_curvature(-t, 0.2, 7.0), -sine_curvature(t, 0.2, 7.0), atol=1e-15
        )


class TestSineClosestPoint:
    def test_point_on_curve(self):
        iface = SineInterface(0.1, 10.0, dt=1e-3)
        t0 = 0.234
        res = sine_closest_point((t0, iface.f(t0)), iface)
        assert res.distance <= 1e-8
        assert abs(res.t_star - t0) <= 1e-8

    def test_above_crest(self):
        a, w = 0.1, 10.0
        iface = SineInterface(a, w, dt=1e-3)
        delta = 1e-3
        res = sine_closest_point((np.pi / 20, a + delta), iface)
        assert res.t_star == pytest.approx(np.pi / 20, abs=1e-9)
        assert res.distance == pytest.approx(delta, abs=1e-9)

    def test_brute_force_oracle(self):
        iface = SineInterface(0.13, 9.0, 0.25, (0.01, -0.02), dt=2.0**-7 / 5)
        rng = np.random.default_rng(4)
        local = np.stack(
            [rng.uniform(-0.6, 0.6, 25), rng.uniform(-0.3, 0.3, 25)], axis=-1
        )
        pts = local_to_global(local, iface.tilt, iface.shift)
        batch = sine_closest_point_batch(pts, iface)
        assert batch.converged.all()
        dense = np.linspace(iface.t_lo, iface.t_hi, 1_000_001)
        curve = np.stack([dense, iface.f(dense)], axis=-1)
        for k, q in enumerate(local):
            brute = np.sqrt(((curve - q) ** 2).sum(axis=1)).min()
            assert abs(batch.distance[k] - brute) <= 1e-6

    def test_orthogonality(self):
        iface = SineInterface(0.2, 6.0, dt=1e-3)
        rng = np.random.default_rng(5)
        pts = np.stack([rng.uniform(-0.5, 0.5, 20), rng.uniform(-0.4, 0.4, 20)], -1)
        batch = sine_closest_point_batch(pts, iface)
        for k in range(len(pts)):
            t = batch.t_star[k]
            tangent = np.array([1.0, iface.fp(t)])
            offset = pts[k] - batch.points[k]
            denom = np.linalg.norm(tangent) * max(np.linalg.norm(offset), 1e-30)
            assert abs(np.dot(tangent, offset)) / denom <= 1e-6


class TestSineLevelSet:
    def test_far_above_low_amplitude(self):
        a, w = 0.01, 2.0
        iface = SineInterface(a, w, dt=1e-3)
        x, y = 0.2, 0.45
        val = sine_level_set((x, y), iface, signed_distance=True)
        vertical = y - a * np.sin(w * x)
        # max slope a*w = 0.02, so vertical distance is near-exact
        assert val < 0
        assert abs(val + vertical) <= 1e-3

    def test_point_on_interface_zero(self):
        iface = SineInterface(0.1, 10.0, dt=1e-3)
        t0 = -0.37
        assert abs(sine_level_set((t0, iface.f(t0)), iface)) <= 1e-8

    def test_sign_flips_across_interface(self):
        iface = SineInterface(0.1, 10.0, dt=1e-3)
        x = 0.21
        y0 = iface.f(x)
        above = sine_level_set((x, y0 + 0.05), iface)
        below = sine_level_set((x, y0 - 0.05), iface)
        assert above < 0 < below

    def test_polyline_variant_close_to_refined(self):
        iface = SineInterface(0.1, 10.0, dt=1e-3)
        pts = np.array([[0.1, 0.2], [-0.3, 0.05], [0.4, -0.3]])
        rough = sine_level_set_batch(pts, iface, signed_distance=False)
        exact = sine_level_set_batch(pts, iface, signed_distance=True)
        assert np.sign(rough).tolist() == np.sign(exact).tolist()
        assert np.abs(rough - exact).max() <= 1e-5  # polyline sagitta scale


class TestCircle:
    def test_center_values(self):
        iface = CircleInterface((0.1, -0.2), 0.25)
        assert circle_level_set((0.1, -0.2), iface, True) == pytest.approx(-0.25)
        assert circle_level_set((0.1, -0.2), iface, False) == pytest.approx(-0.0625)

    def test_zero_on_circle(self):
        iface = CircleInterface((0.0, 0.0), 0.3)
        p = (0.3 * np.cos(1.1), 0.3 * np.sin(1.1))
        assert abs(circle_level_set(p, iface, True)) <= 1e-15
        assert abs(circle_level_set(p, iface, False)) <= 1e-15

    def test_algebraic_identity(self):
        iface = CircleInterface((0.05, 0.02), 0.2)
        rng = np.random.default_rng(6)
        p = rng.uniform(-0.5, 0.5, size=(40, 2))
        sdf = circle_level_set(p, iface, True)
        quad = circle_level_set(p, iface, False)
        rho = np.hypot(p[:, 0] - 0.05, p[:, 1] - 0.02)
        assert np.abs(quad - sdf * (rho + 0.2)).max() <= 1e-14

    def test_closest_point(self):
        iface = CircleInterface((0.0, 0.0), 0.25)
        res = circle_closest_point((0.5, 0.0), iface)
        assert res.distance == pytest.approx(0.25)
        assert res.kappa == pytest.approx(4.0)
        assert np.allclose(res.point, [0.25, 0.0])


class TestRoseCurvature:
    def test_circle_reduction(self):
        iface = RoseInterface(0.0, 0.4, 5)
        th = np.linspace(0, 2 * np.pi, 50)
        assert np.allclose(rose_curvature(th, iface), 1.0 / 0.4, atol=1e-13)

    def test_matches_finite_differences(self):
        iface = RoseInterface(0.075, 0.35, 5)
        ref = parametric_curvature_fd(
            lambda t: iface.radius(t) * np.cos(t),
            lambda t: iface.radius(t) * np.sin(t),
            0.0,
        )
        got = rose_curvature(0.0, iface)
        assert abs(got - ref) <= 1e-6 * abs(ref)

    def test_min_at_petal_junction(self):
        iface = RoseInterface(0.12, 0.305, 5)
        th = np.linspace(0, 2 * np.pi / 5, 200_001)
        k = rose_curvature(th, iface)
        assert k.min() < 0
        assert abs(th[np.argmin(k)] - np.pi / 5) <= 1e-4

    def test_periodicity(self):
        iface = RoseInterface(0.1, 0.3, 5)
        th = np.linspace(0, 2 * np.pi, 64)
        assert np.abs(
            rose_curvature(th + 2 * np.pi / 5, iface) - rose_curvature(th, iface)
        ).max() <= 1e-12


class TestRoseLevelSetAndClosestPoint:
    def test_zero_on_interface(self):
        iface = RoseInterface(0.075, 0.35, 5)
        th = 1.234
        p = (iface.radius(th) * np.cos(th), iface.radius(th) * np.sin(th))
        assert abs(rose_level_set(p, iface)) <= 1e-14

    def test_origin_value(self):
        iface = RoseInterface(0.075, 0.35, 5)
        assert rose_level_set((0.0, 0.0), iface) == pytest.approx(-(0.075 + 0.35))

    def test_sign_inside_outside(self):
        iface = RoseInterface(0.075, 0.35, 5)
        rng = np.random.default_rng(7)
        th = rng.uniform(0, 2 * np.pi, 100)
        r = iface.radius(th)
        inside = np.stack([0.5 * r * np.cos(th), 0.5 * r * np.sin(th)], -1)
        outside = np.stack([1.5 * r * np.cos(th), 1.5 * r * np.sin(th)], -1)
        assert (rose_level_set(inside, iface) < 0).all()
        assert (rose_level_set(outside, iface) > 0).all()

    def test_point_on_interface_closest(self):
        iface = RoseInterface(0.12, 0.305, 5)
        th = 0.77
        p = (iface.radius(th) * np.cos(th), iface.radius(th) * np.sin(th))
        res = rose_closest_point(p, iface)
        assert res.distance <= 1e-8
        assert abs(res.t_star - th) <= 1e-7

    def test_circle_reduction_radial_projection(self):
        iface = RoseInterface(0.0, 0.3, 4)
        res = rose_closest_point((0.2, 0.2), iface)
        assert res.t_star == pytest.approx(np.arctan2(0.2, 0.2))
        assert res.distance == pytest.approx(abs(np.hypot(0.2, 0.2) - 0.3), abs=1e-10)

    def test_brute_force_oracle(self):
        iface = RoseInterface(0.12, 0.305, 5)
        rng = np.random.default_rng(8)
        th = rng.uniform(0, 2 * np.pi, 20)
        base = np.stack(
            [iface.radius(th) * np.cos(th), iface.radius(th) * np.sin(th)], -1
        )
        pts = base + rng.normal(0.0, 0.004, base.shape)
        batch = rose_closest_point_batch(pts, iface)
        assert batch.converged.all()
        dense = np.linspace(0, 2 * np.pi, 1_000_001)
        curve = np.stack(
            [iface.radius(dense) * np.cos(dense), iface.radius(dense) * np.sin(dense)], -1
        )
        for k, p in enumerate(pts):
            brute = np.sqrt(((curve - p) ** 2).sum(axis=1)).min()
            assert abs(batch.distance[k] - brute) <= 1e-6

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            rose_closest_point((0.0, 0.0), RoseInterface(0.1, 0.3, 5))

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError):
            RoseInterface(0.5, 0.3, 5)
