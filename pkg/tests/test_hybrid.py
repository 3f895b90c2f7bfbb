import numpy as np
import pytest

from lscurv.grid import (
    Grid,
    compound_numerical_batch,
    field_from_function,
    interface_nodes,
    reinitialize,
)
from lscurv.hybrid import (
    ROUTE_NEURAL,
    ROUTE_NUMERICAL,
    HybridSolver,
    estimate,
    estimate_batch,
    kappa_flat_for_level,
)
from lscurv.interfaces import CircleInterface, RoseInterface, circle_level_set, rose_level_set
from lscurv.neural import MlpArchitecture, init_model
from lscurv.preprocess import fit_pca


@pytest.fixture(scope="module")
def toy_solver():
    """Seeded, untrained solver; switching behavior is structural."""
    rng = np.random.default_rng(77)
    model = init_model(MlpArchitecture((8, 8, 8, 8)), rng, "pca", 2.0**-7, 5.0)
    pre = fit_pca(rng.normal(size=(200, 9)), h=2.0**-7)
    return HybridSolver(model, pre)


def circle_field(r, h=2.0**-7, center=(0.0, 0.0), signed=True):
    iface = CircleInterface(center, r)
    grid = Grid.centered_square(r + 8 * h, h)
    return field_from_function(
        grid, lambda x, y: circle_level_set(np.stack([x, y], -1), iface, signed)
    )


class TestRouting:
    def test_flat_field_numerical_zero(self, toy_solver):
        grid = Grid.unit_centered(7)
        fld = field_from_function(grid, lambda x, y: y)
        j0 = int(round((0.0 - grid.y_lo) / grid.h))
        hk, route = estimate(toy_solver, fld, (17, j0))
        assert route == ROUTE_NUMERICAL
        assert hk == 0.0

    def test_small_circle_all_neural(self, toy_solver):
        fld = circle_field(1.0 / 64.0)  # kappa = 64 > kappa_flat = 5
        res = estimate_batch(toy_solver, fld)
        assert len(res) > 0
        assert (res.route == ROUTE_NEURAL).all()
        assert res.neural_fraction == 1.0

    def test_large_circle_all_numerical(self, toy_solver):
        fld = circle_field(1.0)  # kappa = 1 < 5
        res = estimate_batch(toy_solver, fld)
        assert len(res) > 0
        assert (res.route == ROUTE_NUMERICAL).all()
        assert res.neural_fraction == 0.0

    def test_rose_mixes_routes(self, toy_solver):
        grid = Grid.unit_centered(7)
        iface = RoseInterface(0.12, 0.305, 5)
        fld = reinitialize(
            field_from_function(
                grid, lambda x, y: rose_level_set(np.stack([x, y], -1), iface)
            ),
            10,
        )
        res = estimate_batch(toy_solver, fld)
        # oracle: route by thresholding the numerical estimate directly
        comp = compound_numerical_batch(fld, res.nodes)
        thr = toy_solver.h * toy_solver.kappa_flat
        expect_neural = np.abs(comp.hk) >= thr
        assert (res.route == ROUTE_NEURAL).any()
        assert (res.route == ROUTE_NUMERICAL).any()
        assert np.array_equal(res.route == ROUTE_NEURAL, expect_neural)
        # numerical-route values are exactly the numerical estimates
        m = res.route == ROUTE_NUMERICAL
        assert np.array_equal(res.hk[m], comp.hk[m])


class TestNegationSymmetry:
    def test_exact_on_rose(self, toy_solver):
        grid = Grid.unit_centered(7)
        iface = RoseInterface(0.12, 0.305, 5)
        fld = reinitialize(
            field_from_function(
                grid, lambda x, y: rose_level_set(np.stack([x, y], -1), iface)
            ),
            10,
        )
        res_pos = estimate_batch(toy_solver, fld)
        res_neg = estimate_batch(toy_solver, fld.negated(), res_pos.nodes)
        assert np.array_equal(res_pos.route, res_neg.route)
        assert np.array_equal(res_pos.hk, -res_neg.hk)

    def test_exact_on_random_circles(self, toy_solver):
        rng = np.random.default_rng(31)
        h = 2.0**-7
        for _ in range(40):
            r = rng.uniform(1.5 * h, 0.3)
            c = rng.uniform(-h / 2, h / 2, size=2)
            fld = circle_field(r, center=tuple(c), signed=bool(rng.integers(2)))
            res_pos = estimate_batch(toy_solver, fld)
            res_neg = estimate_batch(toy_solver, fld.negated(), res_pos.nodes)
            assert np.array_equal(res_pos.hk, -res_neg.hk)
            assert np.array_equal(res_pos.route, res_neg.route)


class TestThresholdLimits:
    def test_huge_threshold_equals_numerical(self, toy_solver):
        fld = circle_field(1.0 / 32.0)
        solver = HybridSolver(toy_solver.model, toy_solver.pca, kappa_flat=1e9)
        res = estimate_batch(solver, fld)
        comp = compound_numerical_batch(fld, res.nodes)
        assert (res.route == ROUTE_NUMERICAL).all()
        assert np.array_equal(res.hk, comp.hk)

    def test_tiny_threshold_all_neural(self, toy_solver):
        fld = circle_field(1.0 / 32.0)
        solver = HybridSolver(toy_solver.model, toy_solver.pca, kappa_flat=1e-9)
        res = estimate_batch(solver, fld)
        assert (res.route == ROUTE_NEURAL).all()


class TestSolverValidation:
    def test_kappa_flat_per_level(self):
        assert kappa_flat_for_level(7) == 5.0
        assert kappa_flat_for_level(8) == 10.0
        assert kappa_flat_for_level(10) == 40.0

    def test_mismatched_h_rejected(self, toy_solver):
        fld = circle_field(0.25, h=2.0**-6)
        with pytest.raises(ValueError):
            estimate_batch(toy_solver, fld)

    def test_mismatched_preprocessor_rejected(self, toy_solver):
        from lscurv.preprocess import fit_standardization

        rng = np.random.default_rng(0)
        pre = fit_standardization(rng.normal(size=(100, 9)), h=2.0**-7)
        with pytest.raises(ValueError):
            HybridSolver(toy_solver.model, pre)
