"""Analytic interface families: sinusoid, circle, and polar rose.

Each family provides level-set evaluation, closest-point search, and exact
signed curvature.  Closest points are found by scanning a discretized curve
for the nearest segment, then refining the stationarity condition of the
squared distance with bisection followed by guarded Newton steps.

The sine lives in a local frame obtained by rotating the global frame by the
tilt angle and translating by the shift vector; global coordinates map to
local ones via

    x_l = cos(t)(x - x0) + sin(t)(y - y0)
    y_l = cos(t)(y - y0) + sin(t)(x0 - x)

The level-set sign convention puts the negative region above the sine curve
(and inside circles and roses), so convex parts of the negative region carry
positive curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

PARAM_TOL = 1e-10
MAX_REFINE_ITER = 100


class ClosestPointError(RuntimeError):
    """Closest-point refinement failed to converge; carries the best bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


def global_to_local(p, tilt: float, shift) -> np.ndarray:
    """Map global coordinates into the tilted/translated local frame."""
    p = np.asarray(p, dtype=np.float64)
    x = p[..., 0] - shift[0]
    y = p[..., 1] - shift[1]
    c, s = np.cos(tilt), np.sin(tilt)
    return np.stack([c * x + s * y, c * y - s * x], axis=-1)


def local_to_global(p, tilt: float, shift) -> np.ndarray:
    """Inverse of global_to_local: rotate by +tilt, then translate."""
    p = np.asarray(p, dtype=np.float64)
    c, s = np.cos(tilt), np.sin(tilt)
    x = c * p[..., 0] - s * p[..., 1] + shift[0]
    y = s * p[..., 0] + c * p[..., 1] + shift[1]
    return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class ClosestPointResult:
    """Foot point of a query point on an interface."""

    t_star: float
    point: np.ndarray
    distance: float
    kappa: float


@dataclass(frozen=True)
class ClosestPointBatch:
    t_star: np.ndarray
    points: np.ndarray
    distance: np.ndarray
    kappa: np.ndarray
    converged: np.ndarray

    def single(self, k: int = 0) -> ClosestPointResult:
        return ClosestPointResult(
            float(self.t_star[k]),
            self.points[k].copy(),
            float(self.distance[k]),
            float(self.kappa[k]),
        )


# ---------------------------------------------------------------------------
# Sine interface
# ---------------------------------------------------------------------------


def sine_curvature(t, amplitude: float, omega: float):
    """Signed curvature of the curve (t, A sin(w t)): -A w^2 sin / (1 + A^2 w^2 cos^2)^(3/2)."""
    t = np.asarray(t, dtype=np.float64)
    c = amplitude * omega * np.cos(omega * t)
    return -amplitude * omega**2 * np.sin(omega * t) / (1.0 + c * c) ** 1.5


@dataclass
class SineInterface:
    """y = A sin(w t) in a local frame tilted by `tilt` and shifted by `shift`.

    The curve is discretized into a polyline over [t_lo, t_hi] with parameter
    step dt (keep dt below the grid spacing of any field sampled from it).
    """

    amplitude: float
    omega: float
    tilt: float = 0.0
    shift: tuple = (0.0, 0.0)
    dt: float = 1e-3
    t_lo: float = -1.5
    t_hi: float = 1.5
    _t: np.ndarray = field(init=False, repr=False)
    _pts: np.ndarray = field(init=False, repr=False)
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.amplitude > 0 and self.omega > 0 and self.dt > 0):
            raise ValueError("amplitude, omega and dt must be positive")
        if self.t_hi <= self.t_lo:
            raise ValueError("empty parameter span")
        n = int(np.ceil((self.t_hi - self.t_lo) / self.dt)) + 1
        self._t = self.t_lo + np.arange(n) * self.dt
        self._pts = np.stack([self._t, self.f(self._t)], axis=-1)
        self._tree = cKDTree(self._pts)

    def f(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=np.float64))

    def fp(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * t)

    def fpp(self, t):
        return -self.amplitude * self.omega**2 * np.sin(self.omega * t)

    def curvature(self, t):
        return sine_curvature(t, self.amplitude, self.omega)


def _segment_d2(pts: np.ndarray, q: np.ndarray, segs: np.ndarray):
    """Squared distance from q[n] to polyline segments segs[n, m]."""
    a = pts[segs]
    b = pts[segs + 1]
    ab = b - a
    qa = q[:, None, :] - a
    denom = np.einsum("nmk,nmk->nm", ab, ab)
    s = np.clip(np.einsum("nmk,nmk->nm", qa, ab) / denom, 0.0, 1.0)
    foot = a + s[..., None] * ab
    diff = q[:, None, :] - foot
    return np.einsum("nmk,nmk->nm", diff, diff)


def _nearest_segment(iface: SineInterface, q: np.ndarray):
    """Best polyline segment per query point (exact within KD-tree candidates)."""
    n = len(q)
    nseg = len(iface._t) - 1
    k = min(8, len(iface._pts))
    _, idx = iface._tree.query(q, k=k)
    idx = idx.reshape(n, -1)
    cands = (idx[:, :, None] + np.array([-2, -1, 0, 1])).reshape(n, -1)
    cands = np.clip(cands, 0, nseg - 1)
    d2 = _segment_d2(iface._pts, q, cands)
    best = np.argmin(d2, axis=1)
    rows = np.arange(n)
    return cands[rows, best], d2[rows, best]


def _refine_1d(g_fun, gp_fun, lo, hi, n_bisect=35, n_newton=4):
    """Vectorized bracketed root refinement: bisection then guarded Newton.

    Brackets must satisfy g(lo) <= 0 <= g(hi).  Returns the refined roots.
    """
    a = lo.copy()
    b = hi.copy()
    ga = g_fun(a)
    for _ in range(n_bisect):
        m = 0.5 * (a + b)
        gm = g_fun(m)
        left = ga * gm <= 0.0
        b = np.where(left, m, b)
        a = np.where(left, a, m)
        ga = np.where(left, ga, gm)
    t = 0.5 * (a + b)
    for _ in range(n_newton):
        gt = g_fun(t)
        gp = gp_fun(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = gt / gp
        tn = t - step
        bad = ~np.isfinite(tn) | (tn < a) | (tn > b)
        tn = np.where(bad, 0.5 * (a + b), tn)
        gn = g_fun(tn)
        left = ga * gn <= 0.0
        b = np.where(left & (tn > a), tn, b)
        a = np.where(~left & (tn < b), tn, a)
        t = tn
    return t


def sine_closest_point_batch(points, iface: SineInterface) -> ClosestPointBatch:
    """Foot points on the sine for a batch of global query points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    q = global_to_local(points, iface.tilt, iface.shift)
    seg, _ = _nearest_segment(iface, q)
    qx, qy = q[:, 0], q[:, 1]

    def g(t):
        t = np.asarray(t)
        x = qx if t.ndim == 1 else qx[:, None]
        y = qy if t.ndim == 1 else qy[:, None]
        return (t - x) + (iface.f(t) - y) * iface.fp(t)

    def gp(t):
        t = np.asarray(t)
        y = qy if t.ndim == 1 else qy[:, None]
        return 1.0 + iface.fp(t) ** 2 + (iface.f(t) - y) * iface.fpp(t)

    lo = iface._t[seg] - iface.dt
    hi = iface._t[seg + 1] + iface.dt
    lo, hi, found = _bracket_scan(g, lo, hi, qx, qy, iface.f)
    # One widening pass for queries whose window missed the minimum.
    if not np.all(found):
        wl = iface._t[np.maximum(seg - 4, 0)]
        wh = iface._t[np.minimum(seg + 5, len(iface._t) - 1)]
        lo2, hi2, found2 = _bracket_scan(g, wl, wh, qx, qy, iface.f)
        lo = np.where(~found & found2, lo2, lo)
        hi = np.where(~found & found2, hi2, hi)
        found = found | found2

    t = _refine_1d(g, gp, lo, hi)
    foot_local = np.stack([t, iface.f(t)], axis=-1)
    dist = np.hypot(t - qx, iface.f(t) - qy)
    return ClosestPointBatch(
        t_star=t,
        points=local_to_global(foot_local, iface.tilt, iface.shift),
        distance=dist,
        kappa=iface.curvature(t),
        converged=found,
    )


def _bracket_scan(g, lo, hi, qx, qy, f, n_cells=8):
    """Scan [lo, hi] for an upward sign change of g nearest the query."""
    u = np.linspace(0.0, 1.0, n_cells + 1)
    T = lo[:, None] + (hi - lo)[:, None] * u
    G = g(T)
    cross = (G[:, :-1] <= 0.0) & (G[:, 1:] >= 0.0)
    Tm = 0.5 * (T[:, :-1] + T[:, 1:])
    d2 = (Tm - qx[:, None]) ** 2 + (f(Tm) - qy[:, None]) ** 2
    d2 = np.where(cross, d2, np.inf)
    cell = np.argmin(d2, axis=1)
    found = cross[np.arange(len(lo)), cell]
    a = T[np.arange(len(lo)), cell]
    b = T[np.arange(len(lo)), cell + 1]
    return np.where(found, a, lo), np.where(found, b, hi), found


def sine_closest_point(p_global, iface: SineInterface) -> ClosestPointResult:
    batch = sine_closest_point_batch(np.asarray([p_global]), iface)
    if not batch.converged[0]:
        raise ClosestPointError(
            "closest-point search on the sine did not converge",
            bracket=(float(batch.t_star[0] - iface.dt), float(batch.t_star[0] + iface.dt)),
        )
    return batch.single(0)


def sine_level_set_batch(
    points, iface: SineInterface, signed_distance: bool, refine_band: float | None = None
) -> np.ndarray:
    """Signed distance-like values: negative above the curve, positive below.

    With signed_distance the polyline distance is refined to the converged
    closest distance; refine_band (when given) restricts refinement to points
    within that polyline distance of the curve, leaving the far field at
    polyline accuracy.  Without signed_distance the raw polyline distance is
    used everywhere.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    q = global_to_local(points, iface.tilt, iface.shift)
    _, d2 = _nearest_segment(iface, q)
    d = np.sqrt(d2)
    if signed_distance:
        sel = np.ones(len(q), dtype=bool) if refine_band is None else d <= refine_band
        if np.any(sel):
            cp = sine_closest_point_batch(points[sel], iface)
            d = d.copy()
            d[sel] = np.where(cp.converged, cp.distance, d[sel])
    above = q[:, 1] > iface.f(q[:, 0])
    return np.where(above, -d, d)


def sine_level_set(p_global, iface: SineInterface, signed_distance: bool = True) -> float:
    return float(sine_level_set_batch(np.asarray([p_global]), iface, signed_distance)[0])


# ---------------------------------------------------------------------------
# Circle interface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleInterface:
    center: tuple
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")


def circle_level_set(p, iface: CircleInterface, signed_distance: bool = True):
    """sqrt((x-x0)^2+(y-y0)^2) - r, or its quadratic (non-SDF) companion."""
    p = np.asarray(p, dtype=np.float64)
    dx = p[..., 0] - iface.center[0]
    dy = p[..., 1] - iface.center[1]
    d2 = dx * dx + dy * dy
    if signed_distance:
        return np.sqrt(d2) - iface.r
    return d2 - iface.r * iface.r


def circle_closest_point(p, iface: CircleInterface) -> ClosestPointResult:
    """Radial projection; at the center the foot at angle 0 is returned."""
    p = np.asarray(p, dtype=np.float64)
    dx = p[0] - iface.center[0]
    dy = p[1] - iface.center[1]
    rho = float(np.hypot(dx, dy))
    theta = float(np.arctan2(dy, dx)) if rho > 0 else 0.0
    foot = np.array(
        [
            iface.center[0] + iface.r * np.cos(theta),
            iface.center[1] + iface.r * np.sin(theta),
        ]
    )
    return ClosestPointResult(theta, foot, abs(rho - iface.r), 1.0 / iface.r)


# ---------------------------------------------------------------------------
# Polar rose interface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoseInterface:
    """r(theta) = a cos(p theta) + b with b > a >= 0 (simple closed curve)."""

    a: float
    b: float
    p: int

    def __post_init__(self):
        if not (self.b > self.a >= 0):
            raise ValueError("need b > a >= 0 for a simple closed rose")
        if not (isinstance(self.p, int) and self.p > 0):
            raise ValueError("petal count must be a positive integer")

    def radius(self, theta):
        return self.a * np.cos(self.p * theta) + self.b

    def radius_p(self, theta):
        return -self.a * self.p * np.sin(self.p * theta)

    def radius_pp(self, theta):
        return -self.a * self.p**2 * np.cos(self.p * theta)


def rose_curvature(theta, iface: RoseInterface):
    """(r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^(3/2) for the polar curve."""
    theta = np.asarray(theta, dtype=np.float64)
    r = iface.radius(theta)
    rp = iface.radius_p(theta)
    rpp = iface.radius_pp(theta)
    return (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp) ** 1.5


def rose_level_set(p, iface: RoseInterface):
    """sqrt(x^2+y^2) - r(atan2(y, x)); the origin evaluates with theta = 0."""
    p = np.asarray(p, dtype=np.float64)
    x, y = p[..., 0], p[..., 1]
    theta = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    return np.sqrt(x * x + y * y) - iface.radius(theta)


def _rose_point(iface, theta):
    r = iface.radius(theta)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def rose_closest_point_batch(points, iface: RoseInterface, n_cells: int = 32) -> ClosestPointBatch:
    """Foot points on the rose, bracketing +-pi/p around each query angle."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    qx, qy = points[:, 0], points[:, 1]

    def g(theta):
        r = iface.radius(theta)
        rp = iface.radius_p(theta)
        ct, st = np.cos(theta), np.sin(theta)
        ex = r * ct - qx if theta.ndim == 1 else r * ct - qx[:, None]
        ey = r * st - qy if theta.ndim == 1 else r * st - qy[:, None]
        return ex * (rp * ct - r * st) + ey * (rp * st + r * ct)

    def gp(theta):
        r = iface.radius(theta)
        rp = iface.radius_p(theta)
        rpp = iface.radius_pp(theta)
        ct, st = np.cos(theta), np.sin(theta)
        ex = r * ct - qx
        ey = r * st - qy
        tx = rp * ct - r * st
        ty = rp * st + r * ct
        ax = rpp * ct - 2.0 * rp * st - r * ct
        ay = rpp * st + 2.0 * rp * ct - r * st
        return tx * tx + ty * ty + ex * ax + ey * ay

    def d2(theta):
        r = iface.radius(theta)
        ex = r * np.cos(theta) - (qx if theta.ndim == 1 else qx[:, None])
        ey = r * np.sin(theta) - (qy if theta.ndim == 1 else qy[:, None])
        return ex * ex + ey * ey

    center = np.arctan2(qy, qx)
    half = np.pi / iface.p
    u = np.linspace(-1.0, 1.0, n_cells + 1)
    T = center[:, None] + half * u
    G = g(T)
    cross = (G[:, :-1] <= 0.0) & (G[:, 1:] >= 0.0)
    D = np.where(cross, d2(0.5 * (T[:, :-1] + T[:, 1:])), np.inf)
    rows = np.arange(len(points))

    order = np.argsort(D, axis=1)
    t_best = np.full(len(points), np.nan)
    d_best = np.full(len(points), np.inf)
    found_any = np.zeros(len(points), dtype=bool)
    # Refine the two best candidate cells; petal-junction queries can be
    # near-equidistant to two branches.
    for rank in range(2):
        cell = order[:, rank]
        ok = np.isfinite(D[rows, cell])
        if not np.any(ok):
            continue
        a = T[rows, cell]
        b = T[rows, cell + 1]
        t = _refine_1d(g, gp, a, b)
        dd = d2(t)
        better = ok & (dd < d_best)
        t_best = np.where(better, t, t_best)
        d_best = np.where(better, dd, d_best)
        found_any |= ok

    t_best = np.where(found_any, t_best, center)
    foot = _rose_point(iface, t_best)
    return ClosestPointBatch(
        t_star=t_best,
        points=foot,
        distance=np.sqrt(np.maximum(d_best, 0.0)),
        kappa=rose_curvature(t_best, iface),
        converged=found_any,
    )


def rose_closest_point(p, iface: RoseInterface) -> ClosestPointResult:
    if p[0] == 0 and p[1] == 0:
        raise ValueError("closest point at the origin is ambiguous")
    batch = rose_closest_point_batch(np.asarray([p]), iface)
    if not batch.converged[0]:
        raise ClosestPointError("closest-point search on the rose did not converge")
    return batch.single(0)
