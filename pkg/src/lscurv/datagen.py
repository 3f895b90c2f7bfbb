"""Synthetic training data from sinusoidal and circular interfaces.

Samples pair a nine-value stencil with the dimensionless curvature h*kappa at
the node's closest interface point.  Every stored sample lies in the negative
curvature half-spectrum: stencils whose target is positive are negated
together with the target, exploiting the kappa <-> -kappa symmetry of the
curvature formula.  Sinusoid sweeps use ease-in rejection to over-represent
steep curvatures; circle sweeps draw radii from equally spaced curvatures and
cap the per-radius sample count, so each discrete curvature is about equally
visible during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Grid,
    LevelSetField,
    Stencil9,
    compound_numerical_batch,
    field_from_function,
    interface_nodes,
    reinitialize,
    stencil_batch,
)
from .interfaces import (
    CircleInterface,
    SineInterface,
    circle_level_set,
    sine_closest_point_batch,
    sine_level_set_batch,
)

H_BASE = 2.0**-7
KAPPA_MIN_DEFAULT = 0.5
KAPPA_MAX_DEFAULT = 256.0 / 3.0
KAPPA_FLAT_DEFAULT = 5.0
C_FLAT_DEFAULT = 0.1

SOURCE_TAGS = ("sine_sdf", "sine_rls", "circle_sdf", "circle_rls")

# Entropy tags keeping sine/circle RNG substreams disjoint.
_SINE_STREAM = 11
_CIRCLE_STREAM = 13


@dataclass(frozen=True)
class Sample:
    """One (stencil, h*kappa) training pair."""

    stencil: Stencil9
    target: float
    source: str


@dataclass
class Dataset:
    """Column-wise sample store; all samples share the grid spacing h."""

    stencils: np.ndarray
    targets: np.ndarray
    sources: np.ndarray
    h: float
    kappa_min: float = KAPPA_MIN_DEFAULT
    kappa_max: float = KAPPA_MAX_DEFAULT
    kappa_flat: float = KAPPA_FLAT_DEFAULT
    c_flat: float = C_FLAT_DEFAULT
    seed: int = 0
    numerical: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.stencils = np.asarray(self.stencils, dtype=np.float64).reshape(-1, 9)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.sources = np.asarray(self.sources)
        if not (len(self.stencils) == len(self.targets) == len(self.sources)):
            raise ValueError("misaligned dataset columns")
        if self.numerical is not None and len(self.numerical) != len(self.targets):
            raise ValueError("misaligned numerical-estimate column")

    def __len__(self):
        return len(self.targets)

    def sample(self, k: int) -> Sample:
        return Sample(Stencil9(self.stencils[k], self.h), float(self.targets[k]), str(self.sources[k]))

    def subset(self, idx) -> "Dataset":
        num = None if self.numerical is None else self.numerical[idx]
        return Dataset(
            self.stencils[idx],
            self.targets[idx],
            self.sources[idx],
            self.h,
            self.kappa_min,
            self.kappa_max,
            self.kappa_flat,
            self.c_flat,
            self.seed,
            num,
            dict(self.diagnostics),
        )

    def select(self, mask) -> "Dataset":
        return self.subset(np.asarray(mask))


def concat_datasets(parts) -> Dataset:
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to concatenate")
    h = parts[0].h
    if any(p.h != h for p in parts):
        raise ValueError("datasets disagree on h")
    have_num = all(p.numerical is not None for p in parts)
    diag: dict = {}
    for p in parts:
        for k, v in p.diagnostics.items():
            diag[k] = diag.get(k, 0) + v
    return Dataset(
        np.concatenate([p.stencils for p in parts]),
        np.concatenate([p.targets for p in parts]),
        np.concatenate([p.sources for p in parts]),
        h,
        parts[0].kappa_min,
        parts[0].kappa_max,
        parts[0].kappa_flat,
        parts[0].c_flat,
        parts[0].seed,
        np.concatenate([p.numerical for p in parts]) if have_num else None,
        diag,
    )


# ---------------------------------------------------------------------------
# Elementary sample transforms
# ---------------------------------------------------------------------------


def negative_normalize(stencil: np.ndarray, kappa: float):
    """Flip (stencil, kappa) into the negative half-spectrum when kappa > 0."""
    if kappa == 0:
        raise ValueError("flat samples must be filtered before normalization")
    if kappa > 0:
        return -np.asarray(stencil, dtype=np.float64), -kappa
    return np.asarray(stencil, dtype=np.float64), kappa


def rotate_stencil_90(stencil: np.ndarray) -> np.ndarray:
    """Counterclockwise quarter-turn of the 3x3 stencil; the target is unchanged."""
    s = np.asarray(stencil)
    return np.rot90(s.reshape(3, 3)).reshape(9).copy()


def _rotations4(stencils: np.ndarray) -> np.ndarray:
    """(n, 9) -> (4n, 9): each stencil followed by its three quarter-turns."""
    grids = stencils.reshape(-1, 3, 3)
    out = [grids]
    for _ in range(3):
        out.append(np.rot90(out[-1], axes=(1, 2)))
    return np.stack(out, axis=1).reshape(-1, 9)


def ease_in(u):
    """Quadratic ease-in on [0, 1]; clamps outside."""
    return np.clip(u, 0.0, 1.0) ** 2


# ---------------------------------------------------------------------------
# Sweep configurations
# ---------------------------------------------------------------------------


def _check_h(h: float):
    nu = round(-math.log2(h))
    if abs(2.0**-nu - h) > 1e-15 or not (7 <= nu <= 10):
        raise ValueError("h must be a power of two between 2^-10 and 2^-7")
    return nu


@dataclass(frozen=True)
class SineGenConfig:
    """Sweep counts and per-amplitude frequency ranges for sine sampling."""

    h: float
    kappa_min: float = KAPPA_MIN_DEFAULT
    kappa_max: float = KAPPA_MAX_DEFAULT
    n_amplitudes: int = 33
    n_tilts: int = 34
    tilt_lo: float = -np.pi / 4
    tilt_hi: float = np.pi / 4
    a_max: float = 0.25

    @property
    def a_min(self) -> float:
        return 1.5 * self.h

    @property
    def proportion(self) -> float:
        """Frequency-count multiplier growing linearly as h shrinks below H_BASE."""
        return 1.0 + math.log2(H_BASE / self.h) / 3.0

    @property
    def mu_max_kappa(self) -> float:
        return 0.5 * (self.kappa_max / 4.0 + self.kappa_max)

    def omega_range(self, amplitude: float):
        w_max = math.sqrt(self.kappa_max / amplitude)
        w_min = math.sqrt(self.kappa_max / (4.0 * amplitude))
        return w_min, w_max

    def n_frequencies(self, amplitude: float) -> int:
        w_min, w_max = self.omega_range(amplitude)
        d_crests = (np.pi / 2.0) * (1.0 / w_min - 1.0 / w_max)
        return int(math.ceil(d_crests / H_BASE * self.proportion)) + 1


@dataclass(frozen=True)
class CircleGenConfig:
    """Radius sweep size and per-radius sample budget for circle sampling."""

    h: float
    kappa_min: float = KAPPA_MIN_DEFAULT
    kappa_max: float = KAPPA_MAX_DEFAULT
    kappa_flat: float = KAPPA_FLAT_DEFAULT

    @property
    def r_min(self) -> float:
        return 1.0 / self.kappa_max

    @property
    def r_max(self) -> float:
        return 1.0 / self.kappa_min

    @property
    def r_flat(self) -> float:
        return 1.0 / self.kappa_flat

    @property
    def n_radii(self) -> int:
        return int(
            math.ceil(
                2.0
                * ((self.r_max - self.r_min) / H_BASE + 1.0)
                * (math.log2(H_BASE / self.h) + 1.0)
            )
        )

    def _ring_count(self, h: float) -> int:
        area = self.r_flat**2 - (self.r_flat - h) ** 2
        return int(math.ceil(5.0 * np.pi / h**2 * area))

    @property
    def n_candidates(self) -> int:
        return self._ring_count(self.h)

    @property
    def n_retained(self) -> int:
        return self._ring_count(H_BASE)


# ---------------------------------------------------------------------------
# Field builders
# ---------------------------------------------------------------------------


def build_sine_sdf_field(iface: SineInterface, grid: Grid, refine_band: float | None = None) -> LevelSetField:
    """Signed distance to the sine on the grid nodes.

    refine_band limits Newton refinement to nodes near the curve; the far
    field keeps polyline distances, which is inconsequential for stencil
    sampling and for redistancing the near band.
    """
    xx, yy = grid.meshgrid()
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    phi = sine_level_set_batch(pts, iface, signed_distance=True, refine_band=refine_band)
    return LevelSetField(grid, phi.reshape(grid.nx, grid.ny))


def build_circle_fields(iface: CircleInterface, h: float, reinit_iterations: int = 10):
    """(sdf field, reinitialized quadratic field) on a padded square domain."""
    half = iface.r + 8.0 * h
    grid = Grid.centered_square(half, h)
    sdf = field_from_function(
        grid, lambda x, y: circle_level_set(np.stack([x, y], axis=-1), iface, True)
    )
    rls_raw = field_from_function(
        grid, lambda x, y: circle_level_set(np.stack([x, y], axis=-1), iface, False)
    )
    return sdf, reinitialize(rls_raw, reinit_iterations)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


class _Accumulator:
    """Ordered sample buffers for one field variant."""

    def __init__(self):
        self.stencils = []
        self.targets = []
        self.numerical = []

    def extend(self, stencils, targets, numerical):
        self.stencils.append(stencils)
        self.targets.append(targets)
        self.numerical.append(numerical)

    def __len__(self):
        return sum(len(t) for t in self.targets)

    def arrays(self):
        if not self.targets:
            return np.zeros((0, 9)), np.zeros(0), np.zeros(0)
        return (
            np.concatenate(self.stencils),
            np.concatenate(self.targets),
            np.concatenate(self.numerical),
        )


def _emit_pairs(field_sdf, field_rls, nodes, kappas, h, sdf_acc, rls_acc, diag):
    """Negate, augment with rotations, and buffer pairs from both variants."""
    if len(nodes) == 0:
        return
    g_sdf = compound_numerical_batch(field_sdf, nodes)
    g_rls = compound_numerical_batch(field_rls, nodes)
    st_sdf = stencil_batch(field_sdf, nodes)
    st_rls = stencil_batch(field_rls, nodes)

    flip = np.where(kappas > 0, -1.0, 1.0)
    targets = h * kappas * flip
    st_sdf = st_sdf * flip[:, None]
    st_rls = st_rls * flip[:, None]
    num_sdf = g_sdf.hk * flip
    num_rls = g_rls.hk * flip

    rep = np.repeat(np.arange(len(nodes)), 4)
    sdf_acc.extend(_rotations4(st_sdf), targets[rep], num_sdf[rep])

    # Redistancing can, rarely, strip the sign change off a stencil; such
    # samples are dropped from the reinitialized variant only.  The adjacency
    # condition is invariant under the sign flip.
    c = st_rls[:, 4]
    adjacent = (
        (c * st_rls[:, 1] <= 0)
        | (c * st_rls[:, 7] <= 0)
        | (c * st_rls[:, 3] <= 0)
        | (c * st_rls[:, 5] <= 0)
    )
    dropped = int((~adjacent).sum())
    if dropped:
        diag["rls_adjacency_dropped"] = diag.get("rls_adjacency_dropped", 0) + dropped
    keep = np.flatnonzero(adjacent)
    rep = np.repeat(keep, 4)
    rls_acc.extend(_rotations4(st_rls[keep]), targets[rep], num_rls[rep])


def generate_sine_dataset(
    h: float,
    kappa_min: float = KAPPA_MIN_DEFAULT,
    kappa_max: float = KAPPA_MAX_DEFAULT,
    seed: int = 0,
    scale: float = 1.0,
    reinit_iterations: int = 10,
    config: SineGenConfig | None = None,
) -> Dataset:
    """Sweep sinusoid amplitude, frequency, and tilt; sample near-interface nodes.

    scale thins each sweep axis by scale**(1/3), so the number of generated
    fields shrinks roughly linearly with scale; scale = 1 reproduces the full
    sweep counts.
    """
    if not (0.0 < scale <= 1.0):
        raise ValueError("scale must be in (0, 1]")
    nu = _check_h(h)
    cfg = config or SineGenConfig(h, kappa_min, kappa_max)
    thin = scale ** (1.0 / 3.0)
    n_amp = max(1, math.ceil(cfg.n_amplitudes * thin))
    n_tilt = max(2, math.ceil(cfg.n_tilts * thin))

    grid = Grid.unit_centered(nu)
    amplitudes = np.linspace(cfg.a_min, cfg.a_max, n_amp)
    tilts = np.linspace(cfg.tilt_lo, cfg.tilt_hi, n_tilt)[:-1]
    mu = cfg.mu_max_kappa
    band = 10.0 * h

    sdf_acc, rls_acc = _Accumulator(), _Accumulator()
    diag: dict = {}

    for ia, amp in enumerate(amplitudes):
        w_min, w_max = cfg.omega_range(amp)
        n_w = max(1, math.ceil(cfg.n_frequencies(amp) * thin))
        for iw, omega in enumerate(np.linspace(w_min, w_max, n_w)):
            for it, tilt in enumerate(tilts):
                rng = np.random.default_rng(
                    np.random.SeedSequence((seed, _SINE_STREAM, ia, iw, it))
                )
                x0, y0 = rng.uniform(-h / 2.0, h / 2.0, size=2)
                iface = SineInterface(amp, omega, tilt, (x0, y0), dt=h / 5.0)
                fld_sdf = build_sine_sdf_field(iface, grid, refine_band=band)
                fld_rls = reinitialize(fld_sdf, reinit_iterations)
                nodes = interface_nodes(fld_sdf)
                if len(nodes) == 0:
                    continue
                cp = sine_closest_point_batch(grid.node_coords(nodes), iface)
                bad = ~cp.converged
                if np.any(bad):
                    diag["closest_point_failures"] = diag.get(
                        "closest_point_failures", 0
                    ) + int(bad.sum())
                cand = cp.converged & (np.abs(cp.kappa) >= kappa_min)
                nodes = nodes[cand]
                kap = cp.kappa[cand]
                if len(nodes) == 0:
                    continue
                prob = 0.05 + 0.95 * ease_in(np.abs(kap) / mu)
                acc = rng.uniform(size=len(nodes)) < prob
                _emit_pairs(
                    fld_sdf, fld_rls, nodes[acc], kap[acc], h, sdf_acc, rls_acc, diag
                )

    s_st, s_t, s_n = sdf_acc.arrays()
    r_st, r_t, r_n = rls_acc.arrays()
    return Dataset(
        np.concatenate([s_st, r_st]),
        np.concatenate([s_t, r_t]),
        np.array(["sine_sdf"] * len(s_t) + ["sine_rls"] * len(r_t)),
        h,
        kappa_min,
        kappa_max,
        seed=seed,
        numerical=np.concatenate([s_n, r_n]),
        diagnostics=diag,
    )


def generate_circle_dataset(
    h: float,
    kappa_min: float = KAPPA_MIN_DEFAULT,
    kappa_max: float = KAPPA_MAX_DEFAULT,
    seed: int = 0,
    scale: float = 1.0,
    reinit_iterations: int = 10,
    config: CircleGenConfig | None = None,
) -> Dataset:
    """Sweep radii over equally spaced curvatures; cap samples per radius."""
    if not (0.0 < scale <= 1.0):
        raise ValueError("scale must be in (0, 1]")
    _check_h(h)
    cfg = config or CircleGenConfig(h, kappa_min, kappa_max)
    need = max(1, math.ceil(cfg.n_candidates * scale))
    keep_n = max(1, math.ceil(cfg.n_retained * scale))
    kappas = np.linspace(kappa_min, kappa_max, cfg.n_radii)

    sdf_parts, rls_parts = [], []
    diag: dict = {}

    for ir, kap in enumerate(kappas):
        r = 1.0 / kap
        rng = np.random.default_rng(np.random.SeedSequence((seed, _CIRCLE_STREAM, ir)))
        sdf_acc, rls_acc = _Accumulator(), _Accumulator()
        draws = 0
        while len(sdf_acc) < need and draws < 100 + 10 * need:
            draws += 1
            cx, cy = rng.uniform(-h / 2.0, h / 2.0, size=2)
            iface = CircleInterface((cx, cy), r)
            fld_sdf, fld_rls = build_circle_fields(iface, h, reinit_iterations)
            nodes = interface_nodes(fld_sdf)
            kvec = np.full(len(nodes), kap)
            _emit_pairs(fld_sdf, fld_rls, nodes, kvec, h, sdf_acc, rls_acc, diag)
        for acc, parts in ((sdf_acc, sdf_parts), (rls_acc, rls_parts)):
            st, tg, num = acc.arrays()
            if len(tg) > keep_n:
                pick = np.sort(rng.choice(len(tg), size=keep_n, replace=False))
                st, tg, num = st[pick], tg[pick], num[pick]
            parts.append((st, tg, num))

    def _stack(parts):
        if not parts:
            return np.zeros((0, 9)), np.zeros(0), np.zeros(0)
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))

    s_st, s_t, s_n = _stack(sdf_parts)
    r_st, r_t, r_n = _stack(rls_parts)
    return Dataset(
        np.concatenate([s_st, r_st]),
        np.concatenate([s_t, r_t]),
        np.array(["circle_sdf"] * len(s_t) + ["circle_rls"] * len(r_t)),
        h,
        kappa_min,
        kappa_max,
        seed=seed,
        numerical=np.concatenate([s_n, r_n]),
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# Rebalancing and splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BalanceInfo:
    applied: bool
    occupied_bins: int
    min_bin: int
    cap: int


def bin_balance(dataset: Dataset, n_bins: int = 20, k_ratio: float = 2.0, seed: int = 0):
    """Cap curvature-histogram bins at k_ratio times the smallest bin.

    Bins span the admissible target range [-h*kappa_max, -c*h*kappa_flat].  If
    fewer than n_bins bins are occupied the dataset is returned unchanged with
    the diagnostic flag cleared.
    """
    lo = -dataset.h * dataset.kappa_max
    hi = -dataset.c_flat * dataset.h * dataset.kappa_flat
    edges = np.linspace(lo, hi, n_bins + 1)
    which = np.clip(np.digitize(dataset.targets, edges) - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    occupied = int((counts > 0).sum())
    if occupied < n_bins:
        return dataset, BalanceInfo(False, occupied, 0, 0)

    n_min = int(counts.min())
    cap = int(math.ceil(k_ratio * n_min))
    rng = np.random.default_rng(seed)
    keep = np.ones(len(dataset), dtype=bool)
    for b in range(n_bins):
        members = np.flatnonzero(which == b)
        if len(members) > cap:
            drop = rng.choice(members, size=len(members) - cap, replace=False)
            keep[drop] = False
    return dataset.select(keep), BalanceInfo(True, occupied, n_min, cap)


def split(dataset: Dataset, seed: int = 0):
    """Deterministic shuffled 70/15/15 partition (remainder to validation)."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(0.7 * n)
    n_test = int(0.15 * n)
    return (
        dataset.subset(perm[:n_train]),
        dataset.subset(perm[n_train : n_train + n_test]),
        dataset.subset(perm[n_train + n_test :]),
    )


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> None:
    """Header 'h kappa_min kappa_max seed n_samples', then one sample per line."""
    with open(path, "w") as fh:
        fh.write(
            f"{dataset.h:.17g} {dataset.kappa_min:.17g} {dataset.kappa_max:.17g} "
            f"{dataset.seed} {len(dataset)}\n"
        )
        for row, tgt, src in zip(dataset.stencils, dataset.targets, dataset.sources):
            vals = " ".join(format(v, ".17g") for v in row)
            fh.write(f"{vals} {tgt:.17g} {src}\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError(f"{path}: header needs 5 fields, got {len(header)}")
        h, kmin, kmax = float(header[0]), float(header[1]), float(header[2])
        seed, n = int(header[3]), int(header[4])
        stencils = np.empty((n, 9))
        targets = np.empty(n)
        sources = np.empty(n, dtype="<U10")
        for k in range(n):
            parts = fh.readline().split()
            if len(parts) != 11:
                raise ValueError(f"{path}: sample line {k + 2} needs 11 fields")
            stencils[k] = [float(v) for v in parts[:9]]
            targets[k] = float(parts[9])
            sources[k] = parts[10]
    return Dataset(stencils, targets, sources, h, kmin, kmax, seed=seed)
