"""Experiment harness: rose evaluations, convergence tables, circle norms.

Truth labels come from the analytic closest point of each grid node, so the
measured error includes the solvers' own projection error.  All statistics
are computed on kappa (not h*kappa).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Grid,
    compound_numerical_batch,
    field_from_function,
    interface_nodes,
    reinitialize,
)
from .hybrid import (
    ROUTE_ERROR,
    ROUTE_NEURAL,
    ROUTE_NUMERICAL,
    HybridSolver,
    estimate_batch,
)
from .interfaces import (
    CircleInterface,
    RoseInterface,
    circle_level_set,
    rose_closest_point_batch,
    rose_level_set,
)

SOLVER_HYBRID = "hybrid"
SOLVER_NUM10 = "numerical_10"
SOLVER_NUM20 = "numerical_20"


@dataclass(frozen=True)
class ErrorStats:
    mae: float
    max_ae: float
    mse: float
    n: int

    def __post_init__(self):
        if self.mae > self.max_ae * (1 + 1e-12):
            raise ValueError("inconsistent stats: mae exceeds max_ae")
        if self.mse < self.mae**2 * (1 - 1e-12):
            raise ValueError("inconsistent stats: mse below mae^2")


def error_stats(predictions, truths) -> ErrorStats:
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape or predictions.size == 0:
        raise ValueError("predictions and truths must be equal-length and nonempty")
    d = np.abs(predictions - truths)
    return ErrorStats(float(d.mean()), float(d.max()), float((d * d).mean()), d.size)


def relative_norms(predictions, kappa_star: float):
    """Relative L2 and Linf error norms against a single exact curvature."""
    if kappa_star == 0:
        raise ValueError("relative norms need a nonzero reference curvature")
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.size == 0:
        raise ValueError("empty sample set")
    rel = (predictions - kappa_star) / kappa_star
    return float(np.sqrt(np.mean(rel * rel))), float(np.max(np.abs(rel)))


@dataclass
class NodeRecord:
    i: int
    j: int
    x_perp: float
    y_perp: float
    kappa_true: float
    kappa_est: float
    route: str


@dataclass
class RoseExperimentResult:
    nu: int
    h: float
    stats: dict
    records: dict
    n_nodes: int
    n_dropped: int
    neural_fraction: float


def build_rose_field(iface: RoseInterface, nu: int, reinit_iterations: int = 0):
    grid = Grid.unit_centered(nu)
    fld = field_from_function(
        grid, lambda x, y: rose_level_set(np.stack([x, y], axis=-1), iface)
    )
    if reinit_iterations:
        fld = reinitialize(fld, reinit_iterations)
    return fld


def run_rose_experiment(
    iface: RoseInterface,
    nu: int,
    solver: HybridSolver | None = None,
    iterations=(10, 20),
) -> RoseExperimentResult:
    """Evaluate the hybrid and numerical solvers along a rose interface.

    Interface nodes are taken from the field reinitialized with the first
    iteration count; the second count feeds a reference numerical solver
    evaluated at the same nodes.
    """
    h = 2.0**-nu
    raw = build_rose_field(iface, nu)
    f_a = reinitialize(raw, iterations[0])
    f_b = reinitialize(raw, iterations[1])
    nodes = interface_nodes(f_a)

    cp = rose_closest_point_batch(
        np.stack([f_a.grid.x(nodes[:, 0]), f_a.grid.y(nodes[:, 1])], axis=-1), iface
    )
    keep = cp.converged
    comp_a = compound_numerical_batch(f_a, nodes)
    comp_b = compound_numerical_batch(f_b, nodes)
    keep = keep & ~comp_a.degenerate & ~comp_b.degenerate

    est = estimate_batch(solver, f_a, nodes) if solver is not None else None
    if est is not None:
        keep = keep & (est.route != ROUTE_ERROR)

    n_dropped = int((~keep).sum())
    nodes = nodes[keep]
    truth = cp.kappa[keep]
    feet = cp.points[keep]

    per_solver = {
        SOLVER_NUM10: (comp_a.hk[keep] / h, np.full(len(nodes), ROUTE_NUMERICAL)),
        SOLVER_NUM20: (comp_b.hk[keep] / h, np.full(len(nodes), ROUTE_NUMERICAL)),
    }
    frac = 0.0
    if est is not None:
        per_solver[SOLVER_HYBRID] = (est.hk[keep] / h, est.route[keep])
        frac = float((est.route[keep] == ROUTE_NEURAL).mean()) if len(nodes) else 0.0

    stats = {}
    records = {}
    for name, (kappa_est, routes) in per_solver.items():
        stats[name] = error_stats(kappa_est, truth)
        records[name] = [
            NodeRecord(
                int(nodes[k, 0]),
                int(nodes[k, 1]),
                float(feet[k, 0]),
                float(feet[k, 1]),
                float(truth[k]),
                float(kappa_est[k]),
                str(routes[k]),
            )
            for k in range(len(nodes))
        ]
    return RoseExperimentResult(nu, h, stats, records, len(nodes), n_dropped, frac)


@dataclass(frozen=True)
class ConvergenceRow:
    nu: int
    solver: str
    mae: float
    order_mae: float
    max_ae: float
    order_maxae: float


def convergence_orders(errors):
    """order[k] = log2(err[k-1] / err[k]); the first entry has none (NaN)."""
    errors = np.asarray(errors, dtype=np.float64)
    orders = np.full(len(errors), np.nan)
    orders[1:] = np.log2(errors[:-1] / errors[1:])
    return orders


def run_convergence_study(
    iface: RoseInterface,
    nus,
    solvers_by_nu: dict | None = None,
    iterations=(10, 20),
):
    """Rose experiments across resolutions, assembled into order tables."""
    nus = list(nus)
    results = {}
    for nu in nus:
        solver = None
        if solvers_by_nu is not None:
            if nu not in solvers_by_nu:
                raise ValueError(f"no trained model supplied for nu={nu}")
            solver = solvers_by_nu[nu]
        results[nu] = run_rose_experiment(iface, nu, solver, iterations)

    names = [SOLVER_HYBRID] if solvers_by_nu is not None else []
    names += [SOLVER_NUM10, SOLVER_NUM20]
    rows = []
    for name in names:
        maes = [results[nu].stats[name].mae for nu in nus]
        maxes = [results[nu].stats[name].max_ae for nu in nus]
        o_mae = convergence_orders(maes)
        o_max = convergence_orders(maxes)
        for k, nu in enumerate(nus):
            rows.append(
                ConvergenceRow(nu, name, maes[k], float(o_mae[k]), maxes[k], float(o_max[k]))
            )
    return rows, results


@dataclass
class CircleStudyRow:
    nu: int
    r_over_h: float
    solver: str
    l2_rel: float
    linf_rel: float
    neural_fraction: float
    n: int


def run_circle_study(
    radius: float,
    nus,
    n_centers: int,
    seed: int,
    solvers_by_nu: dict | None = None,
    reinit_iterations: int = 10,
    sdf_mode: bool = False,
):
    """Pool interface samples over randomly shifted circles; report relative norms.

    sdf_mode evaluates the exact signed distance field without redistancing
    (a validation configuration for the numerical baseline).
    """
    rows = []
    for nu in nus:
        h = 2.0**-nu
        pools = {SOLVER_NUM10: []}
        fracs = []
        if solvers_by_nu is not None:
            if nu not in solvers_by_nu:
                raise ValueError(f"no trained model supplied for nu={nu}")
            pools[SOLVER_HYBRID] = []
        for ic in range(n_centers):
            rng = np.random.default_rng(np.random.SeedSequence((seed, 17, nu, ic)))
            cx, cy = rng.uniform(-h / 2.0, h / 2.0, size=2)
            iface = CircleInterface((cx, cy), radius)
            grid = Grid.centered_square(radius + 8.0 * h, h)
            fld = field_from_function(
                grid,
                lambda x, y: circle_level_set(
                    np.stack([x, y], axis=-1), iface, sdf_mode
                ),
            )
            if not sdf_mode:
                fld = reinitialize(fld, reinit_iterations)
            nodes = interface_nodes(fld)
            comp = compound_numerical_batch(fld, nodes)
            ok = ~comp.degenerate
            pools[SOLVER_NUM10].append(comp.hk[ok] / h)
            if solvers_by_nu is not None:
                est = estimate_batch(solvers_by_nu[nu], fld, nodes)
                good = est.route != ROUTE_ERROR
                pools[SOLVER_HYBRID].append(est.hk[good] / h)
                fracs.append(est.neural_fraction)
        for name, parts in pools.items():
            kappa = np.concatenate(parts)
            l2, linf = relative_norms(kappa, 1.0 / radius)
            frac = float(np.mean(fracs)) if (name == SOLVER_HYBRID and fracs) else 0.0
            rows.append(
                CircleStudyRow(nu, radius / h, name, l2, linf, frac, len(kappa))
            )
    return rows
