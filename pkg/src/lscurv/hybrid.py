"""Switching curvature solver: numerical estimate first, neural when steep.

The numerical interface estimate h*kappa gates the route: magnitudes below
h*kappa_flat are trusted as-is, anything steeper is re-estimated by the
network.  Because the network only knows the negative curvature
half-spectrum, stencils headed its way are sign-normalized using the
numerical estimate's sign, and the inference is flipped back afterwards.
This construction makes the whole solver exactly antisymmetric under field
negation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    DegenerateStencilError,
    LevelSetField,
    compound_numerical_batch,
    interface_nodes,
    stencil_batch,
)
from .neural import MlpModel, forward_batch
from .preprocess import PcaParams, transform

ROUTE_NUMERICAL = "numerical"
ROUTE_NEURAL = "neural"
ROUTE_ERROR = "error"


def kappa_flat_for_level(nu: int, base: float = 5.0) -> float:
    """Resolution-scaled switch threshold: base doubled per level above 7."""
    return 2.0 ** (nu - 7) * base


@dataclass
class HybridSolver:
    model: MlpModel
    pca: PcaParams
    kappa_flat: float = None
    h: float = None

    def __post_init__(self):
        if self.kappa_flat is None:
            self.kappa_flat = self.model.kappa_flat
        if self.h is None:
            self.h = self.model.h
        if not self.kappa_flat > 0:
            raise ValueError("kappa_flat must be positive")
        if not math.isfinite(self.h) or self.h <= 0:
            raise ValueError("solver needs a positive grid spacing")
        if math.isfinite(self.model.h) and self.model.h != self.h:
            raise ValueError(
                f"model trained for h={self.model.h} used at h={self.h}"
            )
        if math.isfinite(self.pca.h) and self.pca.h != self.h:
            raise ValueError(
                f"preprocessor fitted for h={self.pca.h} used at h={self.h}"
            )
        if self.pca.kind != self.model.preprocessor_kind:
            raise ValueError(
                f"model expects {self.model.preprocessor_kind!r} preprocessing, "
                f"got {self.pca.kind!r}"
            )


@dataclass
class BatchEstimate:
    nodes: np.ndarray
    hk: np.ndarray
    route: np.ndarray
    neural_fraction: float
    errors: list = field(default_factory=list)

    def __len__(self):
        return len(self.hk)


def estimate_batch(
    solver: HybridSolver, fld: LevelSetField, nodes: np.ndarray | None = None
) -> BatchEstimate:
    """Apply the switching solver at every interface node (or a given list)."""
    if fld.grid.h != solver.h:
        raise ValueError("field spacing does not match the solver")
    if nodes is None:
        nodes = interface_nodes(fld)
    nodes = np.asarray(nodes).reshape(-1, 2)
    n = len(nodes)
    route = np.full(n, ROUTE_NUMERICAL, dtype="<U10")
    if n == 0:
        return BatchEstimate(nodes, np.zeros(0), route, 0.0)

    comp = compound_numerical_batch(fld, nodes)
    hk = comp.hk.copy()
    route[comp.degenerate] = ROUTE_ERROR
    errors = [
        (tuple(nodes[k]), "degenerate gradient")
        for k in np.flatnonzero(comp.degenerate)
    ]

    threshold = solver.h * solver.kappa_flat
    neural = ~comp.degenerate & ~(np.abs(comp.hk) < threshold)
    if np.any(neural):
        sel = np.flatnonzero(neural)
        sgn = np.where(comp.hk[sel] > 0, -1.0, 1.0)
        stencils = stencil_batch(fld, nodes[sel]) * sgn[:, None]
        pred = forward_batch(solver.model, transform(solver.pca, stencils))
        hk[sel] = pred * sgn
        route[sel] = ROUTE_NEURAL

    usable = route != ROUTE_ERROR
    frac = float((route == ROUTE_NEURAL).sum() / max(1, usable.sum()))
    return BatchEstimate(nodes, hk, route, frac, errors)


def estimate(solver: HybridSolver, fld: LevelSetField, node):
    """Single-node estimate; returns (h*kappa, route tag)."""
    res = estimate_batch(solver, fld, np.asarray([node]))
    if res.route[0] == ROUTE_ERROR:
        raise DegenerateStencilError(f"degenerate gradient at node {tuple(node)}")
    return float(res.hk[0]), str(res.route[0])
