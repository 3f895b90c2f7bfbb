"""Input preprocessing for the curvature regressor.

The default transform centers the nine stencil features, rotates them onto
the principal components of the training matrix, and whitens each component
to unit variance:

    phi' = (V^T (phi - mu)) / sigma

where V holds the eigenvectors of the sample covariance C = (D-M)^T (D-M) /
(n-1) and sigma the square roots of its eigenvalues.  A plain per-feature
standardization (V = I, sigma = feature std) is available behind the same
interface; both persist to a small text format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class PcaParams:
    """Fitted preprocessing state: feature means, components, scales."""

    kind: str
    mu: np.ndarray
    sigma: np.ndarray
    components: np.ndarray
    h: float = field(default=float("nan"))

    def __post_init__(self):
        if self.kind not in ("pca", "std"):
            raise ValueError(f"unknown preprocessor kind {self.kind!r}")
        for name in ("mu", "sigma", "components"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.float64)
            )
        if self.mu.shape != (9,) or self.sigma.shape != (9,):
            raise ValueError("mu and sigma must be 9-vectors")
        if self.components.shape != (9, 9):
            raise ValueError("components must be a 9x9 matrix")


def _sign_fix(v: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry positive (determinism)."""
    v = v.copy()
    for k in range(v.shape[1]):
        lead = np.argmax(np.abs(v[:, k]))
        if v[lead, k] < 0:
            v[:, k] = -v[:, k]
    return v


def fit_pca(training_matrix: np.ndarray, h: float = float("nan")) -> PcaParams:
    """Principal components and whitening scales of an (n, 9) training matrix."""
    data = np.asarray(training_matrix, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 9:
        raise ValueError("training matrix must be (n, 9)")
    n = data.shape[0]
    if n < 10:
        raise ValueError("need at least 10 training rows")
    mu = data.mean(axis=0)
    centered = data - mu
    cov = centered.T @ centered / (n - 1)
    u, s, _ = np.linalg.svd(cov, hermitian=True)
    sigma = np.sqrt(s)
    low = np.flatnonzero(sigma < _SIGMA_FLOOR)
    if low.size:
        raise ValueError(
            f"rank-deficient training data: component {int(low[0])} has "
            f"standard deviation {sigma[low[0]]:.3e}"
        )
    return PcaParams("pca", mu, sigma, _sign_fix(u), h)


def fit_standardization(training_matrix: np.ndarray, h: float = float("nan")) -> PcaParams:
    """Per-feature centering and scaling, no rotation."""
    data = np.asarray(training_matrix, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 9:
        raise ValueError("training matrix must be (n, 9)")
    if data.shape[0] < 10:
        raise ValueError("need at least 10 training rows")
    mu = data.mean(axis=0)
    sigma = data.std(axis=0, ddof=1)
    low = np.flatnonzero(sigma < _SIGMA_FLOOR)
    if low.size:
        raise ValueError(
            f"rank-deficient training data: feature {int(low[0])} has "
            f"standard deviation {sigma[low[0]]:.3e}"
        )
    return PcaParams("std", mu, sigma, np.eye(9), h)


def transform(params: PcaParams, phi: np.ndarray) -> np.ndarray:
    """Apply the fitted transform to a 9-vector or an (n, 9) batch."""
    phi = np.asarray(phi, dtype=np.float64)
    return (phi - params.mu) @ params.components / params.sigma


def save_pca(params: PcaParams, path) -> None:
    """Header '<kind> 9 <h>', then mu, sigma, and (for pca) V rows."""
    with open(path, "w") as fh:
        fh.write(f"{params.kind} 9 {params.h:.17g}\n")
        fh.write(" ".join(format(v, ".17g") for v in params.mu) + "\n")
        fh.write(" ".join(format(v, ".17g") for v in params.sigma) + "\n")
        if params.kind == "pca":
            for row in params.components:
                fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_pca(path) -> PcaParams:
    with open(path) as fh:
        lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty preprocessor file")
    head = lines[0]
    if len(head) != 3 or head[0] not in ("pca", "std") or head[1] != "9":
        raise ValueError(f"{path}: line 1: bad header {' '.join(head)!r}")
    kind, h = head[0], float(head[2])
    need = 3 + (9 if kind == "pca" else 0)
    if len(lines) != need:
        raise ValueError(f"{path}: expected {need} lines for kind {kind!r}, got {len(lines)}")

    def vec(ln_no):
        row = lines[ln_no]
        if len(row) != 9:
            raise ValueError(f"{path}: line {ln_no + 1}: expected 9 values, got {len(row)}")
        return np.array([float(v) for v in row])

    mu, sigma = vec(1), vec(2)
    if kind == "pca":
        comps = np.stack([vec(3 + k) for k in range(9)])
    else:
        comps = np.eye(9)
    return PcaParams(kind, mu, sigma, comps, h)
