"""Dimensionless-curvature regressor: a 9-input MLP trained from scratch.

Architecture is fixed at four hidden layers and one linear output unit.  The
forward pass follows

    h1 = W1^T phi + b1            (linear; optionally ReLU via relu_first)
    h_{i+1} = ReLU(W_{i+1}^T h_i + b_{i+1}),  i = 1..3
    out = W5^T h4 + b5

Training minimizes the batch MSE with Adam, halves the learning rate when the
validation MAE plateaus, stops early when it stagnates, and returns the
weights snapshotted at the best validation MAE.  ReLU'(z) is taken as 0 for
z <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .preprocess import PcaParams, transform

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpArchitecture:
    hidden_sizes: tuple
    relu_first: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.hidden_sizes)
        object.__setattr__(self, "hidden_sizes", sizes)
        if len(sizes) != 4 or any(s < 1 for s in sizes):
            raise ValueError("architecture is fixed at 4 positive hidden layers")

    @property
    def layer_sizes(self) -> tuple:
        return (9, *self.hidden_sizes, 1)


def param_count(arch: MlpArchitecture) -> int:
    sizes = arch.layer_sizes
    return sum(sizes[k] * sizes[k + 1] + sizes[k + 1] for k in range(5))


@dataclass
class MlpModel:
    arch: MlpArchitecture
    weights: list
    biases: list
    preprocessor_kind: str = "pca"
    h: float = float("nan")
    kappa_flat: float = 5.0

    def __post_init__(self):
        sizes = self.arch.layer_sizes
        if len(self.weights) != 5 or len(self.biases) != 5:
            raise ValueError("model needs 5 weight matrices and 5 bias vectors")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k + 1}: parameter shapes do not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k + 1}: non-finite parameters")
            self.weights[k] = w
            self.biases[k] = b

    def copy_params(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


def init_model(
    arch: MlpArchitecture,
    rng: np.random.Generator,
    preprocessor_kind: str = "pca",
    h: float = float("nan"),
    kappa_flat: float = 5.0,
) -> MlpModel:
    """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    sizes = arch.layer_sizes
    weights, biases = [], []
    for k in range(5):
        limit = np.sqrt(6.0 / (sizes[k] + sizes[k + 1]))
        weights.append(rng.uniform(-limit, limit, size=(sizes[k], sizes[k + 1])))
        biases.append(np.zeros(sizes[k + 1]))
    return MlpModel(arch, weights, biases, preprocessor_kind, h, kappa_flat)


def _forward_trace(model: MlpModel, x: np.ndarray):
    """Batched forward pass keeping pre-activations for backprop."""
    w, b = model.weights, model.biases
    z1 = x @ w[0] + b[0]
    a1 = np.maximum(z1, 0.0) if model.arch.relu_first else z1
    z2 = a1 @ w[1] + b[1]
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ w[2] + b[2]
    a3 = np.maximum(z3, 0.0)
    z4 = a3 @ w[3] + b[3]
    a4 = np.maximum(z4, 0.0)
    out = (a4 @ w[4] + b[4])[:, 0]
    return out, (x, z1, a1, z2, a2, z3, a3, z4, a4)


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 9:
        raise ValueError("input batch must be (n, 9)")
    return _forward_trace(model, x)[0]


def forward(model: MlpModel, phi_prime: np.ndarray) -> float:
    phi_prime = np.asarray(phi_prime, dtype=np.float64)
    if phi_prime.shape != (9,):
        raise ValueError("input must be a 9-vector")
    return float(forward_batch(model, phi_prime[None, :])[0])


def backward(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Gradients of the batch MSE with respect to all weights and biases."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty batch")
    out, trace = _forward_trace(model, x)
    return _backward_from_trace(model, trace, out, y)


def _backward_from_trace(model: MlpModel, trace, out: np.ndarray, y: np.ndarray):
    x0, z1, a1, z2, a2, z3, a3, z4, a4 = trace
    n = len(y)
    w = model.weights

    d = (2.0 / n) * (out - y)
    gw = [None] * 5
    gb = [None] * 5

    gw[4] = a4.T @ d[:, None]
    gb[4] = np.array([d.sum()])
    d4 = np.outer(d, w[4][:, 0]) * (z4 > 0.0)
    gw[3] = a3.T @ d4
    gb[3] = d4.sum(axis=0)
    d3 = (d4 @ w[3].T) * (z3 > 0.0)
    gw[2] = a2.T @ d3
    gb[2] = d3.sum(axis=0)
    d2 = (d3 @ w[2].T) * (z2 > 0.0)
    gw[1] = a1.T @ d2
    gb[1] = d2.sum(axis=0)
    d1 = d2 @ w[1].T
    if model.arch.relu_first:
        d1 = d1 * (z1 > 0.0)
    gw[0] = x0.T @ d1
    gb[0] = d1.sum(axis=0)
    return gw, gb


def mse_loss(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    r = forward_batch(model, x) - y
    return float(np.mean(r * r))


class AdamState:
    """First/second moment accumulators for one list of parameter arrays."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr: float):
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


@dataclass
class TrainConfig:
    lr0: float = 1.5e-4
    batch: int = 64
    plateau_patience: int = 15
    stop_patience: int = 60
    max_epochs: int = 700
    min_delta: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0 or self.plateau_patience < 1 or self.stop_patience < 1:
            raise ValueError("bad training configuration")


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    train_mse: list = field(default_factory=list)
    val_mae: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = -1

    def record(self, epoch, mse, mae, lr):
        self.epochs.append(epoch)
        self.train_mse.append(mse)
        self.val_mae.append(mae)
        self.lr.append(lr)

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,train_mse,val_mae,lr\n")
            for e, mse, mae, lr in zip(self.epochs, self.train_mse, self.val_mae, self.lr):
                fh.write(f"{e},{mse:.17g},{mae:.17g},{lr:.17g}\n")


def train(datasets, arch: MlpArchitecture, pre: PcaParams, config: TrainConfig):
    """Fit the regressor on (train, test, validation) datasets.

    The datasets carry raw stencils; the preprocessor is applied here so the
    learned weights and `pre` stay consistent.  Returns the model restored to
    its best-validation-MAE snapshot, plus the per-epoch history.
    """
    train_ds, _test_ds, val_ds = datasets
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("training and validation subsets must be nonempty")
    x_tr = transform(pre, train_ds.stencils)
    y_tr = train_ds.targets
    x_va = transform(pre, val_ds.stencils)
    y_va = val_ds.targets

    rng = np.random.default_rng(config.seed)
    model = init_model(arch, rng, preprocessor_kind=pre.kind, h=train_ds.h)
    params = model.weights + model.biases
    adam = AdamState(params)

    history = TrainHistory()
    best_mae = np.inf
    best_params = model.copy_params()
    best_epoch = -1
    lr = config.lr0
    wait_lr = 0
    wait_stop = 0
    n = len(y_tr)

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch):
            idx = perm[start : start + config.batch]
            xb, yb = x_tr[idx], y_tr[idx]
            out, trace = _forward_trace(model, xb)
            batch_mse = float(np.mean((out - yb) ** 2))
            if not np.isfinite(batch_mse):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch}"
                )
            gw, gb = _backward_from_trace(model, trace, out, yb)
            adam.step(params, gw + gb, lr)
            loss_sum += batch_mse * len(idx)
        train_mse = loss_sum / n
        val_mae = float(np.mean(np.abs(forward_batch(model, x_va) - y_va)))
        history.record(epoch, train_mse, val_mae, lr)

        if val_mae < best_mae - config.min_delta:
            best_mae = val_mae
            best_params = model.copy_params()
            best_epoch = epoch
            wait_lr = 0
            wait_stop = 0
        else:
            wait_lr += 1
            wait_stop += 1
            if wait_lr >= config.plateau_patience:
                lr *= 0.5
                wait_lr = 0
            if wait_stop >= config.stop_patience:
                break

    history.epochs_run = len(history.epochs)
    history.best_epoch = best_epoch
    model.weights, model.biases = best_params
    return model, history


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------


def save_model(model: MlpModel, path) -> None:
    """Text format: sizes header, metadata lines, then labeled parameter blocks."""
    sizes = model.arch.layer_sizes
    with open(path, "w") as fh:
        fh.write("mlp " + " ".join(str(s) for s in sizes) + "\n")
        fh.write(f"relu_first {int(model.arch.relu_first)}\n")
        fh.write(f"h {model.h:.17g}\n")
        fh.write(f"kappa_flat {model.kappa_flat:.17g}\n")
        fh.write(f"preprocessor {model.preprocessor_kind}\n")
        for k, (w, b) in enumerate(zip(model.weights, model.biases), start=1):
            fh.write(f"W{k}\n")
            for row in w:
                fh.write(" ".join(format(v, ".17g") for v in row) + "\n")
            fh.write(f"b{k}\n")
            fh.write(" ".join(format(v, ".17g") for v in b) + "\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise ValueError(f"{path}: truncated model file")
        pos += 1
        return lines[pos - 1]

    head = next_line().split()
    if head[0] != "mlp":
        raise ValueError(f"{path}: not a model file")
    sizes = [int(s) for s in head[1:]]
    if len(sizes) != 6 or sizes[0] != 9 or sizes[-1] != 1:
        raise ValueError(
            f"{path}: architecture must be 9 -> four hidden layers -> 1, got {sizes}"
        )

    def labeled(label):
        row = next_line().split()
        if row[0] != label:
            raise ValueError(f"{path}: expected {label!r}, found {row[0]!r}")
        return row[1]

    relu_first = bool(int(labeled("relu_first")))
    h = float(labeled("h"))
    kappa_flat = float(labeled("kappa_flat"))
    kind = labeled("preprocessor")

    weights, biases = [], []
    for k in range(1, 6):
        if next_line().strip() != f"W{k}":
            raise ValueError(f"{path}: missing W{k} block")
        w = np.array(
            [[float(v) for v in next_line().split()] for _ in range(sizes[k - 1])]
        )
        if next_line().strip() != f"b{k}":
            raise ValueError(f"{path}: missing b{k} block")
        b = np.array([float(v) for v in next_line().split()])
        weights.append(w)
        biases.append(b)
    arch = MlpArchitecture(tuple(sizes[1:5]), relu_first=relu_first)
    return MlpModel(arch, weights, biases, kind, h, kappa_flat)
