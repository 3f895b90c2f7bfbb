import numpy as np
import pytest

from lscurv.datagen import Dataset
from lscurv.neural import (
    AdamState,
    MlpArchitecture,
    MlpModel,
    TrainConfig,
    backward,
    forward,
    forward_batch,
    init_model,
    load_model,
    mse_loss,
    param_count,
    save_model,
    train,
)
from lscurv.preprocess import fit_pca


def reference_forward(model, phi):
    """Independent plain-loop re-implementation of the forward recurrence."""
    h = list(phi)
    for layer in range(5):
        w, b = model.weights[layer], model.biases[layer]
        out = []
        for c in range(w.shape[1]):
            acc = b[c]
            for r in range(w.shape[0]):
                acc += w[r, c] * h[r]
            out.append(acc)
        relu = layer in (1, 2, 3) or (layer == 0 and model.arch.relu_first)
        h = [max(0.0, v) if relu else v for v in out]
    return h[0]


class TestArchitecture:
    def test_param_counts(self):
        assert param_count(MlpArchitecture((180, 180, 180, 180))) == 99_721
        assert param_count(MlpArchitecture((100, 100, 100, 100))) == 31_401
        assert param_count(MlpArchitecture((1, 1, 1, 1))) == 18

    def test_wrong_depth_rejected(self):
        with pytest.raises(ValueError):
            MlpArchitecture((8, 8, 8))


class TestForward:
    def test_zero_model_outputs_zero(self):
        arch = MlpArchitecture((4, 4, 4, 4))
        sizes = arch.layer_sizes
        model = MlpModel(
            arch,
            [np.zeros((sizes[k], sizes[k + 1])) for k in range(5)],
            [np.zeros(sizes[k + 1]) for k in range(5)],
        )
        assert forward(model, np.random.default_rng(0).normal(size=9)) == 0.0

    def test_single_unit_chain(self):
        arch = MlpArchitecture((1, 1, 1, 1))
        model = MlpModel(
            arch,
            [np.ones((9, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1))],
            [np.zeros(1)] * 5,
        )
        phi = np.full(9, 0.5)  # sums to 4.5 > 0, ReLU stays inactive
        assert forward(model, phi) == pytest.approx(4.5, abs=1e-15)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(13)
        for relu_first in (False, True):
            arch = MlpArchitecture((5, 3, 4, 2), relu_first=relu_first)
            model = init_model(arch, rng)
            for _ in range(5):
                phi = rng.normal(size=9)
                assert forward(model, phi) == pytest.approx(
                    reference_forward(model, phi), abs=1e-12
                )

    def test_piecewise_linear_continuity(self):
        rng = np.random.default_rng(14)
        model = init_model(MlpArchitecture((8, 8, 8, 8)), rng)
        x0 = rng.normal(size=9)
        d = rng.normal(size=9)
        eps = 1e-9
        for s in np.linspace(-2, 2, 25):
            left = forward(model, x0 + (s - eps) * d)
            right = forward(model, x0 + (s + eps) * d)
            assert abs(left - right) <= 1e-7

    def test_dimension_mismatch(self):
        model = init_model(MlpArchitecture((2, 2, 2, 2)), np.random.default_rng(0))
        with pytest.raises(ValueError):
            forward(model, np.zeros(8))


class TestBackward:
    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(15)
        worst = 0.0
        for trial in range(20):
            hidden = tuple(int(v) for v in rng.choice([1, 2, 4, 8], size=4))
            arch = MlpArchitecture(hidden, relu_first=bool(trial % 2))
            model = init_model(arch, rng)
            x = rng.normal(size=(8, 9))
            y = rng.normal(size=8)
            gw, gb = backward(model, x, y)
            eps = 1e-6
            for k in range(5):
                for params, grads in ((model.weights, gw), (model.biases, gb)):
                    arr = params[k]
                    flat = arr.reshape(-1)
                    for idx in range(flat.size):
                        orig = flat[idx]
                        flat[idx] = orig + eps
                        lp = mse_loss(model, x, y)
                        flat[idx] = orig - eps
                        lm = mse_loss(model, x, y)
                        flat[idx] = orig
                        fd = (lp - lm) / (2 * eps)
                        g = grads[k].reshape(-1)[idx]
                        worst = max(worst, abs(g - fd) / max(abs(g), 1e-8))
        assert worst <= 1e-4

    def test_zero_residual_zero_gradients(self):
        rng = np.random.default_rng(16)
        model = init_model(MlpArchitecture((4, 4, 4, 4)), rng)
        x = rng.normal(size=(6, 9))
        y = forward_batch(model, x)
        gw, gb = backward(model, x, y)
        assert all(np.abs(g).max() == 0.0 for g in gw + gb)

    def test_output_bias_closed_form(self):
        rng = np.random.default_rng(17)
        model = init_model(MlpArchitecture((4, 4, 4, 4)), rng)
        x = rng.normal(size=(10, 9))
        y = rng.normal(size=10)
        _, gb = backward(model, x, y)
        expect = np.mean(2.0 * (forward_batch(model, x) - y))
        assert gb[4][0] == pytest.approx(expect, abs=1e-14)

    def test_empty_batch_rejected(self):
        model = init_model(MlpArchitecture((2, 2, 2, 2)), np.random.default_rng(0))
        with pytest.raises(ValueError):
            backward(model, np.zeros((0, 9)), np.zeros(0))


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        rng = np.random.default_rng(18)
        params = [rng.normal(size=(3, 2)), rng.normal(size=2)]
        before = [p.copy() for p in params]
        state = AdamState(params)
        for _ in range(3):
            state.step(params, [np.zeros_like(p) for p in params], lr=0.1)
        for p, b in zip(params, before):
            assert np.array_equal(p, b)


def _linear_parts(n=10_000, seed=19):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 9))
    w = rng.normal(size=9)
    y = x @ w + 0.3
    def mk(xs, ys):
        return Dataset(xs, ys, np.array(["sine_sdf"] * len(ys)), 2.0**-7)
    n1, n2 = int(0.7 * n), int(0.85 * n)
    return (mk(x[:n1], y[:n1]), mk(x[n1:n2], y[n1:n2]), mk(x[n2:], y[n2:]))


class TestTrain:
    def test_linear_target_learned(self):
        parts = _linear_parts()
        pre = fit_pca(parts[0].stencils)
        model, hist = train(
            parts,
            MlpArchitecture((16, 16, 16, 16)),
            pre,
            TrainConfig(lr0=3e-3, max_epochs=200, seed=20),
        )
        assert min(hist.val_mae) <= 1e-3
        assert hist.epochs_run <= 200

    def test_deterministic(self):
        parts = _linear_parts(n=600)
        pre = fit_pca(parts[0].stencils)
        cfg = TrainConfig(lr0=1e-3, max_epochs=12, seed=21)
        arch = MlpArchitecture((8, 8, 8, 8))
        m1, h1 = train(parts, arch, pre, cfg)
        m2, h2 = train(parts, arch, pre, cfg)
        assert h1.train_mse == h2.train_mse
        assert h1.val_mae == h2.val_mae
        assert all(np.array_equal(a, b) for a, b in zip(m1.weights, m2.weights))

    def test_lr_non_increasing_and_halving(self):
        parts = _linear_parts(n=400)
        pre = fit_pca(parts[0].stencils)
        _, hist = train(
            parts,
            MlpArchitecture((2, 2, 2, 2)),
            pre,
            TrainConfig(lr0=1e-5, max_epochs=40, plateau_patience=3, stop_patience=100, seed=22),
        )
        lr = np.array(hist.lr)
        assert (np.diff(lr) <= 0).all()

    def test_no_halving_on_improvement_epochs(self):
        parts = _linear_parts(n=2000)
        pre = fit_pca(parts[0].stencils)
        _, hist = train(
            parts,
            MlpArchitecture((8, 8, 8, 8)),
            pre,
            TrainConfig(lr0=3e-3, max_epochs=60, plateau_patience=5, seed=23),
        )
        mae = np.array(hist.val_mae)
        lr = np.array(hist.lr)
        improved = np.zeros(len(mae), dtype=bool)
        best = np.inf
        for k, v in enumerate(mae):
            improved[k] = v < best - 1e-6
            best = min(best, v)
        halved_after = np.flatnonzero(np.diff(lr) < 0)  # lr changed entering epoch e+1
        for e in halved_after:
            assert not improved[e]

    def test_history_csv(self, tmp_path):
        parts = _linear_parts(n=300)
        pre = fit_pca(parts[0].stencils)
        _, hist = train(
            parts, MlpArchitecture((2, 2, 2, 2)), pre, TrainConfig(max_epochs=3, seed=0)
        )
        path = tmp_path / "h.csv"
        hist.save_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_mse,val_mae,lr"
        assert len(lines) == 1 + hist.epochs_run


class TestModelIO:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(24)
        model = init_model(
            MlpArchitecture((5, 4, 3, 2), relu_first=True), rng, "std", 2.0**-8, 10.0
        )
        path = tmp_path / "m.mlp"
        save_model(model, path)
        back = load_model(path)
        assert back.arch == model.arch
        assert back.h == model.h
        assert back.kappa_flat == model.kappa_flat
        assert back.preprocessor_kind == "std"
        for a, b in zip(model.weights + model.biases, back.weights + back.biases):
            assert np.array_equal(a, b)

    def test_hand_written_18_parameter_file(self, tmp_path):
        path = tmp_path / "tiny.mlp"
        lines = ["mlp 9 1 1 1 1", "relu_first 0", "h 0.0078125", "kappa_flat 5",
                 "preprocessor pca"]
        lines += ["W1"] + ["1"] * 9 + ["b1", "0"]
        for k in (2, 3, 4, 5):
            lines += [f"W{k}", "1", f"b{k}", "0"]
        path.write_text("\n".join(lines) + "\n")
        model = load_model(path)
        phi = np.full(9, 0.5)  # ReLU inactive on the positive path
        assert forward(model, phi) == pytest.approx(4.5, abs=1e-15)

    def test_three_hidden_layers_rejected(self, tmp_path):
        path = tmp_path / "bad.mlp"
        path.write_text("mlp 9 4 4 4 1\n")
        with pytest.raises(ValueError):
            load_model(path)
