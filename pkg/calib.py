"""Calibration run for the acceptance-pipeline constants (dev only)."""
import sys
import time

import numpy as np

from lscurv.bench import run_circle_study, run_rose_experiment
from lscurv.datagen import (
    bin_balance,
    concat_datasets,
    generate_circle_dataset,
    generate_sine_dataset,
    split,
)
from lscurv.hybrid import HybridSolver
from lscurv.interfaces import RoseInterface
from lscurv.neural import MlpArchitecture, TrainConfig, forward_batch, train
from lscurv.preprocess import fit_pca, transform

SCALE_SINE = float(sys.argv[1]) if len(sys.argv) > 1 else 0.02
SCALE_CIRCLE = float(sys.argv[2]) if len(sys.argv) > 2 else 0.08
MAX_EPOCHS = int(sys.argv[3]) if len(sys.argv) > 3 else 700

h = 2.0**-7
t0 = time.time()
sine = generate_sine_dataset(h, seed=101, scale=SCALE_SINE)
t1 = time.time()
print(f"sine n={len(sine)} in {t1-t0:.0f}s diag={sine.diagnostics}", flush=True)
sine_b, info = bin_balance(sine, 20, 2.0, seed=101)
print(f"binned n={len(sine_b)} applied={info.applied} min_bin={info.min_bin} cap={info.cap}", flush=True)
t1 = time.time()
circle = generate_circle_dataset(h, seed=202, scale=SCALE_CIRCLE)
t2 = time.time()
print(f"circle n={len(circle)} in {t2-t1:.0f}s", flush=True)

combined = concat_datasets([sine_b, circle])
print(f"combined n={len(combined)}", flush=True)
parts = split(combined, seed=303)
train_ds, test_ds, val_ds = parts
pre = fit_pca(train_ds.stencils, h=h)

t2 = time.time()
model, hist = train(parts, MlpArchitecture((64, 64, 64, 64)), pre,
                    TrainConfig(max_epochs=MAX_EPOCHS, seed=404))
t3 = time.time()
model.kappa_flat = 5.0
print(f"train {hist.epochs_run} epochs in {(t3-t2)/60:.1f} min, best epoch {hist.best_epoch}, "
      f"best val MAE(hk) {min(hist.val_mae):.3e}", flush=True)

# criterion 6: rls-only test subset
rls = test_ds.select(np.isin(test_ds.sources, ["sine_rls", "circle_rls"]))
pred = forward_batch(model, transform(pre, rls.stencils))
net_mae = np.mean(np.abs(pred - rls.targets)) / h
num_ok = np.isfinite(rls.numerical)
num_mae = np.mean(np.abs(rls.numerical[num_ok] - rls.targets[num_ok])) / h
print(f"C6: rls test n={len(rls)} net MAE(kappa)={net_mae:.4f} num MAE(kappa)={num_mae:.4f} "
      f"ratio={net_mae/num_mae:.3f} (need <=0.5; num in [1,10]: {1 <= num_mae <= 10})", flush=True)

# criterion 7: Gamma_2
solver = HybridSolver(model, pre, kappa_flat=5.0)
res = run_rose_experiment(RoseInterface(0.12, 0.305, 5), 7, solver)
sh, s10 = res.stats["hybrid"], res.stats["numerical_10"]
print(f"C7: hybrid MAE={sh.mae:.4f} max={sh.max_ae:.3f} | num10 MAE={s10.mae:.4f} max={s10.max_ae:.3f} "
      f"| ratios mae={sh.mae/s10.mae:.3f} (<=1.0) max={sh.max_ae/s10.max_ae:.3f} (<=0.6) "
      f"n={res.n_nodes} frac={res.neural_fraction:.2f}", flush=True)
s20 = res.stats["numerical_20"]
print(f"    num20 MAE={s20.mae:.4f} max={s20.max_ae:.3f}", flush=True)

# criterion 9: circle study
t4 = time.time()
rows = run_circle_study(2.0 / 128.0, [7], 100, 505, {7: solver})
for r in rows:
    print(f"C9: {r.solver} l2={r.l2_rel:.4f} linf={r.linf_rel:.4f} frac={r.neural_fraction:.3f} n={r.n}", flush=True)
print(f"C9 time {time.time()-t4:.0f}s; total {(time.time()-t0)/60:.1f} min", flush=True)

# Gamma_1 for reference
res1 = run_rose_experiment(RoseInterface(0.075, 0.35, 5), 7, solver)
for k, v in res1.stats.items():
    print(f"G1 {k}: mae={v.mae:.4f} max={v.max_ae:.4f}", flush=True)

# worst-node diagnostics on Gamma_2
recs = res.records["hybrid"]
errs = sorted(((abs(r.kappa_est - r.kappa_true), r) for r in recs), reverse=True, key=lambda t: t[0])
print("worst hybrid nodes (err, true, est, route):")
for e, r in errs[:8]:
    print(f"  {e:8.3f}  true={r.kappa_true:9.3f} est={r.kappa_est:9.3f} {r.route}")
recs10 = res.records["numerical_10"]
errs10 = sorted(((abs(r.kappa_est - r.kappa_true), r) for r in recs10), reverse=True, key=lambda t: t[0])
print("worst numerical_10 nodes:")
for e, r in errs10[:5]:
    print(f"  {e:8.3f}  true={r.kappa_true:9.3f} est={r.kappa_est:9.3f}")
