"""Command-line front end.

Subcommands cover the full pipeline: dataset generation (gen-sine,
gen-circle), preprocessing (fit-pca), training (train), field inference
(infer), and the evaluation studies (eval-rose, eval-convergence,
eval-circle).  Evaluations write CSV files plus rendered figures, and every
command prints a single JSON summary line at the end.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, datagen, figures, grid, hybrid, neural, preprocess
from .interfaces import RoseInterface


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _summary(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _load_combined(paths) -> datagen.Dataset:
    return datagen.concat_datasets([datagen.load_dataset(p) for p in paths])


def _load_solver(model_path, pca_path, kappa_flat=None) -> hybrid.HybridSolver:
    model = neural.load_model(model_path)
    pca = preprocess.load_pca(pca_path)
    return hybrid.HybridSolver(model, pca, kappa_flat=kappa_flat)


def _write_stats_csv(path, stats: dict) -> None:
    with open(path, "w") as fh:
        fh.write("solver,mae,max_ae,mse,n\n")
        for name in sorted(stats):
            s = stats[name]
            fh.write(f"{name},{_fmt(s.mae)},{_fmt(s.max_ae)},{_fmt(s.mse)},{s.n}\n")


def _write_node_csv(path, records) -> None:
    with open(path, "w") as fh:
        fh.write("i,j,x_perp,y_perp,kappa_true,kappa_est,route\n")
        for r in records:
            fh.write(
                f"{r.i},{r.j},{_fmt(r.x_perp)},{_fmt(r.y_perp)},"
                f"{_fmt(r.kappa_true)},{_fmt(r.kappa_est)},{r.route}\n"
            )


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_gen_sine(args):
    h = 2.0**-args.nu
    ds = datagen.generate_sine_dataset(
        h, args.kappa_min, args.kappa_max, seed=args.seed, scale=args.scale
    )
    info = None
    if not args.no_bin:
        ds, info = datagen.bin_balance(ds, args.bins, args.K, seed=args.seed)
    datagen.save_dataset(ds, args.out)
    _summary(
        {
            "command": "gen-sine",
            "nu": args.nu,
            "seed": args.seed,
            "scale": args.scale,
            "n_samples": len(ds),
            "binned": bool(info.applied) if info is not None else False,
            "diagnostics": ds.diagnostics,
            "out": str(args.out),
        }
    )


def _cmd_gen_circle(args):
    h = 2.0**-args.nu
    ds = datagen.generate_circle_dataset(
        h, args.kappa_min, args.kappa_max, seed=args.seed, scale=args.scale
    )
    datagen.save_dataset(ds, args.out)
    _summary(
        {
            "command": "gen-circle",
            "nu": args.nu,
            "seed": args.seed,
            "scale": args.scale,
            "n_samples": len(ds),
            "diagnostics": ds.diagnostics,
            "out": str(args.out),
        }
    )


def _cmd_fit_pca(args):
    ds = _load_combined(args.data)
    train_ds, _, _ = datagen.split(ds, seed=args.seed)
    fit = preprocess.fit_standardization if args.std else preprocess.fit_pca
    params = fit(train_ds.stencils, h=ds.h)
    preprocess.save_pca(params, args.out)
    _summary(
        {
            "command": "fit-pca",
            "kind": params.kind,
            "n_fit": len(train_ds),
            "seed": args.seed,
            "out": str(args.out),
        }
    )


def _cmd_train(args):
    ds = _load_combined(args.data)
    parts = datagen.split(ds, seed=args.seed)
    pca = preprocess.load_pca(args.pca)
    arch = neural.MlpArchitecture(tuple(args.hidden), relu_first=args.relu_first)
    config = neural.TrainConfig(
        lr0=args.lr, batch=args.batch, max_epochs=args.max_epochs, seed=args.seed
    )
    model, history = neural.train(parts, arch, pca, config)
    model.kappa_flat = args.kappa_flat
    neural.save_model(model, args.out)
    history_path = args.history or str(Path(args.out).with_suffix(".history.csv"))
    history.save_csv(history_path)
    if not args.no_figures:
        figures.history_figure(history, str(Path(history_path).with_suffix(".png")))
    test_x = preprocess.transform(pca, parts[1].stencils)
    test_pred = neural.forward_batch(model, test_x)
    test_stats = bench.error_stats(test_pred / ds.h, parts[1].targets / ds.h)
    _summary(
        {
            "command": "train",
            "epochs_run": history.epochs_run,
            "best_epoch": history.best_epoch,
            "params": neural.param_count(arch),
            "test_mae_kappa": test_stats.mae,
            "test_mse_kappa": test_stats.mse,
            "out": str(args.out),
            "history": str(history_path),
        }
    )


def _cmd_infer(args):
    fld = grid.load_field(args.field)
    solver = _load_solver(args.model, args.pca, args.kappa_flat)
    res = hybrid.estimate_batch(solver, fld)
    pts, _ = grid.projection_batch(fld, res.nodes)
    with open(args.out, "w") as fh:
        fh.write("i,j,x_perp,y_perp,kappa_est,route\n")
        for k in range(len(res)):
            fh.write(
                f"{res.nodes[k, 0]},{res.nodes[k, 1]},{_fmt(pts[k, 0])},"
                f"{_fmt(pts[k, 1])},{_fmt(res.hk[k] / fld.grid.h)},{res.route[k]}\n"
            )
    _summary(
        {
            "command": "infer",
            "n_nodes": len(res),
            "neural_fraction": res.neural_fraction,
            "n_errors": len(res.errors),
            "out": str(args.out),
        }
    )


def _cmd_eval_rose(args):
    iface = RoseInterface(args.a, args.b, args.p)
    solver = None
    if args.model:
        kf = args.kappa_flat
        if kf is None:
            kf = hybrid.kappa_flat_for_level(args.nu)
        solver = _load_solver(args.model, args.pca, kf)
    result = bench.run_rose_experiment(iface, args.nu, solver)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats_path = out_dir / "rose_stats.csv"
    _write_stats_csv(stats_path, result.stats)
    for name, recs in result.records.items():
        _write_node_csv(out_dir / f"rose_nodes_{name}.csv", recs)
    if not args.no_figures:
        figures.correlation_figure(
            result.records,
            result.h,
            out_dir / "rose_correlation.png",
            title=f"a={args.a} b={args.b} p={args.p} nu={args.nu}",
        )
    print(f"{'solver':<14}{'mae':>14}{'max_ae':>14}{'mse':>14}{'n':>8}")
    for name in sorted(result.stats):
        s = result.stats[name]
        print(f"{name:<14}{s.mae:>14.6g}{s.max_ae:>14.6g}{s.mse:>14.6g}{s.n:>8}")
    _summary(
        {
            "command": "eval-rose",
            "nu": args.nu,
            "n_nodes": result.n_nodes,
            "n_dropped": result.n_dropped,
            "neural_fraction": result.neural_fraction,
            "stats": {
                k: {"mae": v.mae, "max_ae": v.max_ae, "mse": v.mse}
                for k, v in result.stats.items()
            },
            "out_dir": str(out_dir),
        }
    )


def _cmd_eval_convergence(args):
    iface = RoseInterface(args.a, args.b, args.p)
    solvers = None
    if args.models:
        if len(args.models) != len(args.nus) or len(args.pcas) != len(args.nus):
            raise SystemExit("need one --models and one --pcas entry per --nus entry")
        solvers = {
            nu: _load_solver(m, p, hybrid.kappa_flat_for_level(nu))
            for nu, m, p in zip(args.nus, args.models, args.pcas)
        }
    rows, _ = bench.run_convergence_study(iface, args.nus, solvers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "convergence.csv"
    with open(path, "w") as fh:
        fh.write("nu,solver,mae,order_mae,max_ae,order_maxae\n")
        for r in rows:
            fh.write(
                f"{r.nu},{r.solver},{_fmt(r.mae)},{_fmt(r.order_mae)},"
                f"{_fmt(r.max_ae)},{_fmt(r.order_maxae)}\n"
            )
    if not args.no_figures:
        figures.convergence_figure(rows, out_dir / "convergence.png")
    _summary(
        {
            "command": "eval-convergence",
            "nus": list(args.nus),
            "out": str(path),
        }
    )


def _cmd_eval_circle(args):
    solvers = None
    if args.models:
        if len(args.models) != len(args.nus) or len(args.pcas) != len(args.nus):
            raise SystemExit("need one --models and one --pcas entry per --nus entry")
        solvers = {
            nu: _load_solver(m, p, hybrid.kappa_flat_for_level(nu))
            for nu, m, p in zip(args.nus, args.models, args.pcas)
        }
    rows = bench.run_circle_study(
        args.R, args.nus, args.centers, args.seed, solvers, sdf_mode=args.sdf
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "circle.csv"
    with open(path, "w") as fh:
        fh.write("nu,R_over_h,solver,l2_rel,linf_rel,neural_fraction,n\n")
        for r in rows:
            fh.write(
                f"{r.nu},{_fmt(r.r_over_h)},{r.solver},{_fmt(r.l2_rel)},"
                f"{_fmt(r.linf_rel)},{_fmt(r.neural_fraction)},{r.n}\n"
            )
    if not args.no_figures:
        figures.circle_figure(rows, out_dir / "circle.png")
    _summary(
        {
            "command": "eval-circle",
            "R": args.R,
            "nus": list(args.nus),
            "out": str(path),
        }
    )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p, scale=False):
    p.add_argument("--seed", type=int, default=0)
    if scale:
        p.add_argument("--scale", type=float, default=1.0)
        p.add_argument("--kappa-min", type=float, default=datagen.KAPPA_MIN_DEFAULT)
        p.add_argument("--kappa-max", type=float, default=datagen.KAPPA_MAX_DEFAULT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lscurv",
        description="Hybrid numerical/neural curvature estimation for level-set interfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sine", help="generate sinusoidal-interface samples")
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--no-bin", action="store_true")
    _add_common(p, scale=True)
    p.set_defaults(fn=_cmd_gen_sine)

    p = sub.add_parser("gen-circle", help="generate circular-interface samples")
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_common(p, scale=True)
    p.set_defaults(fn=_cmd_gen_circle)

    p = sub.add_parser("fit-pca", help="fit the input preprocessor on the training split")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--std", action="store_true", help="plain standardization instead of PCA")
    _add_common(p)
    p.set_defaults(fn=_cmd_fit_pca)

    p = sub.add_parser("train", help="train the curvature regressor")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default=None)
    p.add_argument("--hidden", type=int, nargs=4, default=[64, 64, 64, 64])
    p.add_argument("--lr", type=float, default=1.5e-4)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=700)
    p.add_argument("--kappa-flat", type=float, default=datagen.KAPPA_FLAT_DEFAULT)
    p.add_argument("--relu-first", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("infer", help="run the hybrid solver on a saved field")
    p.add_argument("--field", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kappa-flat", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("eval-rose", help="error statistics along a polar rose")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--pca", default=None)
    p.add_argument("--kappa-flat", type=float, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval_rose)

    p = sub.add_parser("eval-convergence", help="resolution sweep on a polar rose")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--nus", type=int, nargs="+", required=True)
    p.add_argument("--models", nargs="*", default=[])
    p.add_argument("--pcas", nargs="*", default=[])
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval_convergence)

    p = sub.add_parser("eval-circle", help="relative norms over randomly shifted circles")
    p.add_argument("--R", type=float, default=2.0 / 128.0)
    p.add_argument("--nus", type=int, nargs="+", required=True)
    p.add_argument("--centers", type=int, default=100)
    p.add_argument("--models", nargs="*", default=[])
    p.add_argument("--pcas", nargs="*", default=[])
    p.add_argument("--sdf", action="store_true", help="exact SDF fields, no redistancing")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_eval_circle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
