"""Command-line entry point: impute, train, benchmark, cluster-inspect, synth, grad-check."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import config as C
from .bench import ablation_grid, run_benchmark, write_reports_json, write_summary_csv
from .data import fill_csv, load_csv, make_windows, write_csv
from .errors import CheckpointError, ImputeINRError, NumericsError
from .gradcheck import check_gradients, tiny_problem
from .model import ImputeINR, cluster_series
from .plots import write_loss_curve, write_overlay
from .synthetic import gen_trend_sinusoid, gen_two_distribution
from .training import train, write_curve_csv

log = logging.getLogger("imputeinr")

EXIT_OK, EXIT_INPUT, EXIT_CHECKPOINT, EXIT_NUMERICS = 0, 1, 2, 3
GRAD_TOL = 1e-4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--mask-rate", help="training mask rate (train) or comma-separated evaluation rates (benchmark)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-multiscale", action="store_true")
    p.add_argument("--no-clustering", action="store_true")
    p.add_argument("--no-grouping", action="store_true")
    p.add_argument("--metrics-scale", choices=("raw", "standardized"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imputeinr", description="Time-series imputation with implicit neural representations.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="fill missing cells of a CSV with a trained checkpoint")
    p.add_argument("input")
    p.add_argument("checkpoint")
    p.add_argument("out")
    p.add_argument("--plot", help="write an SVG overlay of the first variable")
    _common(p)

    p = sub.add_parser("train", help="train on a CSV and write a checkpoint")
    p.add_argument("data")
    p.add_argument("out")
    p.add_argument("--curve", help="loss-curve CSV (default: <out>.curve.csv)")
    p.add_argument("--plot", help="write an SVG of the loss curve")
    _common(p)

    p = sub.add_parser("benchmark", help="mask, train, impute and score over mask rates and seeds")
    p.add_argument("data")
    p.add_argument("out_dir")
    _common(p)

    p = sub.add_parser("cluster-inspect", help="print the variable partition as JSON")
    p.add_argument("data")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic fixture CSV")
    p.add_argument("kind", choices=("two-distribution", "trend-sinusoid"))
    p.add_argument("out")
    p.add_argument("--length", type=int)
    p.add_argument("--n-vars", type=int, default=6)
    _common(p)

    p = sub.add_parser("grad-check", help="finite-difference check of the analytic gradients")
    _common(p)
    return ap


def run_config(args) -> C.RunConfig:
    file_values = C.load_file(args.config) if args.config else {}
    flags = {"seed": args.seed, "epochs": args.epochs, "metrics_scale": args.metrics_scale}
    if args.no_multiscale:
        flags["multi_scale"] = "false"
    if args.no_clustering:
        flags["clustering"] = "false"
    if args.no_grouping:
        flags["grouping"] = "false"
    if args.mask_rate is not None:
        flags["mask_rates" if args.command == "benchmark" else "train_mask_rate"] = args.mask_rate
    return C.build(file_values, flags).validate()


def cmd_impute(args, cfg: C.RunConfig) -> int:
    model = ImputeINR.load(args.checkpoint)
    series = load_csv(args.input)
    if series.n_vars != model.n_vars:
        raise ImputeINRError(f"checkpoint expects {model.n_vars} variables, input has {series.n_vars}")
    window = int(model.meta.get("window", cfg.window))
    filled = model.impute_series(series, window)
    fill_csv(args.input, args.out, filled, series.mask)
    missing = (series.mask == 0).sum(axis=1)
    sidecar = {"checkpoint": str(args.checkpoint), "input": str(args.input), "window": window,
               "config": model.cfg.to_dict(),
               "fill_counts": {name: int(c) for name, c in zip(series.variable_names, missing)},
               "total_filled": int(missing.sum())}
    Path(args.out).with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8")
    if args.plot:
        write_overlay(args.plot, series.values, series.mask, filled, 0, series.variable_names[0])
    print(f"filled {int(missing.sum())} cells -> {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: C.RunConfig) -> int:
    series = load_csv(args.data)
    windows = make_windows(series, cfg.window, cfg.stride or cfg.window)
    model = ImputeINR.build(cfg.model, series, seed=cfg.seed)
    model.meta = {"window": cfg.window}
    t0 = time.perf_counter()
    result = train(model, windows, cfg.train)
    model.save(args.out)
    curve_path = args.curve or f"{args.out}.curve.csv"
    write_curve_csv(curve_path, result.curve)
    if args.plot:
        write_loss_curve(args.plot, result.curve)
    final = result.curve[-1][1] if result.curve else float("nan")
    print(f"trained {cfg.train.epochs} epochs on {len(windows)} windows in {time.perf_counter() - t0:.1f}s; "
          f"final loss {final:.6g} -> {args.out}")
    return EXIT_OK


def cmd_benchmark(args, cfg: C.RunConfig) -> int:
    series = load_csv(args.data)
    configs = ablation_grid(cfg.model) if cfg.ablation else [cfg.model]
    reports = run_benchmark(series, cfg.mask_rates, cfg.seeds, configs, cfg.train, cfg.window,
                            cfg.stride, scale=cfg.metrics_scale)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", reports)
    write_reports_json(out / "reports.json", reports, {"config": cfg.to_dict()}, out / "timings.json")
    for r in reports:
        print(f"rate={r.mask_rate:g} seed={r.seed} {r.method} {r.flags or ''} mse={r.mse:.6g} mae={r.mae:.6g}")
    return EXIT_OK


def cmd_cluster_inspect(args, cfg: C.RunConfig) -> int:
    series = load_csv(args.data)
    part = cluster_series(series, cfg.model.epsilon)
    doc = part.to_json()
    doc.update({"K": part.K, "epsilon": cfg.model.epsilon,
                "clusters": [[series.variable_names[i] for i in c] for c in part.clusters()]})
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_synth(args, cfg: C.RunConfig) -> int:
    if args.kind == "two-distribution":
        w = gen_two_distribution(cfg.seed, args.length or 512)
    else:
        fx = gen_trend_sinusoid(cfg.seed, args.n_vars, args.length or 96)
        w = fx.window
        coeffs = {"trend": fx.trend.tolist(), "freqs": fx.freqs.tolist(), "amps": fx.amps.tolist(),
                  "phases": fx.phases.tolist()}
        Path(args.out).with_suffix(".json").write_text(json.dumps(coeffs, indent=2), encoding="utf-8")
    write_csv(args.out, w.values, w.variable_names)
    print(f"wrote {w.n_vars} x {w.length} {args.kind} -> {args.out}")
    return EXIT_OK


def cmd_grad_check(args, cfg: C.RunConfig) -> int:
    t0 = time.perf_counter()
    model, examples = tiny_problem(cfg.seed)
    res = check_gradients(model, examples, seed=cfg.seed)
    if args.verbose:
        for name, err in sorted(res.per_block.items()):
            print(f"  {name}: {err:.3e}")
    print(f"max relative error {res.max_rel_error:.3e} over {res.checked} entries "
          f"({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK if res.max_rel_error < GRAD_TOL else EXIT_NUMERICS


COMMANDS = {"impute": cmd_impute, "train": cmd_train, "benchmark": cmd_benchmark,
            "cluster-inspect": cmd_cluster_inspect, "synth": cmd_synth, "grad-check": cmd_grad_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = run_config(args)
        return COMMANDS[args.command](args, cfg)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (ImputeINRError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
