"""Command-line interface.

Subcommands: generate, attack, fit, eval, sweep, realdata, plotdata.

Exit codes: 0 success, 1 configuration error (bad flags, bad config file),
2 data error (missing or malformed input files), 3 numerical
non-convergence in any cell.  The ROBUSTKR_OUTDIR environment variable
supplies the default output directory; the --outdir flag overrides it.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .attacks import ValueRule, attack_concentrated, attack_one_directional, attack_random, write_indices_csv
from .config import ConfigError, ExperimentConfig, parse_config, preset
from .data import DataError, NoiseSpec, TargetFunction, generate_synthetic, read_dataset_csv, save_dataset_csv
from .estimators import HuberParams, fit_huber, fit_mom, fit_nw, fit_trimmed
from .kernels import TRIANGULAR
from .metrics import eval_l2, eval_linf
from . import experiments as exp

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _outdir(args, cfg: ExperimentConfig | None = None) -> Path:
    if getattr(args, "outdir", None):
        return Path(args.outdir)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get("ROBUSTKR_OUTDIR", "out"))


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("either --config or --preset is required")
    overrides = {}
    for name in ("repeats", "seed", "workers", "n", "h"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg.validate()


def _add_config_flags(sub):
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument("--preset", help="named preset (fig1, fig2, fig2-2d)")
    sub.add_argument("--repeats", type=int, help="override repeat count")
    sub.add_argument("--seed", type=int, help="override base seed")
    sub.add_argument("--workers", type=int, help="override worker count")
    sub.add_argument("--n", type=int, help="override training-set size")
    sub.add_argument("--h", type=float, help="override bandwidth")
    sub.add_argument("--outdir", help="output directory (default $ROBUSTKR_OUTDIR or ./out)")


def _estimator_flags(sub):
    sub.add_argument("--h", type=float, default=0.03)
    sub.add_argument("--T", type=float, default=1.0)
    sub.add_argument("--M", type=float, default=3.0)
    sub.add_argument("--groups", type=int, default=20)
    sub.add_argument("--trim-fraction", type=float, default=0.2)
    sub.add_argument("--seed", type=int, default=0)


def _cmd_generate(args) -> int:
    target = TargetFunction.by_name(args.target)
    data = generate_synthetic(args.n, args.dim, target, NoiseSpec(args.sigma), args.seed)
    save_dataset_csv(data, args.out)
    print(f"wrote {data.n} samples (dim {data.dim}) to {args.out}")
    return 0


def _cmd_attack(args) -> int:
    data = read_dataset_csv(args.data)
    if args.attack == "random":
        result = attack_random(data, args.q, ValueRule.plus_minus(args.value), args.seed)
    elif args.attack == "random_gaussian":
        result = attack_random(data, args.q, ValueRule.gaussian(0.0, args.attack_sigma), args.seed)
    elif args.attack == "one_directional":
        result = attack_one_directional(data, args.q, args.value, args.seed)
    elif args.attack == "concentrated":
        result = attack_concentrated(data, args.q, args.value, args.seed)
    else:
        raise ConfigError(f"unknown attack '{args.attack}'")
    save_dataset_csv(result.dataset, args.out)
    if args.indices:
        write_indices_csv(result, args.indices)
    print(f"attacked {result.attacked_indices.size} of {data.n} labels -> {args.out}")
    return 0


def _parse_point(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    x = _parse_point(args.x)
    params = HuberParams(args.h, args.T, args.M)
    if args.method == "nw":
        est = fit_nw(data, args.h, TRIANGULAR, args.M, x)
    elif args.method == "huber":
        est = fit_huber(data, params, TRIANGULAR, x)
    elif args.method == "mom":
        est = fit_mom(data, args.h, TRIANGULAR, args.M, args.groups, args.seed, x)
    elif args.method == "trimmed":
        est = fit_trimmed(data, args.h, TRIANGULAR, args.M, args.trim_fraction, x)
    else:
        raise ConfigError(f"unknown method '{args.method}' (corrected needs 'sweep' or the API)")
    print(f"value={est.value:.12g} n_window={est.n_window}")
    return 0


def _cmd_eval(args) -> int:
    data = read_dataset_csv(args.data)
    truth = TargetFunction.by_name(args.target)
    cfg = ExperimentConfig(h=args.h, T=args.T, M=args.M, groups=args.groups,
                           trim_fraction=args.trim_fraction, dim=data.dim)
    estimator, converged = exp._make_estimator(args.method, data, args.seed, cfg)
    rmse = eval_l2(estimator, truth, args.n_eval, args.seed, dim=data.dim)
    linf = eval_linf(estimator, truth, args.linf_resolution, dim=data.dim)
    print(f"method={args.method} rmse={rmse:.12g} linf={linf:.12g}")
    return 0 if converged else 3


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args, cfg)
    results = exp.run_sweep(cfg)
    agg = exp.aggregate(results)
    exp.write_rows([r.row for r in results], exp.SWEEP_COLUMNS, outdir / "sweep_runs.csv")
    exp.write_rows(agg, exp.AGG_COLUMNS, outdir / "sweep_aggregated.csv")
    exp.emit_plotdata(agg, outdir / "plotdata")
    bad = sum(1 for r in results if not r.converged)
    print(f"wrote {len(results)} runs to {outdir} ({bad} non-converged cells)")
    return 3 if bad else 0


def _cmd_realdata(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args, cfg)
    rows, converged = exp.run_realdata(cfg)
    exp.write_rows(rows, exp.REALDATA_COLUMNS, outdir / "realdata_runs.csv")
    table = exp.realdata_table(rows)
    exp.write_rows(table, ("attack", "method", "rmse_median", "rmse_mean", "splits"),
                   outdir / "realdata_table.csv")
    print(f"wrote {len(rows)} rows to {outdir}")
    return 0 if converged else 3


def _cmd_plotdata(args) -> int:
    rows = []
    try:
        with open(args.table, newline="", encoding="utf-8") as fh:
            for record in csv.DictReader(fh):
                rows.append(
                    {
                        "method": record["method"],
                        "attack": record["attack"],
                        "q": int(record["q"]),
                        "rmse": float(record["rmse"]),
                        "linf": float(record["linf"]),
                    }
                )
    except OSError as errexc:
        raise DataError(f"cannot read '{args.table}': {errexc}") from errexc
    except (KeyError, ValueError) as exc:
        raise DataError(f"'{args.table}' is not an aggregated sweep table: {exc}") from exc
    files = exp.emit_plotdata(rows, _outdir(args))
    print(f"wrote {len(files)} plot-data files")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="robustkr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--target", default="sine1d")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("attack", help="poison labels of a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--attack", required=True, choices=list(config_mod.ATTACKS))
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--value", type=float, default=10.0)
    p.add_argument("--attack-sigma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--indices", help="also write attacked indices CSV here")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("fit", help="pointwise estimate at a query point")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=["nw", "huber", "mom", "trimmed"])
    p.add_argument("--x", required=True, help="comma-separated coordinates")
    _estimator_flags(p)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("eval", help="rmse/linf of a method against a known target")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=list(config_mod.METHODS))
    p.add_argument("--target", default="sine1d")
    p.add_argument("--n-eval", type=int, default=1000)
    p.add_argument("--linf-resolution", type=int, default=2001)
    _estimator_flags(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("sweep", help="run a full (method, attack, q, repeat) sweep")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("realdata", help="train/test pipeline on a CSV dataset")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_realdata)

    p = sub.add_parser("plotdata", help="per-(metric, attack) curves from an aggregated table")
    p.add_argument("--table", required=True, help="aggregated sweep CSV")
    p.add_argument("--outdir")
    p.set_defaults(fn=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
