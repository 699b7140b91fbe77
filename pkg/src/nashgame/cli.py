"""Command-line interface.

Subcommands: gen-matrix, qre, run, sweep, plot, check. Exit codes: 0 on
success, 1 on validation/usage errors, 2 on numeric failures (divergence
or a solve that cannot be certified).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from ._kernel import BACKEND
from .checks import run_all
from .errors import (
    ConfigError,
    ConvergenceError,
    InvalidInputError,
    NashGameError,
    NumericBlowupError,
    PlotError,
)
from .game import GameSpec, PreferenceMatrix, random_preference_matrix, solve_equilibrium
from .plotting import render_plot
from .records import RunRecord, rows_from_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nashgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-matrix", help="generate a random preference matrix")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("qre", help="solve the regularized equilibrium of a matrix")
    p.add_argument("--matrix", required=True, help="path to a matrix JSON file")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--ref", help="JSON file with reference logits (default: zeros)")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", help="write the certificate here instead of stdout")

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sweep", help="run several experiment configs")
    p.add_argument("--config", required=True, help="JSON list of experiment configs")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("plot", help="render metric trajectories to SVG")
    p.add_argument("--metric", default="dualgap_beta")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="record JSON or CSV files")
    p.add_argument("--out", required=True)
    p.add_argument("--floor", type=float, default=1e-6)

    sub.add_parser("check", help="run the full invariant suite")
    return parser


def _load_ref(path: str | None, n: int) -> np.ndarray:
    if path is None:
        return np.zeros(n)
    with open(path) as fh:
        data = json.load(fh)
    logits = data["logits"] if isinstance(data, dict) else data
    return np.asarray(logits, dtype=np.float64)


def _cmd_gen_matrix(args) -> int:
    matrix = random_preference_matrix(args.seed, args.n)
    with open(args.out, "w") as fh:
        json.dump(matrix.to_dict(), fh)
        fh.write("\n")
    print(f"wrote {args.n}x{args.n} matrix to {args.out}")
    return 0


def _cmd_qre(args) -> int:
    with open(args.matrix) as fh:
        matrix = PreferenceMatrix.from_dict(json.load(fh))
    game = GameSpec(matrix=matrix, ref_logits=_load_ref(args.ref, matrix.n), beta=args.beta)
    cert = solve_equilibrium(game, tol=args.tol)
    payload = json.dumps(cert.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote certificate (residual {cert.residual_inf_norm:.3e}) to {args.out}")
    else:
        print(payload)
    return 0


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    records = harness.run_experiment(config, args.out_dir)
    for i, record in enumerate(records):
        name = record.config.get("label") or record.config.get("algorithm")
        final = record.rows[-1] if record.rows else None
        gap = f"dualgap_beta={final.dualgap_beta:.3e}" if final else "no metrics"
        print(f"[{i:02d}] {name}: status={record.status} {gap}")
    if any(r.status == "error" for r in records):
        return 2
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        data = json.load(fh)
    entries = data if isinstance(data, list) else data.get("experiments")
    if entries is None:
        raise ConfigError("sweep config must be a list or {'experiments': [...]}")
    override = harness.env_seed_override()
    configs = [harness.parse_config(entry, seed_override=override) for entry in entries]
    out_dirs = [f"{args.out_dir}/exp{i:03d}" for i in range(len(configs))]
    records = harness.run_sweep(configs, args.parallelism, out_dirs)
    print(f"completed {len(records)} runs across {len(configs)} experiments")
    if any(r.status == "error" for r in records):
        return 2
    return 0


def _cmd_plot(args) -> int:
    records = []
    for path in args.inputs:
        if path.endswith(".csv"):
            with open(path) as fh:
                rows = rows_from_csv(fh.read())
            stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
            records.append(
                RunRecord(config={"label": stem}, certificate={}, rows=rows, final_logits=[])
            )
        else:
            records.append(harness.read_json(path))
    render_plot(records, args.out, metric=args.metric, floor=args.floor)
    print(f"wrote {args.out}")
    return 0


def _cmd_check(_args) -> int:
    print(f"backend: {BACKEND}")
    return 0 if run_all(verbose=True) else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "gen-matrix": _cmd_gen_matrix,
        "qre": _cmd_qre,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "plot": _cmd_plot,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, InvalidInputError, PlotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, NumericBlowupError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except NashGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
