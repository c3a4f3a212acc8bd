"""Command line interface: ``cipherid {gen-data,identify,validate,report,sweep,serve}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import casestudy
from .leveled_arith import SchemeParams
from .protocol import IdentifyResponse, ServerConfig, client_validate, serve_directory
from .protocol.messages import REQUEST_FILE, RESPONSE_FILE, read_json, write_json
from .regressors import MSP, SSM, TF, TaskSpec
from .runner import RunConfig, gen_data, report, run_identify, sweep

BACKEND_NAMES = {"exact": "exact", "fixed": "fixed_point"}


def _task(args) -> TaskSpec:
    base = casestudy.DEFAULT_TASKS[args.task]
    n = args.n if args.n is not None else base.n
    if args.task == TF:
        return TaskSpec.transfer_function(n, args.m if args.m is not None else base.m)
    if args.task == SSM:
        return TaskSpec.state_space(n, base.n_u)
    return TaskSpec.multi_step(n, args.N if args.N is not None else base.N)


def _config(args, seed=None) -> RunConfig:
    return RunConfig(
        task=_task(args),
        L=args.L,
        noise_std=args.noise_std,
        seed=args.seed if seed is None else seed,
        epsilon=args.epsilon,
        backend=BACKEND_NAMES[args.backend],
        scale_bits=args.scale_bits,
        max_level=args.max_level,
        emulator_noise_std=args.emulator_noise_std,
        k_div=args.k_div,
        k_inv=args.k_inv,
        safety_margin=args.safety_margin,
        output_dir=Path(args.out),
    )


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=[TF, SSM, MSP], default=TF)
    p.add_argument("--n", type=int, help="model order (default 3)")
    p.add_argument("--m", type=int, help="numerator order for --task tf (default 2)")
    p.add_argument("--N", type=int, help="prediction horizon for --task msp (default 2)")
    p.add_argument("--L", type=int, default=20, help="number of I/O samples")
    p.add_argument("--noise-std", type=float, default=1e-3, help="measurement noise std")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-3, help="requested max-norm error bound")
    p.add_argument("--backend", choices=sorted(BACKEND_NAMES), default="exact")
    p.add_argument("--scale-bits", type=int, default=30)
    p.add_argument("--max-level", type=int, help="default: planned depth + safety margin")
    p.add_argument("--emulator-noise-std", type=float, help="per-multiplication noise (default 2^-scale_bits)")
    p.add_argument("--safety-margin", type=int, default=1)
    p.add_argument("--k-div", type=int, default=5)
    p.add_argument("--k-inv", type=int, help="run this many inversion iterations instead of the planned 12")
    p.add_argument("--out", default="run")


def _print_summary(summary: dict) -> None:
    for k, v in summary.items():
        print(f"{k:18s} {v}")


def cmd_gen_data(args) -> int:
    print(gen_data(_config(args)))
    return 0


def cmd_identify(args) -> int:
    _print_summary(run_identify(_config(args), data_path=args.data))
    return 0


def cmd_validate(args) -> int:
    run = Path(args.run)
    params = SchemeParams.from_dict(read_json(run / REQUEST_FILE)["params"])
    resp = IdentifyResponse.from_dict(read_json(run / RESPONSE_FILE), params)
    verdict = client_validate(resp, q=args.q)
    write_json(verdict.to_dict(), run / "verdict.json")
    print(json.dumps(verdict.to_dict(), indent=1))
    return 0 if verdict.guaranteed else 1


def cmd_serve(args) -> int:
    print(serve_directory(args.exchange, ServerConfig(k_div=args.k_div, k_inv_override=args.k_inv)))
    return 0


def cmd_report(args) -> int:
    report(args.runs, args.out, with_timing=args.with_timing)
    print((Path(args.out) / "report.txt").read_text(), end="")
    return 0


def cmd_sweep(args) -> int:
    sweep(_config(args), range(args.seed, args.seed + args.seeds), args.out)
    print((Path(args.out) / "report.txt").read_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipherid", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate the reference system and write data.csv")
    _add_run_args(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("identify", help="client -> server -> client round trip")
    _add_run_args(p)
    p.add_argument("--data", help="CSV with header k,u_1..,y_1.. (default: OUT/data.csv, generated if missing)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("validate", help="decrypt a response and check its certificates")
    p.add_argument("--run", required=True, help="directory with request.json and response.json")
    p.add_argument("--q", type=float, help="magnitude threshold (default: the server's q)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="answer request.json in a directory with response.json")
    p.add_argument("--exchange", required=True)
    p.add_argument("--k-div", type=int, default=5)
    p.add_argument("--k-inv", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="aggregate completed runs")
    p.add_argument("runs", nargs="*")
    p.add_argument("--out", default="report")
    p.add_argument("--with-timing", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="identify over a range of seeds and report")
    _add_run_args(p)
    p.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds starting at --seed")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
