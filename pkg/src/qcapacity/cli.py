"""Command-line front end.

Summaries go to stdout as ``key=value`` lines with 9 significant digits.

Exit codes: 0 success (or verification accepted), 1 verification aborted,
2 invalid arguments, 3 unreadable or malformed input file.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import analysis
from .bounds import (
    BoundParams,
    BoundResult,
    asymptotic_rate,
    general_estimation_bound,
    general_verification_bound,
    optimize_bound,
)
from .channels import IidFlipChannel, parse_channel
from .protocol import run_estimation, run_general_estimation, run_verification

EXIT_OK, EXIT_ABORT, EXIT_INVALID, EXIT_FILE = 0, 1, 2, 3


class _FileError(Exception):
    pass


def _emit(out, **pairs) -> None:
    for key, value in pairs.items():
        if isinstance(value, float):
            value = f"{value:.9g}"
        print(f"{key}={value}", file=out)


def _emit_bound(out, res: BoundResult) -> None:
    _emit(out, covered=res.covered, value=res.value, rate=res.rate, eta_star=res.eta_star,
          mu_x=res.mu_x, mu_z=res.mu_z, entropy_term=res.terms["entropy"],
          log_kappa_term=res.terms["log_kappa"], log_inv_eta_term=res.terms["log_inv_eta"],
          constant_term=res.terms["constant"])


def _p_kwargs(args) -> dict:
    if args.log2_one_minus_p is not None:
        return {"p": None, "log2_one_minus_p": args.log2_one_minus_p}
    return {"p": 0.5 if args.p is None else args.p, "log2_one_minus_p": None}


def _add_p(parser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--p", type=float, help="atypicality/abort probability (default 0.5)")
    group.add_argument("--log2-one-minus-p", type=float, dest="log2_one_minus_p",
                       help="log2(1 - p), for 1 - p below double precision")


def _add_bound_common(parser, epsilon_default: float | None = None) -> None:
    parser.add_argument("--q", type=float, default=1.0, help="preparation quality in bits")
    parser.add_argument("--epsilon", type=float, default=epsilon_default,
                        required=epsilon_default is None, help="decoding error probability")
    _add_p(parser)


def _channel(spec: str, threads: int | None):
    channel = parse_channel(spec)
    if isinstance(channel, IidFlipChannel):
        channel.threads = threads
    return channel


def cmd_bound(args, out) -> int:
    kw = _p_kwargs(args)
    if args.variant in ("estimation", "verification"):
        if args.N is None:
            raise ValueError(f"--N is required for the {args.variant} variant")
        make = BoundParams.estimation if args.variant == "estimation" else BoundParams.verification
        res = optimize_bound(make(args.N, args.q, args.ex, args.ez, args.epsilon, kw["p"],
                                  log2_one_minus_p=kw["log2_one_minus_p"]), args.variant)
    else:
        if args.n is None or args.k is None:
            raise ValueError(f"--n and --k are required for the {args.variant} variant")
        if args.p_pass_x is not None or args.p_pass_z is not None:
            if args.p_pass_x is None or args.p_pass_z is None:
                raise ValueError("give both --p-pass-x and --p-pass-z")
            kw = {"p_pass_x": args.p_pass_x, "p_pass_z": args.p_pass_z}
        if args.variant == "general-est":
            res = general_estimation_bound(args.n, args.k, args.q, args.ex, args.ez,
                                           args.epsilon, **kw)
        else:
            if args.data is None:
                raise ValueError("--data is required for the general-ver variant")
            res = general_verification_bound(args.n, args.k, args.data, args.q, args.ex,
                                             args.ez, args.epsilon, **kw)
    _emit(out, variant=args.variant)
    _emit_bound(out, res)
    if args.csv:
        header = ["value", "rate", "eta_star", "mu_x", "mu_z", "entropy_term",
                  "log_kappa_term", "log_inv_eta_term", "constant_term"]
        row = (res.value, res.rate, res.eta_star, res.mu_x, res.mu_z, res.terms["entropy"],
               res.terms["log_kappa"], res.terms["log_inv_eta"], res.terms["constant"])
        _write(args.csv, analysis.format_table([row], header))
    return EXIT_OK


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _FileError(f"cannot write {path}: {exc}") from exc


def cmd_simulate(args, out) -> int:
    channel = _channel(args.channel, args.threads)
    kw = _p_kwargs(args)
    if args.N is not None:
        if args.n is not None or args.k is not None:
            raise ValueError("use either --N or --n/--k")
        transcript, rates = run_estimation(channel, args.N, args.seed)
        params = BoundParams.estimation(args.N, args.q, rates.e_x, rates.e_z, args.epsilon,
                                        kw["p"], log2_one_minus_p=kw["log2_one_minus_p"])
        res = optimize_bound(params, "estimation")
    else:
        if args.n is None or args.k is None:
            raise ValueError("give --N or both --n and --k")
        transcript, rates = run_general_estimation(channel, args.n, args.k, args.seed)
        res = analysis.bound_from_rates(rates, args.q, args.epsilon, kw["p"],
                                        log2_one_minus_p=kw["log2_one_minus_p"])
    if args.out:
        _write(args.out, analysis.format_records(transcript, {"q": args.q}))
    _emit(out, protocol="estimation", channel=channel.describe(), seed=args.seed,
          n_x=rates.n_x, n_z=rates.n_z, e_x=rates.e_x, e_z=rates.e_z,
          asymptotic_rate=asymptotic_rate(args.q, rates.e_x, rates.e_z))
    _emit_bound(out, res)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    channel = _channel(args.channel, args.threads)
    transcript, rates, decision = run_verification(channel, args.N, args.tol_ex, args.tol_ez,
                                                   args.seed)
    if args.out:
        _write(args.out, analysis.format_records(transcript, {"q": args.q}))
    _emit(out, protocol="verification", channel=channel.describe(), seed=args.seed,
          decision=decision, gamma=rates.e_x, lam=rates.e_z,
          tol_ex=args.tol_ex, tol_ez=args.tol_ez)
    if decision == "abort":
        return EXIT_ABORT
    kw = _p_kwargs(args)
    params = BoundParams.verification(args.N, args.q, args.tol_ex, args.tol_ez, args.epsilon,
                                      kw["p"], log2_one_minus_p=kw["log2_one_minus_p"])
    _emit_bound(out, optimize_bound(params, "verification"))
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    kw = _p_kwargs(args)
    spec = analysis.SweepSpec.log_grid(
        args.axis, args.start, args.stop, args.num, q=args.q, e_x=args.ex, e_z=args.ez,
        epsilon=args.epsilon, N=args.N, variant=args.variant, **kw)
    text = analysis.format_sweep(analysis.sweep(spec, args.threads), args.axis)
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_analyze(args, out) -> int:
    try:
        records = analysis.read_records(args.input)
        transcript, rates = analysis.ingest(records)
    except OSError as exc:
        raise _FileError(f"cannot read {args.input}: {exc}") from exc
    except analysis.RecordError as exc:
        raise _FileError(f"{args.input}: {exc}") from exc
    q = args.q if args.q is not None else float(records.metadata.get("q", 1.0))
    kw = _p_kwargs(args)
    res = analysis.bound_from_rates(rates, q, args.epsilon, kw["p"],
                                    log2_one_minus_p=kw["log2_one_minus_p"])
    _emit(out, rows=len(transcript), n_x=rates.n_x, n_z=rates.n_z, e_x=rates.e_x,
          e_z=rates.e_z, q=q, asymptotic_rate=asymptotic_rate(q, rates.e_x, rates.e_z))
    _emit_bound(out, res)

    if args.segments:
        segments = analysis.segment_rates(transcript, args.segments, q)
        text = analysis.format_table(segments, analysis.SegmentRate._fields)
        if args.segments_out:
            _write(args.segments_out, text)
        else:
            out.write(text)
        if sum(not s.flagged for s in segments) >= 2:
            _emit(out, segment_variance_ratio=analysis.segment_variance_ratio(
                transcript, args.segments, q))
    if args.breaks:
        points = analysis.breakpoint_bounds(transcript, args.breaks, q, args.epsilon,
                                            threads=args.threads, **kw)
        text = analysis.format_table(points, analysis.BreakPoint._fields)
        if args.breaks_out:
            _write(args.breaks_out, text)
        else:
            out.write(text)
    if args.epsilon_sweep:
        start, stop, num = args.epsilon_sweep
        spec = analysis.SweepSpec.log_grid(
            "epsilon", start, stop, int(num), q=q, e_x=rates.e_x, e_z=rates.e_z,
            variant="general-estimation", n_x=rates.n_x, n_z=rates.n_z, **kw)
        text = analysis.format_sweep(analysis.sweep(spec, args.threads), "epsilon")
        if args.sweep_out:
            _write(args.sweep_out, text)
        else:
            out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcapacity",
        description="One-shot quantum capacity estimation and verification bounds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate a capacity lower bound")
    p.add_argument("--variant", default="estimation",
                   choices=["estimation", "verification", "general-est", "general-ver"])
    p.add_argument("--N", type=int, help="qubit count (balanced variants)")
    p.add_argument("--n", type=int, help="X test count (general variants)")
    p.add_argument("--k", type=int, help="Z test count (general variants)")
    p.add_argument("--data", type=int, help="data qubit count (general-ver)")
    p.add_argument("--ex", type=float, required=True)
    p.add_argument("--ez", type=float, required=True)
    p.add_argument("--p-pass-x", type=float, dest="p_pass_x")
    p.add_argument("--p-pass-z", type=float, dest="p_pass_z")
    p.add_argument("--csv", help="also write the result as a one-row CSV")
    _add_bound_common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("simulate", help="run the estimation protocol against a channel")
    p.add_argument("--channel", default="identity", help="name:param,param,...")
    p.add_argument("--N", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="transcript CSV path")
    p.add_argument("--threads", type=int)
    _add_bound_common(p, epsilon_default=1e-6)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the verification protocol against a channel")
    p.add_argument("--channel", default="identity")
    p.add_argument("--N", type=int, required=True, help="number of data qubits")
    p.add_argument("--tol-ex", type=float, required=True, dest="tol_ex")
    p.add_argument("--tol-ez", type=float, required=True, dest="tol_ez")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    _add_bound_common(p, epsilon_default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="bound on a log-spaced grid of N or epsilon")
    p.add_argument("--axis", choices=["N", "epsilon"], default="N")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--num", type=int, default=60)
    p.add_argument("--variant", choices=["estimation", "verification"], default="estimation")
    p.add_argument("--ex", type=float, required=True)
    p.add_argument("--ez", type=float, required=True)
    p.add_argument("--N", type=int, help="fixed N for epsilon sweeps")
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, help="fixed epsilon for N sweeps")
    _add_p(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="bounds and fluctuation tables from a record file")
    p.add_argument("input")
    p.add_argument("--q", type=float, help="preparation quality (default: file metadata or 1)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--segments", type=int)
    p.add_argument("--segments-out", dest="segments_out")
    p.add_argument("--breaks", type=int)
    p.add_argument("--breaks-out", dest="breaks_out")
    p.add_argument("--epsilon-sweep", nargs=3, type=float, metavar=("START", "STOP", "NUM"),
                   dest="epsilon_sweep")
    p.add_argument("--sweep-out", dest="sweep_out")
    p.add_argument("--threads", type=int)
    _add_p(p)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except _FileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
