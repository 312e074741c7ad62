"""Command-line front end.

Subcommands::

    strav run CONFIG [--out STEM] [--oracle auto|none|POINT]
                     [--max-iter N] [--record-every N] [--epsilon E]
                     [--engine auto|kernel|numpy]
    strav check CONFIG [--emit-normalized] [--min-weight W --max-length L]
                       [--prefix K] [--samples N]
    strav oracle CONFIG
    strav compare TRACE_A TRACE_B [--tol T]

Exit codes: 0 success, 1 comparison beyond tolerance, 2 config/validation
error, 3 runtime solver error.  ``run`` writes ``STEM.csv`` and
``STEM.json``; when no output stem is configured, the ``STRAV_OUT_DIR``
environment variable names the directory the default stem goes in (that is
the only environment variable the tool reads).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import trace as trace_mod
from .config import ConfigError, RunConfig, load_config, parse_config
from .operators import fne_residual
from .oracle import (
    EnumerationLimit,
    InfeasibleSpec,
    kkt_project,
    polyhedral_from_operators,
)
from .solvers import SolverError, run as run_solver
from .steering import validate_prefix
from .strings import FamilyBounds, check_bounds, validate_fit
from .tolerances import PROPERTY_SLACK

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_COMPARE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strav",
        description="String-averaging Halpern solvers for best approximation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a solver config and write traces")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output stem (writes STEM.csv and STEM.json)")
    p_run.add_argument(
        "--oracle", default="auto",
        help="auto (KKT oracle when polyhedral), none, or an explicit "
             "comma-separated point",
    )
    p_run.add_argument("--max-iter", type=int, dest="max_iter")
    p_run.add_argument("--record-every", type=int, dest="record_every")
    p_run.add_argument("--epsilon", type=float)
    p_run.add_argument("--engine", default="auto",
                       choices=["auto", "kernel", "numpy"])

    p_check = sub.add_parser("check", help="validate a config and report")
    p_check.add_argument("config")
    p_check.add_argument("--emit-normalized", action="store_true",
                         help="print the normalized config JSON instead of "
                              "the report")
    p_check.add_argument("--min-weight", type=float, dest="min_weight")
    p_check.add_argument("--max-length", type=int, dest="max_length")
    p_check.add_argument("--prefix", type=int, default=1000,
                         help="steering prefix length to validate")
    p_check.add_argument("--samples", type=int, default=200,
                         help="sampled pairs for the operator property check")

    p_oracle = sub.add_parser("oracle", help="print P_F(u) for a polyhedral "
                                             "problem")
    p_oracle.add_argument("config")

    p_cmp = sub.add_parser("compare", help="compare two trace files")
    p_cmp.add_argument("trace_a")
    p_cmp.add_argument("trace_b")
    p_cmp.add_argument("--tol", type=float, default=0.0)
    return parser


def _load(path: str) -> RunConfig:
    return parse_config(load_config(path))


def _polyhedral_or_reason(cfg: RunConfig):
    if cfg.problem.is_countable:
        return None, "the problem uses a countable family"
    try:
        return polyhedral_from_operators(cfg.problem.operators), None
    except ValueError as exc:
        return None, str(exc)


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError("--oracle", f"not a point: {text!r} ({exc})") from exc


def _default_stem(cfg: RunConfig) -> str:
    name = cfg.problem.name or "problem"
    stem = f"{name}-{cfg.variant.algorithm}"
    out_dir = os.environ.get("STRAV_OUT_DIR")
    return os.path.join(out_dir, stem) if out_dir else stem


def cmd_run(args) -> int:
    cfg = _load(args.config)
    max_iter = args.max_iter if args.max_iter is not None else cfg.max_iter
    record_every = (args.record_every if args.record_every is not None
                    else cfg.record_every)

    oracle_point = None
    oracle_note = "none"
    if args.oracle == "auto":
        poly, reason = _polyhedral_or_reason(cfg)
        if poly is not None:
            oracle_point = kkt_project(poly, cfg.problem.anchor)
            oracle_note = "kkt"
        else:
            oracle_note = f"skipped ({reason})"
    elif args.oracle != "none":
        oracle_point = _parse_point(args.oracle)
        oracle_note = "explicit"

    result = run_solver(
        cfg.problem,
        cfg.variant,
        steering=cfg.steering,
        max_iter=max_iter,
        record_every=record_every,
        oracle=oracle_point,
        engine=args.engine,
        epsilon=args.epsilon,
    )

    stem = args.out or cfg.output or _default_stem(cfg)
    out_dir = os.path.dirname(stem)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    meta = result.metadata()
    meta["config_hash"] = cfg.hash()
    result.trace.metadata = meta
    csv_path = stem + ".csv"
    json_path = stem + ".json"
    trace_mod.write_csv(result.trace, csv_path)
    trace_mod.write_json(result.trace, json_path)

    final = result.final_x
    print(f"variant:     {cfg.variant.algorithm}")
    print(f"engine:      {result.engine}")
    print(f"iterations:  {max_iter}")
    print(f"final x:     [{', '.join(f'{v:.12g}' for v in final)}]")
    if oracle_point is not None:
        print(f"oracle:      {oracle_note}, final dist = "
              f"{float(result.trace.oracle_dists[-1]):.6e}")
    else:
        print(f"oracle:      {oracle_note}")
    if result.truncation_epsilon is not None:
        print(f"truncation:  epsilon = {result.truncation_epsilon:g}, "
              f"tail mass = {result.tail_mass:.6e}")
    print(f"trace:       {csv_path}")
    print(f"trace json:  {json_path}")
    return EXIT_OK


def _variant_families(cfg: RunConfig):
    v = cfg.variant
    if hasattr(v, "family"):
        return [("family", v.family)]
    if hasattr(v, "schedule"):
        return [(f"schedule[{i}]", sf) for i, sf in enumerate(v.schedule)]
    return []


def cmd_check(args) -> int:
    lines: list[str] = []
    ok = True

    def report(passed: bool, text: str):
        nonlocal ok
        ok = ok and passed
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {text}")

    cfg = _load(args.config)

    if (args.min_weight is None) != (args.max_length is None):
        raise ConfigError(
            "--min-weight/--max-length",
            "bounds checking needs both flags or neither",
        )

    families = _variant_families(cfg)
    if cfg.problem.is_countable:
        fam = cfg.problem.countable
        trunc = fam.truncate()
        report(trunc.tail_mass <= trunc.epsilon,
               f"countable truncation: N={trunc.n_strings}, "
               f"tail mass {trunc.tail_mass:.3e} <= epsilon {trunc.epsilon:g}")
        lines.append(f"       fitness: {fam.fitness}")
    else:
        m = cfg.problem.operator_count
        for label, sf in families:
            missing = validate_fit(sf, m)
            total = sum(sf.weights)
            report(not missing,
                   f"{label}: fit for {m} operators"
                   + ("" if not missing else f": missing indices {missing}"))
            report(abs(total - 1.0) <= 1e-12,
                   f"{label}: weights sum to {total!r}")
            if args.min_weight is not None:
                bounds = FamilyBounds(args.min_weight, args.max_length, m)
                rep = check_bounds(sf, bounds)
                if rep.ok:
                    report(True,
                           f"{label}: within bounds (min weight "
                           f"{bounds.min_weight}, max length {bounds.max_length})")
                else:
                    for v in rep.violations:
                        report(False, f"{label}: string {v.string}: {v.reason}")

        rng = np.random.default_rng(cfg.seed)
        dim = cfg.problem.dim
        worst = 0.0
        for _ in range(max(1, args.samples)):
            x = rng.uniform(-5.0, 5.0, size=dim)
            y = rng.uniform(-5.0, 5.0, size=dim)
            for op in cfg.problem.operators:
                worst = max(worst, -fne_residual(op, x, y))
        report(worst <= PROPERTY_SLACK,
               f"operators: firm nonexpansiveness on {args.samples} sampled "
               f"pairs (worst violation {worst:.3e})")

    prefix = validate_prefix(cfg.steering, max(2, args.prefix))
    for line in prefix.lines():
        lines.append("       " + line)
    report(prefix.ok, "steering: prefix checks")
    report(cfg.steering.verified, "steering: analytically verified family")

    if args.emit_normalized:
        print(json.dumps(cfg.normalized(), indent=1))
    else:
        for line in lines:
            print(line)
        print("result: " + ("all checks passed" if ok else "CHECKS FAILED"))
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_oracle(args) -> int:
    cfg = _load(args.config)
    poly, reason = _polyhedral_or_reason(cfg)
    if poly is None:
        print(f"error: the exhaustive oracle needs a polyhedral problem; "
              f"{reason}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        point = kkt_project(poly, cfg.problem.anchor)
    except (InfeasibleSpec, EnumerationLimit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = {
        "problem": cfg.problem.name,
        "anchor": cfg.problem.anchor.tolist(),
        "solution": point.tolist(),
        "distance": float(np.linalg.norm(point - cfg.problem.anchor)),
    }
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = trace_mod.load_trace(args.trace_a)
        b = trace_mod.load_trace(args.trace_b)
    except (OSError, ValueError) as exc:
        if isinstance(exc, trace_mod.GridMismatch):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cmp = trace_mod.compare_traces(a, b)
    print(f"rows compared: {cmp.rows}")
    print(f"max |x_A - x_B|_inf = {cmp.max_diff:.17g} at k={cmp.at_k}")
    if cmp.max_diff <= args.tol:
        print(f"within tolerance {args.tol:g}")
        return EXIT_OK
    print(f"EXCEEDS tolerance {args.tol:g}")
    return EXIT_COMPARE


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "check": cmd_check,
        "oracle": cmd_oracle,
        "compare": cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, trace_mod.GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError, KeyError) as exc:
        # Validation failures raised past config parsing (unfit family,
        # conflicting variant preconditions, bad flag values).
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
