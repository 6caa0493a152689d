"""Command-line entry point: ``hyperrank {generate,rank,learn,eval,bench}``.

Any flag can also come from a flat ``key = value`` file passed with
``--config``; explicit flags win over the file. Exit codes: 0 success,
2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import Scenario, bench, write_csv, write_jsonl
from .cg import CgConfig
from .errors import ContractViolation, NumericalFailure
from .hypergraph import DEFAULT_THETA, build_adjacency, load_hypergraph, save_hypergraph
from .learning import DEFAULT_KAPPA, DEFAULT_MU, WeightState, trace_to_jsonl
from .linalg import RngStream
from .pipeline import F1_POSITIONS, SOLVERS, SolverOptions, build_query, rank, run_ith, run_ith_hweg, top_tags, trace_rows
from .synthetic import DESK_COUNTS, counts_for_size, generate_synthetic, read_truth, write_truth

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _counts(text: str | None, size: int | None) -> dict[str, int]:
    if text:
        counts = {}
        for item in _str_list(text):
            key, _, value = item.partition("=")
            counts[key.strip()] = int(value)
        return counts
    if size:
        return counts_for_size(size)
    return dict(DESK_COUNTS)


def _add_model_args(p):
    p.add_argument("--incidence", required=True, help="Matrix Market incidence file")
    p.add_argument("--segments", required=True, help="TSV of type, start, length")
    p.add_argument("--truth", required=True, help="TSV of test image, comma-separated truth tags")
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--solver", choices=SOLVERS, default="cg")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=int, default=50, help="block-rsvd leaf size")
    p.add_argument("--block-mode", choices=("factored", "explicit"), default="factored")
    p.add_argument("--tol", type=float, default=1e-8, help="CG relative tolerance")


def _add_learning_args(p):
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--inner-steps", type=int, default=10)
    p.add_argument("--outer-passes", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperrank", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value file with defaults for any flag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a planted-cluster hypergraph")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--counts", help="e.g. Im=120,U=40,Gr=80,Geo=12,Ta=200")
    p.add_argument("--size", type=int, help="total vertices, reference-scale proportions")
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.1)

    p = sub.add_parser("rank", help="rank tags for each test image")
    _add_model_args(p)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", help="JSON-lines output (default stdout)")

    p = sub.add_parser("learn", help="ITH-HWEG: alternate ranking and weight learning")
    _add_model_args(p)
    _add_learning_args(p)
    p.add_argument("--at", default="1,2,5,10")
    p.add_argument("--trace", help="JSON-lines file for the weight traces")
    p.add_argument("--out", help="JSON report (default stdout)")

    p = sub.add_parser("eval", help="F1@k of ITH or ITH-HWEG")
    _add_model_args(p)
    _add_learning_args(p)
    p.add_argument("--method", choices=("ith", "ith-hweg"), default="ith")
    p.add_argument("--at", default="1,2,5,10")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    p.add_argument("--out", help="JSON report (default stdout)")

    p = sub.add_parser("bench", help="solver wall-clock comparison over sizes")
    p.add_argument("--sizes", default="500,1000,2000,4000")
    p.add_argument("--solvers", default=",".join(SOLVERS))
    p.add_argument("--images", type=int, default=5)
    p.add_argument("--clusters", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("ith", "ith-hweg"), default="ith")
    p.add_argument("--block-mode", choices=("factored", "explicit"), default="factored")
    p.add_argument("--parallel", action="store_true", help="rank images concurrently")
    p.add_argument("--out", required=True, help="CSV path; JSON-lines go next to it")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    early, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if a in COMMANDS), None)
    if early.config and command:
        cfg = read_config(early.config)
        sub = parser._subparsers._group_actions[0].choices[command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in known:
                raise ValueError(f"{early.config}: unknown key {key!r} for '{command}'")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(value) if action.type else value
                if action.choices and defaults[key] not in action.choices:
                    raise ValueError(f"{early.config}: {key} must be one of {action.choices}")
            action.required = False  # the file supplies it
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _open_out(path):
    return open(path, "w") if path else sys.stdout


def _load(args):
    hg = load_hypergraph(args.incidence, args.segments)
    truth = read_truth(args.truth)
    opts = SolverOptions(threshold=args.threshold, block_mode=args.block_mode, seed=args.seed,
                         cg=CgConfig(rel_tolerance=args.tol))
    return hg, truth, opts


def cmd_generate(args):
    counts = _counts(args.counts, args.size)
    hg, truth = generate_synthetic(counts, args.clusters, RngStream(args.seed),
                                   test_fraction=args.test_fraction)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_hypergraph(hg, f"{prefix}.mtx", f"{prefix}.segments.tsv")
    write_truth(f"{prefix}.truth.tsv", truth)
    print(json.dumps({"m": hg.m, "n": hg.n, "test_images": len(truth.test_images),
                      "files": [f"{prefix}.mtx", f"{prefix}.segments.tsv", f"{prefix}.truth.tsv"]}))


def cmd_rank(args):
    hg, truth, opts = _load(args)
    system = build_adjacency(hg, np.full(hg.n, 1.0 / hg.n), args.theta)
    fh = _open_out(args.out)
    try:
        for image, withheld in truth.items():
            query = build_query(hg, system, image, withheld)
            result = rank(system, query, args.solver, opts)
            fh.write(json.dumps({"image": image, "solver": args.solver,
                                 "top": top_tags(result.f, hg, args.top),
                                 "residual": result.residual,
                                 "solve_time": result.solve_time}) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _hweg(args, hg, truth, opts):
    w0 = WeightState.uniform(hg.n, kappa=args.kappa, mu=args.mu)
    return run_ith_hweg(hg, w0, truth.items(), args.solver, outer_passes=args.outer_passes,
                        inner_steps=args.inner_steps, theta=args.theta, opts=opts,
                        at=_int_list(args.at))


def _write_report(report, path, timing=True):
    fh = _open_out(path)
    try:
        fh.write(json.dumps(report.to_dict(timing=timing)) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_learn(args):
    hg, truth, opts = _load(args)
    report = _hweg(args, hg, truth, opts)
    if args.trace:
        with open(args.trace, "w") as fh:
            for image, pass_no, row in trace_rows(report):
                trace_to_jsonl([row], fh, image=image, **{"pass": pass_no})
    _write_report(report, args.out)


def cmd_eval(args):
    hg, truth, opts = _load(args)
    at = _int_list(args.at) or list(F1_POSITIONS)
    if args.method == "ith":
        report = run_ith(hg, np.full(hg.n, 1.0 / hg.n), truth.items(), args.solver,
                         theta=args.theta, opts=opts, at=at)
    else:
        args.at = ",".join(map(str, at))
        report = _hweg(args, hg, truth, opts)
    _write_report(report, args.out, timing=not args.no_timing)


def cmd_bench(args):
    scenarios = [Scenario(m, tuple(_str_list(args.solvers)), args.images, args.seed,
                          args.method, args.clusters, args.block_mode, parallel=args.parallel)
                 for m in _int_list(args.sizes)]
    rows = bench(scenarios)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out)
    write_jsonl(rows, out.with_suffix(".jsonl"))
    for row in rows:
        print(json.dumps(row.flat()))


COMMANDS = {"generate": cmd_generate, "rank": cmd_rank, "learn": cmd_learn,
            "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        COMMANDS[args.command](args)
    except (NumericalFailure, ContractViolation) as exc:
        print(f"hyperrank: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"hyperrank: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
