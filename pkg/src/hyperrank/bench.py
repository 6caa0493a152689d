"""Wall-clock comparison of the ranking back-ends over growing hypergraphs.

Every scenario generates a planted-cluster hypergraph with reference-scale vertex
proportions scaled to ``m``, then times ITH (or ITH-HWEG) for each solver over
the same test images. Rows carry the F1 values next to the timings so a rerun
with the same seed can be diffed on everything except the clock.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import InvalidInputError
from .learning import WeightState
from .linalg import RngStream
from .pipeline import F1_POSITIONS, SOLVERS, SolverOptions, run_ith, run_ith_hweg
from .synthetic import counts_for_size, generate_synthetic

TIME_FIELDS = ("total_time", "per_image_time")


@dataclass
class Scenario:
    m: int
    solvers: tuple[str, ...] = SOLVERS
    n_images: int = 5
    seed: int = 0
    method: str = "ith"  # or "ith-hweg"
    clusters: int = 40
    block_mode: str = "factored"
    inner_steps: int = 10
    parallel: bool = False  # per-image threads; excluded from solver comparisons

    def __post_init__(self):
        self.solvers = tuple(self.solvers)
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise InvalidInputError(f"unknown solvers {bad}; choose from {SOLVERS}")
        if self.method not in ("ith", "ith-hweg"):
            raise InvalidInputError(f"method must be 'ith' or 'ith-hweg', got {self.method!r}")
        if self.n_images < 1:
            raise InvalidInputError("n_images must be >= 1")


@dataclass
class BenchRow:
    m: int
    solver: str
    method: str
    n_images: int
    seed: int
    parallel: bool
    total_time: float
    per_image_time: float
    f1: dict = field(default_factory=dict)

    def flat(self, timing: bool = True) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "f1"}
        for k, v in self.f1.items():
            d[f"F1@{k}"] = v
        if not timing:
            for k in TIME_FIELDS:
                d.pop(k)
        return d


def run_scenario(sc: Scenario) -> list[BenchRow]:
    """Time every solver of ``sc``; BLAS is pinned to one thread unless ``sc.parallel``."""
    if sc.parallel:
        return _run_scenario(sc)
    with threadpool_limits(limits=1):
        return _run_scenario(sc)


def _run_scenario(sc: Scenario) -> list[BenchRow]:
    workers = (os.cpu_count() or 1) if sc.parallel else 1
    hg, truth = generate_synthetic(counts_for_size(sc.m), sc.clusters, RngStream(sc.seed))
    images = truth.items()[: sc.n_images]
    rows = []
    for solver in sc.solvers:
        opts = SolverOptions(block_mode=sc.block_mode, seed=sc.seed)
        if sc.method == "ith":
            rep = run_ith(hg, np.full(hg.n, 1.0 / hg.n), images, solver, opts=opts,
                          workers=workers)
        else:
            rep = run_ith_hweg(hg, WeightState.uniform(hg.n), images, solver,
                               inner_steps=sc.inner_steps, opts=opts)
        rows.append(BenchRow(hg.m, solver, sc.method, len(images), sc.seed, sc.parallel,
                             rep.total_time, rep.per_image_time,
                             {k: rep.f1[k] for k in F1_POSITIONS}))
    return rows


def bench(scenarios) -> list[BenchRow]:
    rows = []
    for sc in scenarios:
        rows.extend(run_scenario(sc))
    return rows


def write_jsonl(rows, path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row.flat()) + "\n")


def write_csv(rows, path) -> None:
    flat = [row.flat() for row in rows]
    if not flat:
        open(path, "w").close()
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(flat[0]))
        writer.writeheader()
        writer.writerows(flat)


def totals_by_solver(rows, m: int) -> dict[str, float]:
    return {r.solver: r.total_time for r in rows if r.m == m}
