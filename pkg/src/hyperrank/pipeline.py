"""Query construction, ranking back-ends, F1@k evaluation and the ITH /
ITH-HWEG schedules.

ITH ranks every test image against one fixed-weight hypergraph. ITH-HWEG
alternates, per test image, between ranking and re-learning the hyperedge
weights for that ranking; the block solver's leaf threshold follows the pass
schedule (50 on the first pass, 500 afterwards).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blockinv import apply_block_inverse, block_invert, tessellate
from .cg import CgConfig, cg_solve
from .errors import InvalidInputError
from .hypergraph import DEFAULT_THETA, HypergraphModel, SystemMatrix, build_adjacency
from .learning import TraceRow, WeightState, learn_weights, objective
from .linalg import RngStream
from .rsvd import DEFAULT_POWER_ITERS, RsvdConfig

SOLVERS = ("direct", "block-rsvd", "cg")
F1_POSITIONS = (1, 2, 5, 10)
THRESHOLD_SCHEDULE = (50, 500)


@dataclass
class QueryVector:
    y: np.ndarray
    image: int
    owner: int
    withheld: tuple[int, ...] = ()


@dataclass
class RankingResult:
    f: np.ndarray
    solver: str
    solve_time: float
    residual: float  # ||X f - b|| / ||b||
    threshold: int | None = None


@dataclass
class SolverOptions:
    """Knobs shared by the three back-ends."""

    threshold: int = THRESHOLD_SCHEDULE[0]
    block_mode: str = "factored"
    leaf: str = "rsvd"  # or "direct"
    power_iters: int = DEFAULT_POWER_ITERS
    seed: int = 0
    cg: CgConfig = field(default_factory=CgConfig)


def find_owner(hg: HypergraphModel, image: int) -> int:
    """The user sharing a two-vertex hyperedge with ``image``."""
    users = hg.segment("U")
    candidates = []
    for e in hg.edges_of(image):
        members = hg.members(e)
        if members.size == 2:
            other = int(members[0] if members[1] == image else members[1])
            if users.start <= other < users.stop:
                candidates.append(other)
    if not candidates:
        raise InvalidInputError(f"image {image} has no owner hyperedge")
    return min(candidates)


def build_query(
    hg: HypergraphModel, system: SystemMatrix, image: int, withheld=()
) -> QueryVector:
    """Seed vector for one test image.

    Image and owner get 1, the image's tags get ``A(image, tag)``, the owner's
    groups and geo-tags get ``A(owner, .)``. Withheld tags are forced to zero.
    """
    images = hg.segment("Im")
    if not images.start <= image < images.stop:
        raise InvalidInputError(f"vertex {image} is not an image")
    owner = find_owner(hg, image)
    y = np.zeros(hg.m)
    A = system.A
    tags = hg.segment("Ta")
    row = A.getrow(image).toarray().ravel()
    y[tags.slice] = row[tags.slice]
    owner_row = A.getrow(owner).toarray().ravel()
    for vtype in ("Gr", "Geo"):
        seg = hg.segment(vtype)
        y[seg.slice] = owner_row[seg.slice]
    y[image] = 1.0
    y[owner] = 1.0
    withheld = tuple(int(t) for t in withheld)
    y[list(withheld)] = 0.0
    return QueryVector(y, image, owner, withheld)


def _leaf_config(opts: SolverOptions):
    if opts.leaf == "direct":
        return "direct"
    return RsvdConfig(target_rank=1, oversample=0, power_iters=opts.power_iters,
                      rng=RngStream(opts.seed))


def rank(system: SystemMatrix, query, solver: str, opts: SolverOptions | None = None) -> RankingResult:
    """``f = theta/(1+theta) X^-1 y`` through the chosen back-end.

    Every call does the full work for its solver (no cached inverse), so the
    recorded ``solve_time`` is the per-query cost.
    """
    opts = opts or SolverOptions()
    y = query.y if isinstance(query, QueryVector) else np.asarray(query, dtype=np.float64)
    scale = system.rhs_scale
    threshold = None
    t0 = time.perf_counter()
    if solver == "direct":
        f = scale * (np.linalg.inv(system.dense()) @ y)
    elif solver == "block-rsvd":
        threshold = opts.threshold
        part = tessellate(system.m, threshold)
        inv = block_invert(system.dense(), part, leaf=_leaf_config(opts),
                           mode=opts.block_mode, residual="none")
        f = scale * apply_block_inverse(inv, y)
    elif solver == "cg":
        f = cg_solve(system, y, system.theta, opts.cg).f
    else:
        raise InvalidInputError(f"solver must be one of {SOLVERS}, got {solver!r}")
    elapsed = time.perf_counter() - t0
    b = scale * y
    b_norm = np.linalg.norm(b)
    residual = float(np.linalg.norm(system.matvec(f) - b) / b_norm) if b_norm else 0.0
    return RankingResult(f, solver, elapsed, residual, threshold)


# ---------------------------------------------------------------- evaluation


def top_tags(f, hg: HypergraphModel, k: int) -> list[int]:
    """Top-``k`` tag vertices by score; ties go to the lower vertex index."""
    seg = hg.segment("Ta")
    scores = np.asarray(f)[seg.slice]
    order = np.lexsort((np.arange(scores.size), -scores))
    return [seg.start + int(i) for i in order[:k]]


def precision_recall_f1(predicted, truth) -> tuple[float, float, float]:
    truth = set(truth)
    hits = len(set(predicted) & truth)
    p = hits / len(predicted) if predicted else 0.0
    r = hits / len(truth) if truth else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def score_ranking(f, hg, truth, at=F1_POSITIONS) -> dict:
    ranked = top_tags(f, hg, max(at))
    out = {}
    for k in at:
        p, r, f1 = precision_recall_f1(ranked[:k], truth)
        out[k] = {"precision": p, "recall": r, "f1": f1}
    return out


@dataclass
class EvalReport:
    method: str
    solver: str
    f1: dict[int, float]
    per_image: list[dict]
    total_time: float
    per_image_time: float
    pass_f1: list[dict[int, float]] = field(default_factory=list)
    thresholds: list[list[int | None]] = field(default_factory=list)
    traces: list[dict] = field(default_factory=list)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "method": self.method,
            "solver": self.solver,
            "f1": {f"F1@{k}": v for k, v in self.f1.items()},
            "pass_f1": [{f"F1@{k}": v for k, v in p.items()} for p in self.pass_f1],
            "n_images": len(self.per_image),
            "per_image": self.per_image,
        }
        if timing:
            d["total_time"] = self.total_time
            d["per_image_time"] = self.per_image_time
        return d


def _macro_f1(rows, at):
    return {k: float(np.mean([r["scores"][k]["f1"] for r in rows])) if rows else 0.0 for k in at}


def _image_row(image, scores, result):
    return {"image": image, "scores": scores, "residual": result.residual,
            "solve_time": result.solve_time, "threshold": result.threshold}


def run_ith(
    hg: HypergraphModel,
    w_fixed,
    images,
    solver: str,
    theta: float = DEFAULT_THETA,
    opts: SolverOptions | None = None,
    at=F1_POSITIONS,
    workers: int = 1,
) -> EvalReport:
    """Fixed weights: one adjacency, one ranking per ``(image, truth_tags)``.

    ``workers > 1`` ranks images concurrently over the shared (immutable)
    system; per-image solve times then overlap and are not comparable with a
    serial run.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    system = build_adjacency(hg, w_fixed, theta)

    def one(item):
        image, truth = item
        query = build_query(hg, system, image, truth)
        result = rank(system, query, solver, opts)
        return _image_row(image, score_ranking(result.f, hg, truth, at), result)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, images))
    else:
        rows = [one(item) for item in images]
    total = time.perf_counter() - t0
    f1 = _macro_f1(rows, at)
    return EvalReport("ith", solver, f1, rows, total, total / max(1, len(rows)),
                      pass_f1=[f1], thresholds=[[r["threshold"] for r in rows]])


def run_ith_hweg(
    hg: HypergraphModel,
    w0: WeightState,
    images,
    solver: str,
    outer_passes: int = 2,
    inner_steps: int = 10,
    theta: float = DEFAULT_THETA,
    opts: SolverOptions | None = None,
    at=F1_POSITIONS,
    thresholds=THRESHOLD_SCHEDULE,
) -> EvalReport:
    """Per test image: rank, re-learn weights for that ranking, rank again.

    Weights restart from ``w0`` for every image and the active set is cleared
    at the start of every learning pass. Vertices left without a positively
    weighted hyperedge after learning drop out of the adjacency (their rows of
    ``A`` become zero) rather than aborting the run. The reported F1 is the
    last pass's.
    """
    if outer_passes < 1 or inner_steps < 0:
        raise InvalidInputError("outer_passes must be >= 1 and inner_steps >= 0")
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    base = build_adjacency(hg, w0, theta)
    pass_rows: list[list[dict]] = [[] for _ in range(outer_passes)]
    traces = []
    for image, truth in images:
        state = w0
        system = base
        for p in range(outer_passes):
            threshold = thresholds[min(p, len(thresholds) - 1)]
            pass_opts = SolverOptions(**{**opts.__dict__, "threshold": threshold})
            query = build_query(hg, system, image, truth)
            result = rank(system, query, solver, pass_opts)
            row = _image_row(image, score_ranking(result.f, hg, truth, at), result)
            row["objective"] = objective(state, result.f, hg, isolated="drop")
            pass_rows[p].append(row)
            if inner_steps > 0 and p + 1 < outer_passes:
                learned = learn_weights(hg, result.f, state.reset_active(), inner_steps,
                                        isolated="drop")
                traces.append({"image": image, "pass": p + 1,
                               "trace": [r.__dict__ for r in learned.trace]})
                state = learned.state
                system = build_adjacency(hg, state, theta, isolated="drop")
    total = time.perf_counter() - t0
    pass_f1 = [_macro_f1(rows, at) for rows in pass_rows]
    final = pass_rows[-1]
    return EvalReport(
        "ith-hweg", solver, pass_f1[-1], final, total, total / max(1, len(final)),
        pass_f1=pass_f1,
        thresholds=[[r["threshold"] for r in rows] for rows in pass_rows],
        traces=traces,
    )


def trace_rows(report: EvalReport):
    """Flatten an ITH-HWEG report's learning traces into ``TraceRow`` records."""
    for entry in report.traces:
        for r in entry["trace"]:
            yield entry["image"], entry["pass"], TraceRow(**r)
