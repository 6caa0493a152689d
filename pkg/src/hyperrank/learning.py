"""Hyperedge weight learning on the probability simplex.

For a fixed ranking vector ``f`` the weights minimize

    P(w) = f^T L(w) f + kappa * ||w||^2    s.t.  sum(w) = 1, w >= 0

by projected steepest descent. The sum constraint is always active; a weight
driven to zero joins the active set and stays there for the rest of the
``learn_weights`` call.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DegenerateSimplexError, InvalidInputError, IsolatedVertexError, ShapeError
from .hypergraph import HypergraphModel, degrees, inv_sqrt_degrees

DEFAULT_KAPPA = 0.1
DEFAULT_MU = 0.05
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightState:
    w: np.ndarray
    kappa: float = DEFAULT_KAPPA
    mu: float = DEFAULT_MU
    active: frozenset = frozenset()

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ShapeError("weights must be a non-empty vector")
        if not (self.kappa > 0 and self.mu > 0):
            raise InvalidInputError("kappa and mu must be > 0")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, not 1")
        active = frozenset(int(i) for i in self.active)
        if any(w[i] != 0.0 for i in active):
            raise InvalidInputError("clamped weights must be exactly zero")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "active", active)

    @classmethod
    def uniform(cls, n: int, kappa: float = DEFAULT_KAPPA, mu: float = DEFAULT_MU):
        return cls(np.full(n, 1.0 / n), kappa, mu)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.active)] = False
        return mask

    def reset_active(self) -> "WeightState":
        return replace(self, active=frozenset())


@dataclass(frozen=True)
class ActiveConstraints:
    """Lagrange multipliers of the active constraints for one descent step.

    ``multipliers[0]`` belongs to the sum constraint; the rest pair up with
    ``clamped`` in order.
    """

    multipliers: np.ndarray
    clamped: tuple[int, ...]


@dataclass(frozen=True)
class TraceRow:
    step: int
    objective: float
    n_active: int
    mu: float


@dataclass
class LearnResult:
    state: WeightState
    trace: list[TraceRow]


def edge_scores(hg: HypergraphModel, w, f, isolated: str = "error") -> np.ndarray:
    """``(h_e^T Dv^-1/2 f)^2 / delta(e)`` per hyperedge, degrees taken at ``w``.

    ``f^T A f`` equals ``sum_e w_e * score_e``.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (hg.m,):
        raise ShapeError(f"expected ranking vector of length {hg.m}, got {f.shape}")
    deg = degrees(hg, w, isolated)
    proj = hg.HT @ (inv_sqrt_degrees(deg.vertex) * f)
    return proj * proj / deg.edge


def objective(state: WeightState, f, hg: HypergraphModel, isolated: str = "error") -> float:
    f = np.asarray(f, dtype=np.float64)
    scores = edge_scores(hg, state.w, f, isolated)
    return float(f @ f - state.w @ scores + state.kappa * (state.w @ state.w))


def gradient_frozen(state: WeightState, f, hg: HypergraphModel, isolated: str = "error") -> np.ndarray:
    """Gradient of P with the degree matrices held at the current weights."""
    return -edge_scores(hg, state.w, f, isolated) + 2.0 * state.kappa * state.w


def active_constraints(state: WeightState, grad) -> ActiveConstraints:
    grad = np.asarray(grad, dtype=np.float64)
    free = state.free_mask()
    if not free.any():
        raise DegenerateSimplexError("every hyperedge weight is clamped")
    c1 = -float(grad[free].mean())
    clamped = tuple(sorted(state.active))
    c = np.concatenate([[c1], -(grad[list(clamped)] + c1)])
    return ActiveConstraints(c, clamped)


def projected_gradient(state: WeightState, grad) -> np.ndarray:
    """Gradient of the Lagrangian: zero on clamped weights, zero-sum on the rest."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.w.shape:
        raise ShapeError("gradient length does not match the weights")
    cons = active_constraints(state, grad)
    g = grad + cons.multipliers[0]
    g[list(cons.clamped)] = 0.0
    return g


def steepest_descent_step(state: WeightState, grad) -> WeightState:
    g = projected_gradient(state, grad)
    free = state.free_mask()
    w = state.w - state.mu * g
    w[~free] = 0.0
    active = set(state.active)
    while True:
        neg = free & (w < 0.0)
        if not neg.any():
            break
        w[neg] = 0.0
        free &= ~neg
        active.update(int(i) for i in np.flatnonzero(neg))
        if not free.any():
            raise DegenerateSimplexError("every hyperedge weight is clamped")
        w[free] -= (w.sum() - 1.0) / free.sum()
    w /= w.sum()
    return replace(state, w=w, active=frozenset(active))


def learn_weights(
    hg: HypergraphModel,
    f,
    w0: WeightState,
    steps: int,
    isolated: str = "error",
    max_halvings: int = 40,
) -> LearnResult:
    """Run ``steps`` projected steepest-descent steps with ``f`` held fixed.

    A step that raises the objective (or isolates a vertex when
    ``isolated="error"``) is rejected and retried with half the step size; an
    accepted halved ``mu`` carries over to later steps. ``mu`` never drops
    below ``w0.mu * 2**-max_halvings``; if no trial step is accepted the
    weights stay put for that step. The trace starts with the objective at
    ``w0`` (step 0).
    """
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    f = np.asarray(f, dtype=np.float64)
    state = w0
    mu_floor = w0.mu * 0.5**max_halvings
    obj = objective(state, f, hg, isolated)
    trace = [TraceRow(0, obj, len(state.active), state.mu)]
    for step in range(1, steps + 1):
        grad = gradient_frozen(state, f, hg, isolated)
        mu = state.mu
        while mu >= mu_floor:
            try:
                cand = steepest_descent_step(replace(state, mu=mu), grad)
                cand_obj = objective(cand, f, hg, isolated)
            except (IsolatedVertexError, DegenerateSimplexError):
                cand = None
            if cand is not None and cand_obj <= obj:
                state, obj = cand, cand_obj
                break
            mu *= 0.5
        trace.append(TraceRow(step, obj, len(state.active), state.mu))
    return LearnResult(state, trace)


def trace_to_jsonl(rows, fh, **extra) -> None:
    for row in rows:
        fh.write(json.dumps({**asdict(row), **extra}) + "\n")
