"""Plain (unpreconditioned) conjugate gradient for ``X f = theta/(1+theta) y``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import ContractViolation, ConvergenceError, InvalidInputError, ShapeError
from .linalg import RngStream


@dataclass
class CgConfig:
    rel_tolerance: float = 1e-8
    max_iters: int | None = None  # None -> dimension
    f0: np.ndarray | None = None
    check_symmetry: bool = False

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise InvalidInputError("rel_tolerance must be > 0")
        if self.max_iters is not None and self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")


@dataclass
class CgState:
    f: np.ndarray
    r: np.ndarray
    p: np.ndarray
    alpha: float
    beta: float
    iteration: int


class CgResult(NamedTuple):
    f: np.ndarray
    iters: int
    residual: float  # ||b - X f|| / ||b||, recomputed from scratch


def as_operator(X) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a matrix, sparse matrix, LinearOperator-like or callable as ``v -> X v``."""
    if hasattr(X, "matvec"):
        return X.matvec
    if hasattr(X, "shape") and hasattr(X, "__matmul__"):
        return lambda v: X @ v
    if callable(X):
        return X
    raise InvalidInputError(f"cannot use {type(X).__name__} as a linear operator")


def cg_iterations(apply, b: np.ndarray, f0: np.ndarray) -> Iterator[CgState]:
    """Yield the state after each iteration, starting with iteration 0.

    Runs until the residual is exactly zero or the caller stops consuming.
    """
    f = f0.copy()
    r = b - apply(f)
    p = r.copy()
    rr = float(r @ r)
    yield CgState(f.copy(), r.copy(), p.copy(), 0.0, 0.0, 0)
    i = 0
    while rr > 0.0:
        i += 1
        Xp = apply(p)
        pXp = float(p @ Xp)
        if not pXp > 0.0:
            raise ContractViolation(
                f"p^T X p = {pXp:.3e} at iteration {i}: operator is not positive definite"
            )
        alpha = rr / pXp
        f += alpha * p
        r -= alpha * Xp
        rr_new = float(r @ r)
        beta = rr_new / rr
        p = r + beta * p
        rr = rr_new
        yield CgState(f.copy(), r.copy(), p.copy(), alpha, beta, i)


def _check_symmetric(apply, dim, rng=None, probes=3):
    rng = rng or RngStream(12345)
    for _ in range(probes):
        u = rng.standard_normal(dim)
        v = rng.standard_normal(dim)
        Xu, Xv = apply(u), apply(v)
        lhs, rhs = float(u @ Xv), float(v @ Xu)
        scale = np.linalg.norm(u) * np.linalg.norm(Xv) + np.linalg.norm(v) * np.linalg.norm(Xu)
        if abs(lhs - rhs) > 1e-10 * scale:
            raise ContractViolation(
                f"operator is not symmetric: u^T X v = {lhs:.6e}, v^T X u = {rhs:.6e}"
            )


def cg_solve(X, y, theta: float, cfg: CgConfig | None = None) -> CgResult:
    """Solve ``X f = theta/(1+theta) y`` starting from ``cfg.f0`` (zero by default).

    Raises :class:`ConvergenceError` carrying the best iterate when
    ``max_iters`` runs out before ``||r|| <= rel_tolerance * ||b||``.
    """
    cfg = cfg or CgConfig()
    if not theta > 0:
        raise InvalidInputError("theta must be > 0")
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ShapeError("y must be a vector")
    dim = y.shape[0]
    if hasattr(X, "shape") and tuple(X.shape) != (dim, dim):
        raise ShapeError(f"operator shape {X.shape} does not match vector length {dim}")
    apply = as_operator(X)
    if cfg.check_symmetry:
        _check_symmetric(apply, dim)

    b = (theta / (1.0 + theta)) * y
    f0 = np.zeros(dim) if cfg.f0 is None else np.asarray(cfg.f0, dtype=np.float64).copy()
    if f0.shape != (dim,):
        raise ShapeError("f0 has the wrong length")
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CgResult(np.zeros(dim), 0, 0.0)
    tol = cfg.rel_tolerance * b_norm
    max_iters = cfg.max_iters or dim

    best_f, best_res = f0, np.inf
    for state in cg_iterations(apply, b, f0):
        res = float(np.linalg.norm(state.r))
        if res < best_res:
            best_f, best_res = state.f, res
        if res <= tol:
            true_res = float(np.linalg.norm(b - apply(state.f))) / b_norm
            return CgResult(state.f, state.iteration, true_res)
        if state.iteration >= max_iters:
            break
    raise ConvergenceError(
        f"CG did not reach relative residual {cfg.rel_tolerance:g} in {max_iters} iterations",
        f=best_f,
        residual=best_res / b_norm,
        iters=max_iters,
    )
