"""Randomized SVD by subspace iteration, the plain power scheme, and SVD inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, ShapeError, SingularMatrixError
from .linalg import (
    RngStream,
    SvdFactors,
    check_finite,
    gaussian_matrix,
    left_multiply_transpose,
    qr_factor,
    svd_small,
)

DEFAULT_OVERSAMPLE = 10
DEFAULT_POWER_ITERS = 2
INVERSE_RTOL = 1e-12


@dataclass
class RsvdConfig:
    """Sampling parameters.

    ``oversample`` and ``power_iters`` are independent: the sample width is
    ``target_rank + oversample`` and ``power_iters`` counts subspace-iteration
    passes.
    """

    target_rank: int
    oversample: int = DEFAULT_OVERSAMPLE
    power_iters: int = DEFAULT_POWER_ITERS
    rng: RngStream | None = None

    def __post_init__(self):
        if self.target_rank < 1:
            raise InvalidInputError("target_rank must be >= 1")
        if self.oversample < 0 or self.power_iters < 0:
            raise InvalidInputError("oversample and power_iters must be >= 0")
        if self.rng is None:
            self.rng = RngStream(0)

    @property
    def sample_width(self) -> int:
        return self.target_rank + self.oversample


def _check_square(X, cfg: RsvdConfig):
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {X.shape}")
    check_finite(X)
    m = X.shape[0]
    if cfg.sample_width > m:
        raise InvalidInputError(
            f"sample width {cfg.sample_width} (k={cfg.target_rank} + "
            f"oversample={cfg.oversample}) exceeds dimension {m}"
        )
    return m


def randomized_range(X, cfg: RsvdConfig) -> np.ndarray:
    """Orthonormal m x l basis approximating the range of ``X``.

    Every product with ``X`` or ``X.T`` is followed by a QR step, which keeps
    the small singular directions from being swamped by round-off.
    """
    m = _check_square(X, cfg)
    omega = gaussian_matrix(m, cfg.sample_width, cfg.rng)
    S, _ = qr_factor(X @ omega)
    for _ in range(cfg.power_iters):
        S_tilde, _ = qr_factor(X.T @ S)
        S, _ = qr_factor(X @ S_tilde)
    return S


def rsvd_power_scheme(X, cfg: RsvdConfig) -> np.ndarray:
    """Basis of ``(X X^T)^q X Omega`` with a single terminal QR.

    Cheaper than :func:`randomized_range` but loses the directions whose
    singular values fall below ``eps ** (1 / (2q + 1))`` relative to the top
    one. Prefer :func:`randomized_range` whenever accuracy matters.
    """
    m = _check_square(X, cfg)
    Y = X @ gaussian_matrix(m, cfg.sample_width, cfg.rng)
    for _ in range(cfg.power_iters):
        Y = X @ (X.T @ Y)
    S, _ = qr_factor(Y)
    return S


def range_residual(X, S) -> float:
    """``||X - S S^T X||_F``."""
    B = left_multiply_transpose(S, X)
    Xd = X.toarray() if sp.issparse(X) else X
    return float(np.linalg.norm(Xd - S @ B))


def rsvd(X, cfg: RsvdConfig) -> SvdFactors:
    S = randomized_range(X, cfg)
    B = left_multiply_transpose(S, X)
    small = svd_small(B)
    U = S @ small.U
    Xd = X.toarray() if sp.issparse(X) else X
    residual = float(np.linalg.norm(Xd - (U * small.sigma) @ small.V.T))
    return SvdFactors(
        U,
        small.sigma,
        small.V,
        target_rank=cfg.target_rank,
        sample_width=cfg.sample_width,
        power_iters=cfg.power_iters,
        oversample=cfg.oversample,
        residual=residual,
    )


def invert_from_svd(f: SvdFactors, rtol: float = INVERSE_RTOL) -> np.ndarray:
    """``V diag(1/sigma) U^T``; refuses singular values below ``sigma_max * rtol``."""
    sigma = np.asarray(f.sigma)
    if sigma.size == 0:
        raise SingularMatrixError("empty factorization", index=0)
    cutoff = sigma[0] * rtol
    bad = np.flatnonzero(~(sigma > cutoff))
    if bad.size:
        i = int(bad[0])
        raise SingularMatrixError(
            f"singular value {i} ({sigma[i]:.3e}) below threshold {cutoff:.3e}", index=i
        )
    return (f.V / sigma) @ f.U.T
