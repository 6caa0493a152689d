"""Dense/sparse matrix foundation.

Dense matrices are plain 2-D ``float64`` numpy arrays and sparse matrices are
``scipy.sparse`` CSR matrices. The factorizations delegate to LAPACK:
``qr_factor`` uses Householder reflections (``dgeqrf``) and ``svd_small`` uses
Golub-Kahan bidiagonalization followed by implicit-shift QR (``dgesvd``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, NumericalFailure, ShapeError

SMALL_SIDE_BOUND = 4096


class RngStream:
    """Seeded Gaussian source. Not safe to share between threads."""

    def __init__(self, seed: int, algorithm: str = "PCG64"):
        self.seed = int(seed)
        self.algorithm = algorithm
        try:
            bitgen = getattr(np.random, algorithm)
        except AttributeError:
            raise InvalidInputError(f"unknown bit generator {algorithm!r}") from None
        self.generator = np.random.Generator(bitgen(self.seed))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, algorithm={self.algorithm!r})"

    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)


@dataclass(frozen=True)
class SvdFactors:
    """Thin factorization ``M ~ U @ diag(sigma) @ V.T``.

    The rank metadata is filled in by the randomized routines; for a plain
    ``svd_small`` call ``target_rank == sample_width == len(sigma)``.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    target_rank: int
    sample_width: int
    power_iters: int = 0
    oversample: int = 0
    residual: float = float("nan")
    extra: dict = field(default_factory=dict, compare=False)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    def truncated(self, k: int) -> "SvdFactors":
        return SvdFactors(self.U[:, :k], self.sigma[:k], self.V[:, :k], k, k)


def as_dense(M, name="matrix") -> np.ndarray:
    if sp.issparse(M):
        M = M.toarray()
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    check_finite(M, name)
    return M


def check_finite(M, name="matrix"):
    data = M.data if sp.issparse(M) else M
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{name} contains NaN or Inf")


def qr_factor(M) -> tuple[np.ndarray, np.ndarray]:
    """Reduced Householder QR of a tall (or square) matrix.

    Rank-deficient input is accepted; ``R`` then has zero (or tiny) diagonal
    entries while ``Q`` stays column-orthonormal.
    """
    M = as_dense(M)
    if M.shape[0] < M.shape[1]:
        raise ShapeError(f"qr_factor needs rows >= cols, got {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    return Q, R


def _fix_signs(U, V):
    # largest-magnitude entry of each U column made non-negative
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def svd_small(M, small_side_bound: int = SMALL_SIDE_BOUND) -> SvdFactors:
    """Thin deterministic SVD with sorted singular values and fixed column signs."""
    M = as_dense(M)
    if min(M.shape) > small_side_bound:
        raise ShapeError(
            f"svd_small limited to min(rows, cols) <= {small_side_bound}, got {M.shape}"
        )
    try:
        U, s, Vt = scipy.linalg.svd(
            M, full_matrices=False, lapack_driver="gesvd", check_finite=False
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    U, V = _fix_signs(U, Vt.T)
    k = s.shape[0]
    return SvdFactors(U, s, V, target_rank=k, sample_width=k)


def gaussian_matrix(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ShapeError(f"gaussian_matrix needs positive sizes, got ({rows}, {cols})")
    return rng.standard_normal((rows, cols))


def matmul(A, B):
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def matvec(A, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot apply {A.shape} matrix to vector of shape {x.shape}")
    return A @ x


def transpose(A):
    return A.T


def frobenius_norm(A) -> float:
    if sp.issparse(A):
        return float(spla.norm(A, "fro"))
    return float(np.linalg.norm(A, "fro"))


def left_multiply_transpose(S: np.ndarray, X) -> np.ndarray:
    """``S.T @ X`` for dense ``S`` and dense or sparse ``X``."""
    if sp.issparse(X):
        return np.asarray((X.T @ S).T)
    return S.T @ X


# ---------------------------------------------------------------- file formats


def read_matrix_market(path) -> sp.csr_matrix:
    M = scipy.io.mmread(str(path))
    M = sp.csr_matrix(M, dtype=np.float64)
    M.sum_duplicates()
    M.eliminate_zeros()
    check_finite(M, str(path))
    return M


def write_matrix_market(path, M) -> None:
    M = sp.coo_matrix(M)
    rows, cols = M.shape
    M.sum_duplicates()
    mask = M.data != 0
    r, c, v = M.row[mask], M.col[mask], M.data[mask]
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{rows} {cols} {len(v)}\n")
        for i, j, x in zip(r, c, v):
            fh.write(f"{i + 1} {j + 1} {float(x)!r}\n")


def read_dense(path) -> np.ndarray:
    text = Path(path).read_text().split()
    if len(text) < 2:
        raise InvalidInputError(f"{path}: missing 'rows cols' header")
    rows, cols = int(text[0]), int(text[1])
    values = np.array([float(t) for t in text[2:]], dtype=np.float64)
    if values.size != rows * cols:
        raise InvalidInputError(f"{path}: expected {rows * cols} values, found {values.size}")
    return as_dense(values.reshape(rows, cols), str(path))


def write_dense(path, M) -> None:
    M = as_dense(M)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
