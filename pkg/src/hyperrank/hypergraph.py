"""Hypergraph incidence, degrees, normalized adjacency and the system matrix.

The adjacency is ``A = Dv^-1/2 H W De^-1 H^T Dv^-1/2`` with vertex degrees
``dv = H w`` and hyperedge degrees ``de = H^T 1``. It is formed as ``B B^T``
with ``B = Dv^-1/2 H (W De^-1)^1/2`` so the sparse pattern of ``H H^T`` is
never exceeded and ``A`` stays symmetric positive semidefinite with spectral
radius at most one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import EmptyHyperedgeError, InvalidInputError, IsolatedVertexError, ShapeError
from .linalg import RngStream, read_matrix_market, write_matrix_market

VERTEX_TYPES = ("Im", "U", "Gr", "Geo", "Ta")
DEFAULT_THETA = 1.0 / 9.0


@dataclass(frozen=True)
class Segment:
    type: str
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True, eq=False)
class HypergraphModel:
    """Binary m x n incidence matrix with a contiguous vertex-type segmentation."""

    H: sp.csr_matrix
    segments: tuple[Segment, ...]

    def __post_init__(self):
        H = sp.csr_matrix(self.H, dtype=np.float64)
        H.sum_duplicates()
        H.eliminate_zeros()
        if not np.all(H.data == 1.0):
            raise InvalidInputError("incidence entries must be 0 or 1")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "segments", tuple(self.segments))
        pos = 0
        for seg in self.segments:
            if seg.start != pos or seg.length < 0:
                raise InvalidInputError(f"segment {seg} is not contiguous with the previous one")
            pos = seg.stop
        if pos != H.shape[0]:
            raise InvalidInputError(f"segments cover {pos} vertices, incidence has {H.shape[0]}")
        empty = np.flatnonzero(self.edge_degrees == 0)
        if empty.size:
            raise EmptyHyperedgeError(empty[0])

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @cached_property
    def HT(self) -> sp.csr_matrix:
        return self.H.T.tocsr()

    @cached_property
    def edge_degrees(self) -> np.ndarray:
        return np.asarray(self.H.sum(axis=0)).ravel()

    def segment(self, vtype: str) -> Segment:
        for seg in self.segments:
            if seg.type == vtype:
                return seg
        raise InvalidInputError(f"no vertex segment of type {vtype!r}")

    def vertex_type(self, v: int) -> str:
        for seg in self.segments:
            if seg.start <= v < seg.stop:
                return seg.type
        raise InvalidInputError(f"vertex {v} out of range")

    def boundaries(self) -> list[int]:
        return [seg.start for seg in self.segments[1:]]

    def edges_of(self, v: int) -> np.ndarray:
        row = self.H.getrow(v)
        return row.indices

    def members(self, e: int) -> np.ndarray:
        return self.HT.getrow(e).indices


@dataclass(frozen=True)
class DegreeVectors:
    vertex: np.ndarray
    edge: np.ndarray


def edge_weights(w) -> np.ndarray:
    return np.asarray(getattr(w, "w", w), dtype=np.float64)


def degrees(hg: HypergraphModel, w, isolated: str = "error") -> DegreeVectors:
    """Vertex degrees ``sum_e w(e) H(v, e)`` and hyperedge sizes.

    ``isolated="drop"`` tolerates zero vertex degrees (vertices whose every
    hyperedge has zero weight) instead of raising; such vertices end up with
    empty rows in the adjacency.
    """
    w = edge_weights(w)
    if w.shape != (hg.n,):
        raise ShapeError(f"expected {hg.n} hyperedge weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("hyperedge weights must be finite and non-negative")
    dv = hg.H @ w
    if isolated == "error":
        zero = np.flatnonzero(dv <= 0)
        if zero.size:
            raise IsolatedVertexError(zero[0])
    elif isolated != "drop":
        raise InvalidInputError(f"isolated must be 'error' or 'drop', got {isolated!r}")
    return DegreeVectors(dv, hg.edge_degrees.copy())


def inv_sqrt_degrees(dv: np.ndarray) -> np.ndarray:
    out = np.zeros_like(dv)
    pos = dv > 0
    out[pos] = 1.0 / np.sqrt(dv[pos])
    return out


@dataclass(frozen=True, eq=False)
class SystemMatrix:
    """``X = I - A / (1 + theta)`` kept in factored (sparse ``A``) form."""

    A: sp.csr_matrix
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if not self.theta > 0:
            raise InvalidInputError("theta must be > 0")
        if self.A.shape[0] != self.A.shape[1]:
            raise ShapeError("adjacency must be square")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def rhs_scale(self) -> float:
        return self.theta / (1.0 + self.theta)

    def matvec(self, v):
        return v - (self.A @ v) / (1.0 + self.theta)

    def __matmul__(self, v):
        return self.matvec(v)

    def sparse(self) -> sp.csr_matrix:
        return (sp.identity(self.m, format="csr") - self.A / (1.0 + self.theta)).tocsr()

    def dense(self) -> np.ndarray:
        X = -self.A.toarray() / (1.0 + self.theta)
        X[np.diag_indices(self.m)] += 1.0
        return X

    def rhs(self, y) -> np.ndarray:
        return self.rhs_scale * np.asarray(y, dtype=np.float64)


def normalized_incidence(hg: HypergraphModel, w, isolated: str = "error") -> sp.csr_matrix:
    """``B = Dv^-1/2 H (W De^-1)^1/2`` so that ``A = B B^T``."""
    w = edge_weights(w)
    deg = degrees(hg, w, isolated)
    B = sp.diags(inv_sqrt_degrees(deg.vertex)) @ hg.H @ sp.diags(np.sqrt(w / deg.edge))
    B = B.tocsr()
    B.eliminate_zeros()
    return B


def build_adjacency(
    hg: HypergraphModel, w, theta: float = DEFAULT_THETA, isolated: str = "error"
) -> SystemMatrix:
    B = normalized_incidence(hg, w, isolated)
    A = (B @ B.T).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return SystemMatrix(A, theta)


def laplacian_quadratic(system: SystemMatrix, f) -> float:
    """``f^T (I - A) f``."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (system.m,):
        raise ShapeError(f"expected vector of length {system.m}, got shape {f.shape}")
    return float(f @ f - f @ (system.A @ f))


def spectral_radius(A, iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of a symmetric matrix."""
    rng = RngStream(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_next = w / norm
        lam_next = float(v @ w)
        if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)):
            return abs(lam_next)
        v, lam = v_next, lam_next
    return abs(lam)


# ---------------------------------------------------------------- file formats


def read_segments(path) -> tuple[Segment, ...]:
    segments = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InvalidInputError(f"{path}:{lineno}: expected 'type<TAB>start<TAB>length'")
        vtype, start, length = parts[0], int(parts[1]), int(parts[2])
        if vtype not in VERTEX_TYPES:
            raise InvalidInputError(f"{path}:{lineno}: unknown vertex type {vtype!r}")
        segments.append(Segment(vtype, start, length))
    return tuple(segments)


def write_segments(path, segments) -> None:
    with open(path, "w") as fh:
        for seg in segments:
            fh.write(f"{seg.type}\t{seg.start}\t{seg.length}\n")


def load_hypergraph(incidence_path, segments_path) -> HypergraphModel:
    return HypergraphModel(read_matrix_market(incidence_path), read_segments(segments_path))


def save_hypergraph(hg: HypergraphModel, incidence_path, segments_path) -> None:
    write_matrix_market(incidence_path, hg.H)
    write_segments(segments_path, hg.segments)
