"""Recursive 2x2 Schur-complement inversion along the main diagonal.

A square matrix is tessellated into nested diagonal blocks. Each internal
node splits its matrix as ``[[X11, X12], [X21, X22]]`` and the inverse is

    [[ Z1^-1,               -X11^-1 X12 Z2^-1 ],
     [ -Z2^-1 X21 X11^-1,    Z2^-1            ]]

with ``Z1 = X11 - X12 X22^-1 X21`` and ``Z2 = X22 - X21 X11^-1 X12``. Leaves
are inverted through a full-width randomized SVD (or LAPACK, for baselines).

Two node strategies are offered:

``explicit``
    Inverts X11, X22, Z1 and Z2 recursively and stores the four blocks. Four
    recursive calls per node make the leaf count grow like ``(dim/leaf)**2``.
``factored``
    Inverts only X11 and Z2 recursively; ``Z1^-1`` is represented through the
    identity ``Z1^-1 = X11^-1 + X11^-1 X12 Z2^-1 X21 X11^-1`` and never formed.
    The leaf count grows like ``dim/leaf``, which is what makes the block
    solver cheaper than a dense inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, ShapeError, SingularMatrixError
from .linalg import RngStream, SvdFactors, check_finite
from .rsvd import RsvdConfig, invert_from_svd, rsvd

MODES = ("explicit", "factored")
EXACT_RESIDUAL_MAX_DIM = 1024


@dataclass(frozen=True)
class BlockPartition:
    start: int
    stop: int
    leaf_dim_threshold: int
    split_index: int | None = None
    children: tuple[BlockPartition, BlockPartition] | None = None

    @property
    def dim(self) -> int:
        return self.stop - self.start

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def leaves(self) -> list[BlockPartition]:
        if self.is_leaf:
            return [self]
        left, right = self.children
        return left.leaves() + right.leaves()

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)


def tessellate(dim: int, threshold: int, boundaries=None) -> BlockPartition:
    """Split ``[0, dim)`` at midpoints until every block has size <= threshold.

    ``boundaries`` (e.g. vertex-type segment edges) switches to splitting at the
    interior boundary nearest the midpoint, falling back to the midpoint when
    a range contains none.
    """
    if dim < 1 or threshold < 1:
        raise InvalidInputError("dim and threshold must be >= 1")
    cuts = sorted(set(int(b) for b in boundaries)) if boundaries is not None else None

    def build(start, stop):
        d = stop - start
        if d <= threshold:
            return BlockPartition(start, stop, threshold)
        mid = start + d // 2
        if cuts:
            inner = [b for b in cuts if start < b < stop]
            if inner:
                mid = min(inner, key=lambda b: (abs(b - (start + d / 2)), b))
        return BlockPartition(
            start, stop, threshold, split_index=mid - start,
            children=(build(start, mid), build(mid, stop)),
        )

    return build(0, dim)


@dataclass
class BlockInverse:
    """Tree of block inverses mirroring a :class:`BlockPartition`.

    Leaves carry ``leaf_inverse`` (and the SVD factors when inverted through
    rsvd). Explicit nodes carry ``z1_inv``, ``z2_inv`` and the two
    off-diagonal blocks; factored nodes carry ``x11_inv``, ``z2_inv``, the
    coupling ``X11^-1 X12`` and ``X21``. ``residual`` is set on the root only.
    """

    partition: BlockPartition
    mode: str
    path: str = "root"
    leaf_inverse: np.ndarray | None = None
    leaf_factors: SvdFactors | None = None
    z1_inv: BlockInverse | None = None
    z2_inv: BlockInverse | None = None
    x11_inv: BlockInverse | None = None
    top_right: np.ndarray | None = None
    bottom_left: np.ndarray | None = None
    coupling: np.ndarray | None = None
    lower: object = None
    operand: object = field(default=None, repr=False)
    residual: float = float("nan")
    residual_kind: str = ""

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def is_leaf(self) -> bool:
        return self.leaf_inverse is not None

    def nodes(self):
        yield self
        for child in (self.x11_inv, self.z1_inv, self.z2_inv):
            if child is not None:
                yield from child.nodes()

    def leaf_count(self) -> int:
        return sum(1 for node in self.nodes() if node.is_leaf)

    def blocks(self):
        """Materialized (top-left, top-right, bottom-left, bottom-right) inverse blocks."""
        if self.is_leaf:
            raise InvalidInputError("leaf nodes have no block structure")
        if self.mode == "explicit":
            return (
                materialize(self.z1_inv),
                self.top_right,
                self.bottom_left,
                materialize(self.z2_inv),
            )
        inv11 = materialize(self.x11_inv)
        inv_z2 = materialize(self.z2_inv)
        q = _mul(self.lower, inv11)
        top_right = -self.coupling @ inv_z2
        bottom_left = -inv_z2 @ q
        top_left = inv11 - top_right @ q
        return top_left, top_right, bottom_left, inv_z2


def _dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _mul(A, B) -> np.ndarray:
    """Dense result of ``A @ B`` for any mix of dense and sparse operands."""
    if sp.issparse(B) and not sp.issparse(A):
        return np.asarray((B.T @ np.asarray(A).T).T)
    out = A @ B
    return out.toarray() if sp.issparse(out) else np.asarray(out)


def _split(X, s):
    if sp.issparse(X):
        X = X.tocsr()
        top, bottom = X[:s], X[s:]
        return (top[:, :s], top[:, s:], bottom[:, :s], bottom[:, s:])
    return X[:s, :s], X[:s, s:], X[s:, :s], X[s:, s:]


def _invert_leaf(X, part, leaf, path, keep):
    Xd = _dense(X)
    node = BlockInverse(part, mode="leaf", path=path, operand=X if keep else None)
    if isinstance(leaf, RsvdConfig):
        d = part.dim
        cfg = RsvdConfig(
            target_rank=d,
            oversample=0,  # k = d leaves no room to oversample
            power_iters=leaf.power_iters,
            rng=leaf.rng,
        )
        factors = rsvd(Xd, cfg)
        try:
            node.leaf_inverse = invert_from_svd(factors)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"singular block at {path}: {exc}", index=exc.index, path=path
            ) from exc
        node.leaf_factors = factors
        return node
    try:
        inv = np.linalg.inv(Xd)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular block at {path}", path=path) from exc
    if not np.all(np.isfinite(inv)):
        raise SingularMatrixError(f"singular block at {path}", path=path)
    node.leaf_inverse = inv
    return node


def _invert(X, part, leaf, mode, path, keep):
    if part.is_leaf:
        return _invert_leaf(X, part, leaf, path, keep)
    s = part.split_index
    left, right = part.children
    X11, X12, X21, X22 = _split(X, s)
    node = BlockInverse(part, mode=mode, path=path, operand=X if keep else None)

    if mode == "factored":
        inv11 = _invert(X11, left, leaf, mode, path + "/x11", keep)
        coupling = apply_block_inverse(inv11, _dense(X12))
        z2 = _dense(X22) - _mul(X21, coupling)
        node.x11_inv = inv11
        node.z2_inv = _invert(z2, right, leaf, mode, path + "/z2", keep)
        node.coupling = coupling
        node.lower = X21
        return node

    inv11 = materialize(_invert(X11, left, leaf, mode, path + "/x11", keep))
    inv22 = materialize(_invert(X22, right, leaf, mode, path + "/x22", keep))
    p = _mul(inv11, X12)  # X11^-1 X12
    q = _mul(X21, inv11)  # X21 X11^-1
    z1 = _dense(X11) - _mul(X12, _mul(inv22, X21))
    z2 = _dense(X22) - _mul(X21, p)
    node.z1_inv = _invert(z1, left, leaf, mode, path + "/z1", keep)
    node.z2_inv = _invert(z2, right, leaf, mode, path + "/z2", keep)
    inv_z2 = materialize(node.z2_inv)
    node.top_right = -p @ inv_z2
    node.bottom_left = -inv_z2 @ q
    return node


def block_invert(
    X,
    part: BlockPartition,
    leaf="direct",
    mode: str = "explicit",
    residual: str = "auto",
    keep_operands: bool = False,
) -> BlockInverse:
    """Invert ``X`` over the tessellation ``part``.

    ``leaf`` is either ``"direct"`` or an :class:`RsvdConfig` whose
    ``power_iters`` and ``rng`` are reused for every leaf (rank is forced to
    the full leaf width). ``residual`` selects how ``||X Xinv - I||_F`` is
    recorded: ``"exact"``, ``"probe"`` (8 Gaussian probe vectors), ``"none"``,
    or ``"auto"`` (exact up to dimension 1024).
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if leaf != "direct" and not isinstance(leaf, RsvdConfig):
        raise InvalidInputError("leaf must be 'direct' or an RsvdConfig")
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"block_invert needs a square matrix, got {X.shape}")
    if X.shape[0] != part.dim:
        raise ShapeError(f"partition dimension {part.dim} does not match matrix {X.shape}")
    check_finite(X)
    if not sp.issparse(X):
        X = np.asarray(X, dtype=np.float64)

    inv = _invert(X, part, leaf, mode, "root", keep_operands)

    if residual == "auto":
        residual = "exact" if part.dim <= EXACT_RESIDUAL_MAX_DIM else "probe"
    if residual == "exact":
        full = materialize(inv)
        inv.residual = float(np.linalg.norm(_mul(X, full) - np.eye(part.dim)))
    elif residual == "probe":
        probes = RngStream(0).standard_normal((part.dim, 8))
        r = _mul(X, apply_block_inverse(inv, probes)) - probes
        inv.residual = float(np.linalg.norm(r) / np.sqrt(8))
    elif residual != "none":
        raise InvalidInputError(f"unknown residual mode {residual!r}")
    inv.residual_kind = residual
    return inv


def apply_block_inverse(inv: BlockInverse, y) -> np.ndarray:
    """``Xinv @ y`` without assembling the full inverse; ``y`` may be 1-D or 2-D."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != inv.dim:
        raise ShapeError(f"vector length {y.shape[0]} does not match dimension {inv.dim}")
    if inv.is_leaf:
        return inv.leaf_inverse @ y
    s = inv.partition.split_index
    y1, y2 = y[:s], y[s:]
    if inv.mode == "factored":
        t = apply_block_inverse(inv.x11_inv, y1)
        u = apply_block_inverse(inv.z2_inv, y2 - _mul(inv.lower, t))
        return np.concatenate([t - inv.coupling @ u, u])
    top = apply_block_inverse(inv.z1_inv, y1) + inv.top_right @ y2
    bottom = inv.bottom_left @ y1 + apply_block_inverse(inv.z2_inv, y2)
    return np.concatenate([top, bottom])


def materialize(inv: BlockInverse) -> np.ndarray:
    if inv.is_leaf:
        return inv.leaf_inverse
    if inv.mode == "factored":
        return apply_block_inverse(inv, np.eye(inv.dim))
    tl, tr, bl, br = inv.blocks()
    return np.block([[tl, tr], [bl, br]])
