import numpy as np
import pytest
import scipy.sparse as sp

from hyperrank.blockinv import (
    apply_block_inverse,
    block_invert,
    materialize,
    tessellate,
)
from hyperrank.errors import InvalidInputError, ShapeError, SingularMatrixError
from hyperrank.linalg import RngStream
from hyperrank.rsvd import RsvdConfig

from conftest import gauss_jordan_inverse, well_conditioned

MODES = ("explicit", "factored")


def rsvd_leaf(seed=0):
    return RsvdConfig(target_rank=1, oversample=0, power_iters=2, rng=RngStream(seed))


def test_tessellate_examples():
    assert tessellate(100, 100).is_leaf
    part = tessellate(200, 50)
    assert [leaf.dim for leaf in part.leaves()] == [50, 50, 50, 50]
    big = tessellate(5867, 500)
    dims = [leaf.dim for leaf in big.leaves()]
    assert max(dims) <= 500 and sum(dims) == 5867


@pytest.mark.parametrize("dim,threshold", [(1, 1), (7, 2), (101, 10), (999, 50), (5867, 500)])
def test_tessellate_invariants(dim, threshold):
    part = tessellate(dim, threshold)
    leaves = part.leaves()
    assert leaves[0].start == 0 and leaves[-1].stop == dim
    for a, b in zip(leaves, leaves[1:]):
        assert a.stop == b.start
    assert all(leaf.dim <= threshold for leaf in leaves)
    small = [leaf for leaf in leaves if leaf.dim <= threshold / 2]
    assert len(small) <= 1 or dim <= threshold

    def check(node):
        if node.is_leaf:
            return
        assert node.dim > threshold and 1 <= node.split_index < node.dim
        for child in node.children:
            check(child)

    check(part)


def test_tessellate_boundaries():
    part = tessellate(100, 40, boundaries=[30, 70])
    assert part.split_index == 30 or part.split_index == 70
    with pytest.raises(InvalidInputError):
        tessellate(0, 5)


@pytest.mark.parametrize("mode", MODES)
def test_two_by_two_closed_form(mode):
    X = np.array([[2.0, 1.0], [1.0, 2.0]])
    inv = block_invert(X, tessellate(2, 1), mode=mode)
    assert np.allclose(materialize(inv), [[2 / 3, -1 / 3], [-1 / 3, 2 / 3]], atol=1e-15)
    assert np.allclose(apply_block_inverse(inv, [1.0, 1.0]), [1 / 3, 1 / 3], atol=1e-15)


@pytest.mark.parametrize("mode", MODES)
def test_identity(mode):
    inv = block_invert(np.eye(9), tessellate(9, 2), leaf=rsvd_leaf(), mode=mode)
    assert np.allclose(materialize(inv), np.eye(9), atol=1e-14)
    assert np.allclose(apply_block_inverse(inv, [1.0, 2, 3, 4, 5, 6, 7, 8, 9]), np.arange(1, 10))


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("leaf", ["direct", "rsvd"])
def test_random_200_against_gauss_jordan(rng, mode, leaf):
    X = well_conditioned(rng, 200)
    inv = block_invert(X, tessellate(200, 50), leaf=rsvd_leaf() if leaf == "rsvd" else "direct", mode=mode)
    full = materialize(inv)
    assert np.max(np.abs(full - gauss_jordan_inverse(X))) <= 1e-6
    assert inv.residual_kind == "exact"
    assert inv.residual <= 1e-6 * np.sqrt(200)
    y = rng.standard_normal(200)
    assert np.linalg.norm(apply_block_inverse(inv, y) - full @ y) <= 1e-12 * np.linalg.norm(full @ y)
    Y = rng.standard_normal((200, 3))
    assert np.allclose(apply_block_inverse(inv, Y), full @ Y, atol=1e-12)


def test_explicit_node_blocks_follow_schur_formulas(rng):
    X = well_conditioned(rng, 120)
    inv = block_invert(X, tessellate(120, 30), leaf=rsvd_leaf())
    s = inv.partition.split_index
    X11, X12, X21, X22 = X[:s, :s], X[:s, s:], X[s:, :s], X[s:, s:]
    i11, i22 = np.linalg.inv(X11), np.linalg.inv(X22)
    Z1 = X11 - X12 @ i22 @ X21
    Z2 = X22 - X21 @ i11 @ X12
    tl, tr, bl, br = inv.blocks()
    assert np.allclose(tl, np.linalg.inv(Z1), atol=1e-10)
    assert np.allclose(br, np.linalg.inv(Z2), atol=1e-10)
    assert np.allclose(tr, -i11 @ X12 @ np.linalg.inv(Z2), atol=1e-10)
    assert np.allclose(bl, -np.linalg.inv(Z2) @ X21 @ i11, atol=1e-10)
    assert {n.path for n in inv.nodes()} >= {"root", "root/z1", "root/z2"}


@pytest.mark.parametrize("mode", MODES)
def test_every_node_inverts_its_operand(rng, mode):
    for dim in (60, 150, 400):
        X = well_conditioned(rng, dim)
        inv = block_invert(X, tessellate(dim, 50), leaf=rsvd_leaf(), mode=mode, keep_operands=True)
        for node in inv.nodes():
            op = node.operand
            err = np.linalg.norm(op @ materialize(node) - np.eye(node.dim))
            assert err <= 1e-8 * np.sqrt(node.dim), node.path


def test_explicit_leaf_work_grows_faster_than_factored(rng, monkeypatch):
    import hyperrank.blockinv as bi

    calls = []
    real = bi._invert_leaf

    def counting(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    monkeypatch.setattr(bi, "_invert_leaf", counting)
    X = well_conditioned(rng, 400)
    part = tessellate(400, 50)
    factored = block_invert(X, part, mode="factored", residual="none")
    assert len(calls) == factored.leaf_count() == len(part.leaves()) == 8
    calls.clear()
    block_invert(X, part, mode="explicit", residual="none")
    assert len(calls) == 4**3


def test_sparse_input(rng):
    A = sp.random(150, 150, density=0.05, random_state=3, format="csr")
    X = sp.identity(150, format="csr") * 4.0 + A
    inv = block_invert(X, tessellate(150, 40), leaf=rsvd_leaf(), mode="factored")
    assert np.allclose(materialize(inv), gauss_jordan_inverse(X.toarray()), atol=1e-10)


def test_probe_residual(rng):
    X = well_conditioned(rng, 100)
    inv = block_invert(X, tessellate(100, 30), residual="probe")
    assert inv.residual_kind == "probe" and inv.residual < 1e-10


def test_singular_block_names_path():
    X = np.eye(4)
    X[3, 3] = 0.0
    with pytest.raises(SingularMatrixError) as info:
        block_invert(X, tessellate(4, 2), leaf=rsvd_leaf(), mode="factored")
    assert info.value.path.startswith("root/")
    with pytest.raises(SingularMatrixError) as info:
        block_invert(X, tessellate(4, 2), mode="explicit")
    assert info.value.path is not None


def test_argument_errors(rng):
    X = well_conditioned(rng, 10)
    with pytest.raises(ShapeError):
        block_invert(X, tessellate(9, 3))
    with pytest.raises(InvalidInputError):
        block_invert(X, tessellate(10, 3), mode="diagonal")
    with pytest.raises(InvalidInputError):
        block_invert(X, tessellate(10, 3), leaf="lu")
    inv = block_invert(X, tessellate(10, 3))
    with pytest.raises(ShapeError):
        apply_block_inverse(inv, np.ones(9))
