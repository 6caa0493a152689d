import numpy as np
import pytest
import scipy.sparse as sp

from hyperrank.hypergraph import HypergraphModel, Segment


def gauss_jordan_inverse(M):
    """Textbook Gauss-Jordan elimination with partial pivoting, row by row."""
    M = np.array(M, dtype=np.float64)
    n = M.shape[0]
    aug = np.hstack([M, np.eye(n)])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if aug[pivot, col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        for row in range(n):
            if row != col and aug[row, col] != 0.0:
                aug[row] -= aug[row, col] * aug[col]
    return aug[:, n:]


def gauss_solve(M, b):
    return gauss_jordan_inverse(M) @ np.asarray(b, dtype=np.float64)


def well_conditioned(rng, dim, spread=1.0):
    """Diagonally dominant, nonsymmetric matrix with condition number O(10)."""
    M = rng.standard_normal((dim, dim)) * spread / np.sqrt(dim)
    M[np.diag_indices(dim)] += 3.0
    return M


def random_spd(rng, dim, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.geomspace(1.0, cond, dim)
    return (Q * eig) @ Q.T


def toy_model(edges, counts):
    """Incidence from a list of vertex lists; ``counts`` maps type -> length in order."""
    m = sum(counts.values())
    rows = [v for e in edges for v in e]
    cols = [j for j, e in enumerate(edges) for _ in e]
    H = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, len(edges)))
    segments, pos = [], 0
    for t, c in counts.items():
        segments.append(Segment(t, pos, c))
        pos += c
    return HypergraphModel(H, tuple(segments))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def six_vertex():
    """One image (0), its owner (1), a group (2), a geo-tag (3) and two tags (4, 5)."""
    edges = [[0, 1], [0, 4, 5], [2, 1], [3, 0, 1]]
    return toy_model(edges, {"Im": 1, "U": 1, "Gr": 1, "Geo": 1, "Ta": 2})


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the summary."""
    lines = request.config._acceptance_lines

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
