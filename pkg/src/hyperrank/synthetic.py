"""Planted-cluster hypergraph generator.

Images, users, groups, geo-tags and tags are each split into ``clusters``
balanced clusters. Hyperedges:

* ownership ``{image, owner}`` -- one per image;
* tagging ``{image} + tags`` -- one per training image (test images have none);
* membership ``{group} + users`` -- one per group;
* location ``{geo} + images at geo + their owners`` -- one per geo-tag.

A candidate joins a multi-member hyperedge with probability ``p_in`` when it
shares the anchor's cluster and ``p_out`` otherwise. Single-valued relations
(owner, location) pick a same-cluster candidate with odds ``p_in : p_out``.
The ground-truth tags of a test image are all tags of its cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError
from .hypergraph import VERTEX_TYPES, HypergraphModel, Segment
from .linalg import RngStream

REFERENCE_COUNTS = {"Im": 1292, "U": 440, "Gr": 1644, "Geo": 125, "Ta": 2366}
DESK_COUNTS = {"Im": 120, "U": 40, "Gr": 80, "Geo": 12, "Ta": 200}
P_IN = 0.8
P_OUT = 0.05


@dataclass
class SyntheticTruth:
    test_images: list[int]
    truth: dict[int, list[int]]  # test image vertex -> ground-truth tag vertices
    clusters: dict[str, np.ndarray] = field(default_factory=dict)  # per type, local index -> cluster

    def items(self):
        return [(i, self.truth[i]) for i in self.test_images]


def counts_for_size(m: int) -> dict[str, int]:
    """reference-scale proportions scaled to exactly ``m`` vertices."""
    total = sum(REFERENCE_COUNTS.values())
    if m < len(REFERENCE_COUNTS):
        raise InvalidInputError(f"need at least {len(REFERENCE_COUNTS)} vertices")
    counts = {t: max(1, int(round(c * m / total))) for t, c in REFERENCE_COUNTS.items()}
    counts["Ta"] += m - sum(counts.values())
    return counts


def _balanced_clusters(count, clusters, gen):
    return gen.permutation(np.arange(count) % clusters)


def _pick(candidates_cluster, anchor_cluster, p_in, p_out, gen):
    """One candidate: same-cluster with odds ``p_in : p_out``, uniform within the side."""
    same = np.flatnonzero(candidates_cluster == anchor_cluster)
    other = np.flatnonzero(candidates_cluster != anchor_cluster)
    inside = gen.random() < p_in / (p_in + p_out)
    pool = same if (inside and same.size) or not other.size else other
    return int(gen.choice(pool))


def _bernoulli_members(candidates_cluster, anchor_cluster, p_in, p_out, gen):
    prob = np.where(candidates_cluster == anchor_cluster, p_in, p_out)
    return np.flatnonzero(gen.random(len(prob)) < prob)


def generate_synthetic(
    counts: dict[str, int],
    clusters: int,
    rng: RngStream,
    p_in: float = P_IN,
    p_out: float = P_OUT,
    test_fraction: float = 0.1,
) -> tuple[HypergraphModel, SyntheticTruth]:
    counts = {t: int(counts[t]) for t in VERTEX_TYPES}
    if clusters < 1:
        raise InvalidInputError("clusters must be >= 1")
    if any(c < 1 for c in counts.values()):
        raise InvalidInputError(f"every vertex type needs count >= 1, got {counts}")
    if counts["Ta"] < clusters:
        raise InvalidInputError(f"fewer tags ({counts['Ta']}) than clusters ({clusters})")
    if counts["Im"] < 2:
        raise InvalidInputError("need at least two images (one training, one test)")
    gen = rng.generator

    offsets, pos = {}, 0
    for t in VERTEX_TYPES:
        offsets[t] = pos
        pos += counts[t]
    m = pos
    cl = {t: _balanced_clusters(counts[t], clusters, gen) for t in VERTEX_TYPES}

    n_test = min(counts["Im"] - 1, max(1, int(round(test_fraction * counts["Im"]))))
    test_local = np.sort(gen.choice(counts["Im"], size=n_test, replace=False))
    is_test = np.zeros(counts["Im"], dtype=bool)
    is_test[test_local] = True

    edges: list[list[int]] = []
    owner = np.empty(counts["Im"], dtype=int)
    for i in range(counts["Im"]):
        owner[i] = _pick(cl["U"], cl["Im"][i], p_in, p_out, gen)
        edges.append([offsets["Im"] + i, offsets["U"] + owner[i]])

    tag_edge_of = {}
    for i in np.flatnonzero(~is_test):
        tags = _bernoulli_members(cl["Ta"], cl["Im"][i], p_in, p_out, gen)
        if tags.size == 0:
            same = np.flatnonzero(cl["Ta"] == cl["Im"][i])
            tags = np.array([gen.choice(same)])
        tag_edge_of[int(i)] = len(edges)
        edges.append([offsets["Im"] + i] + [offsets["Ta"] + t for t in tags])

    for g in range(counts["Gr"]):
        users = _bernoulli_members(cl["U"], cl["Gr"][g], p_in, p_out, gen)
        edges.append([offsets["Gr"] + g] + [offsets["U"] + u for u in users])

    location = np.array(
        [_pick(cl["Geo"], cl["Im"][i], p_in, p_out, gen) for i in range(counts["Im"])]
    )
    for q in range(counts["Geo"]):
        imgs = np.flatnonzero(location == q)
        users = np.unique(owner[imgs])
        edges.append(
            [offsets["Geo"] + q]
            + [offsets["Im"] + i for i in imgs]
            + [offsets["U"] + u for u in users]
        )

    # every vertex needs an incidence: stray tags join a same-cluster tagging edge
    covered = np.zeros(m, dtype=bool)
    for e in edges:
        covered[e] = True
    train = np.flatnonzero(~is_test)
    for t in np.flatnonzero(~covered[offsets["Ta"] : offsets["Ta"] + counts["Ta"]]):
        hosts = train[cl["Im"][train] == cl["Ta"][t]]
        host = int(gen.choice(hosts if hosts.size else train))
        edges[tag_edge_of[host]].append(offsets["Ta"] + int(t))
    for u in np.flatnonzero(~covered[offsets["U"] : offsets["U"] + counts["U"]]):
        hosts = np.flatnonzero(cl["Gr"] == cl["U"][u])
        g = int(gen.choice(hosts if hosts.size else np.arange(counts["Gr"])))
        edges[counts["Im"] + len(tag_edge_of) + g].append(offsets["U"] + int(u))

    rows = np.concatenate([np.asarray(e, dtype=int) for e in edges])
    cols = np.concatenate([np.full(len(e), j) for j, e in enumerate(edges)])
    H = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(m, len(edges)))
    H.data[:] = 1.0  # collapse any duplicate coordinates
    segments = tuple(Segment(t, offsets[t], counts[t]) for t in VERTEX_TYPES)
    hg = HypergraphModel(H, segments)

    truth = {}
    for i in test_local:
        tags = np.flatnonzero(cl["Ta"] == cl["Im"][i]) + offsets["Ta"]
        truth[offsets["Im"] + int(i)] = [int(t) for t in tags]
    test_images = [offsets["Im"] + int(i) for i in test_local]
    return hg, SyntheticTruth(test_images, truth, cl)


def write_truth(path, truth: SyntheticTruth) -> None:
    with open(path, "w") as fh:
        for image in truth.test_images:
            fh.write(f"{image}\t{','.join(str(t) for t in truth.truth[image])}\n")


def read_truth(path) -> SyntheticTruth:
    test_images, truth = [], {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InvalidInputError(f"{path}:{lineno}: expected 'image<TAB>tag,tag,...'")
        image = int(parts[0])
        tags = [int(t) for t in parts[1].split(",") if t]
        test_images.append(image)
        truth[image] = tags
    return SyntheticTruth(test_images, truth)
