"""Shared fixtures: reference schemas, tiny graphs, and a planted dataset."""

import numpy as np
import pytest

from hinmlp import (
    EdgeType,
    Hin,
    NodeType,
    SchemaGraph,
    SparseAdjacency,
    default_synth_config,
    generate_planted_hin,
    load_dataset,
)


def make_schema(types, edges, target):
    """types: [(name, count, dim)], edges: [(name, src, dst)]."""
    return SchemaGraph(
        tuple(NodeType(n, c, d) for n, c, d in types),
        tuple(EdgeType(n, s, d) for n, s, d in edges),
        target,
    )


@pytest.fixture
def citation_schema():
    # author / paper / term / venue, both edge directions stored
    return make_schema(
        [("A", 100, 8), ("P", 200, 8), ("T", 50, 8), ("V", 20, 8)],
        [("ap", "A", "P"), ("pa", "P", "A"),
         ("pt", "P", "T"), ("tp", "T", "P"),
         ("pv", "P", "V"), ("vp", "V", "P")],
        "A",
    )


@pytest.fixture
def movie_schema():
    # movie / director / actor / keyword, one stored direction per pair
    return make_schema(
        [("M", 100, 8), ("D", 30, 8), ("A", 60, 8), ("K", 40, 8)],
        [("md", "M", "D"), ("ma", "M", "A"), ("mk", "M", "K")],
        "M",
    )


@pytest.fixture
def academic_schema():
    # paper / author / institution / field with a paper-paper citation loop
    return make_schema(
        [("P", 100, 8), ("A", 50, 8), ("I", 10, 8), ("F", 30, 8)],
        [("writes", "A", "P"), ("affiliated", "A", "I"),
         ("cites", "P", "P"), ("topic", "P", "F")],
        "P",
    )


@pytest.fixture
def ambiguous_schema():
    # two stored edge types realise the same P->P hop
    return make_schema(
        [("P", 10, 4)],
        [("cite", "P", "P"), ("ref", "P", "P")],
        "P",
    )


@pytest.fixture
def tiny_hin():
    """One author linked to two papers with orthogonal unit features."""
    schema = make_schema(
        [("A", 1, 2), ("P", 2, 2)], [("ap", "A", "P")], "A"
    )
    adj = {"ap": SparseAdjacency.from_edges(1, 2, [0, 0], [0, 1])}
    feats = {
        "A": np.array([[3.0, 4.0]]),
        "P": np.array([[1.0, 0.0], [0.0, 1.0]]),
    }
    labels = np.array([0], dtype=np.int64)
    splits = np.array([0], dtype=np.int8)
    return Hin(schema, adj, feats, labels, splits).validate()


def random_hin(seed, max_nodes=50):
    """Small random graph for oracle comparisons (2-3 types, <= max_nodes)."""
    g = np.random.default_rng(seed)
    n_types = int(g.integers(2, 4))
    names = ["A", "B", "C"][:n_types]
    counts = {}
    budget = max_nodes
    for i, n in enumerate(names):
        remaining = n_types - i
        c = int(g.integers(2, max(3, budget - 2 * (remaining - 1) + 1)))
        counts[n] = c
        budget -= c
    dims = {n: int(g.integers(1, 5)) for n in names}
    types = [(n, counts[n], dims[n]) for n in names]

    edges = []
    pairs = [(s, d) for s in names for d in names]
    g.shuffle(pairs)
    n_edge_types = int(g.integers(1, 5))
    for i, (s, d) in enumerate(pairs[:n_edge_types]):
        edges.append((f"e{i}", s, d))
    # make sure the target type touches at least one edge type
    if not any("A" in (s, d) for _, s, d in edges):
        edges.append((f"e{len(edges)}", "A", names[-1]))
    schema = make_schema(types, edges, "A")

    adjacency = {}
    for ename, s, d in edges:
        n_s, n_d = counts[s], counts[d]
        density = g.uniform(0.1, 0.5)
        mask = g.random((n_s, n_d)) < density
        srcs, dsts = np.nonzero(mask)
        adjacency[ename] = SparseAdjacency.from_edges(n_s, n_d, srcs, dsts)

    feats = {n: g.standard_normal((counts[n], dims[n])) for n in names}
    n_t = counts["A"]
    labels = g.integers(0, 2, size=n_t).astype(np.int64)
    splits = g.integers(0, 3, size=n_t).astype(np.int8)
    return Hin(schema, adjacency, feats, labels, splits).validate()


@pytest.fixture(scope="session")
def planted_dir(tmp_path_factory):
    """Small planted-signal dataset shared by the slower integration tests."""
    d = tmp_path_factory.mktemp("planted") / "ds"
    cfg = default_synth_config(n_targets=600, seed=11)
    generate_planted_hin(cfg, d)
    return d


@pytest.fixture(scope="session")
def planted_hin(planted_dir):
    return load_dataset(planted_dir)
