"""Feature propagation against a dense oracle, memoization, and the disk cache."""

import numpy as np
import pytest

from hinmlp import compute_path_features, enumerate_metapaths, parse_path, precompute_all
from hinmlp.aggregate import Aggregator, CacheError, dataset_hash
from hinmlp.hin import read_hinf

from conftest import random_hin


def dense_path_features(h, p):
    """Independent dense chain product, right to left."""
    x = np.asarray(h.features[p.end_type], dtype=np.float64)
    for step in reversed(p.steps):
        a = h.adjacency[step.edge_type].to_scipy().toarray()
        if step.transpose:
            a = a.T
        sums = a.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        x = (a / sums) @ x
    return x


def test_single_author_two_papers_average(tiny_hin):
    p = parse_path("AP", tiny_hin.schema)
    x = compute_path_features(tiny_hin, p)
    assert np.allclose(x, [[0.5, 0.5]])


def test_hop0_returns_target_features(tiny_hin):
    p = parse_path("A", tiny_hin.schema)
    assert np.array_equal(compute_path_features(tiny_hin, p), tiny_hin.features["A"])


def test_matches_dense_oracle_on_random_graphs():
    for seed in range(8):
        h = random_hin(seed)
        for p in enumerate_metapaths(h.schema, 3):
            if p.end_type not in h.features:
                continue
            got = compute_path_features(h, p)
            want = dense_path_features(h, p)
            assert np.allclose(got, want, atol=1e-10), p.string(h.schema)


def test_empty_rows_propagate_zeros(tiny_hin):
    # author 0 unlinked: a one-paper graph where paper 1 has no authors
    import dataclasses

    from hinmlp import SparseAdjacency

    adj = {"ap": SparseAdjacency.from_edges(1, 2, [], [])}
    h = dataclasses.replace(tiny_hin, adjacency=adj)
    p = parse_path("AP", h.schema)
    assert np.allclose(compute_path_features(h, p), [[0.0, 0.0]])


def test_missing_end_features_raise(tiny_hin):
    import dataclasses

    h = dataclasses.replace(tiny_hin, features={"A": tiny_hin.features["A"]})
    with pytest.raises(ValueError, match="synthesize"):
        compute_path_features(h, parse_path("AP", h.schema))


def test_suffix_memoization_reuses_partial_products():
    h = random_hin(1)
    schema = h.schema
    # only keep graphs where A-A.. self structure exists via two-type loop
    paths = enumerate_metapaths(schema, 4)
    agg = Aggregator(h)
    for p in paths:
        if p.end_type in h.features:
            agg.path_features(p)
    first = agg.products_performed
    for p in paths:
        if p.end_type in h.features:
            agg.path_features(p)
    # everything cached: no extra products on replay
    assert agg.products_performed == first
    # shared suffixes mean fewer products than total hops
    naive = sum(p.hop for p in paths if p.end_type in h.features)
    assert first <= naive


def test_dataset_hash_tracks_content(tiny_hin):
    import dataclasses

    h1 = tiny_hin
    assert dataset_hash(h1) == dataset_hash(h1)
    feats = dict(h1.features)
    feats["P"] = feats["P"] + 1.0
    h2 = dataclasses.replace(h1, features=feats)
    assert dataset_hash(h1) != dataset_hash(h2)


def test_cache_cold_and_warm_runs_are_bit_identical(tmp_path):
    h = random_hin(2)
    paths = [p for p in enumerate_metapaths(h.schema, 3) if p.end_type in h.features]
    cold = precompute_all(h, paths, tmp_path)
    warm = precompute_all(h, paths, tmp_path)
    for a, b in zip(cold.matrices, warm.matrices):
        assert a.tobytes() == b.tobytes()
    d = tmp_path / cold.provenance
    assert (d / "manifest.tsv").exists()
    # cold results already went through the single-precision file format
    for p, m in zip(cold.paths, cold.matrices):
        assert np.array_equal(m, read_hinf(d / f"{p.string(h.schema)}.hinf"))


def test_cache_corruption_is_reported(tmp_path):
    h = random_hin(3)
    paths = [p for p in enumerate_metapaths(h.schema, 2) if p.end_type in h.features]
    feats = precompute_all(h, paths, tmp_path)
    victim = tmp_path / feats.provenance / f"{paths[-1].string(h.schema)}.hinf"
    raw = bytearray(victim.read_bytes())
    raw[-1] ^= 0xFF
    victim.write_bytes(bytes(raw))
    with pytest.raises(CacheError, match="stale"):
        precompute_all(h, paths, tmp_path)


def test_cacheless_precompute_matches_cached(tmp_path):
    h = random_hin(4)
    paths = [p for p in enumerate_metapaths(h.schema, 2) if p.end_type in h.features]
    direct = precompute_all(h, paths)
    cached = precompute_all(h, paths, tmp_path)
    for a, b in zip(direct.matrices, cached.matrices):
        # the cache quantizes to f32 on disk
        assert np.allclose(a, b, atol=1e-6)


def test_subset_and_by_string(tiny_hin):
    paths = enumerate_metapaths(tiny_hin.schema, 1)
    feats = precompute_all(tiny_hin, paths)
    sub = feats.subset([1])
    assert len(sub) == 1 and sub.paths[0].string(tiny_hin.schema) == "AP"
    assert set(feats.by_string(tiny_hin.schema)) == {"A", "AP"}
