"""Empirical cost-versus-hop benchmark.

Times the search and training stages at several maximum hops with the
sampling budget fixed, separating the one-shot propagation step from the
per-epoch figures, so the constant-cost behaviour of sampled search can
be compared against a full-candidate-set control.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .aggregate import PathFeatureSet, precompute_all
from .hin import Hin
from .metapath import enumerate_metapaths
from .search import SearchConfig, SuperNet, derive_top_m, train_supernet
from .target import TargetConfig, TargetNet, train_target


@dataclass
class BenchRow:
    stage: str
    max_hop: int
    num_candidates: int
    M: int
    repeats: int
    precompute_seconds: float
    epoch_seconds_mean: float
    epoch_seconds_std: float
    matrix_bytes: int


def _feature_bytes(feats: PathFeatureSet) -> int:
    return int(sum(x.nbytes for x in feats.matrices))


def _param_bytes(params: dict[str, np.ndarray]) -> int:
    return int(sum(v.nbytes for v in params.values()))


def bench_epoch_time_vs_hop(
    h: Hin,
    hops: list[int],
    M: int,
    repeats: int = 3,
    epochs: int = 10,
    hidden: int = 64,
    seed: int = 0,
    full_set_control: bool = False,
) -> list[BenchRow]:
    """Per-epoch wall time of search and target training at each max hop.

    A fixed epoch count is used (no early stop) so timings are comparable.
    With full_set_control the sampling budget is the whole candidate set.
    """
    if not hops:
        raise ValueError("hop list is empty")
    rows = []
    labels = h.labels
    tr, va, te = (h.split_indices(s) for s in ("train", "val", "test"))
    num_classes = h.num_classes

    for hop in hops:
        paths = enumerate_metapaths(h.schema, hop)
        t0 = time.perf_counter()
        feats = precompute_all(h, paths)
        precompute_s = time.perf_counter() - t0
        K = len(paths)
        m_eff = K if full_set_control else min(M, K)

        search_times, train_times = [], []
        search_bytes = train_bytes = 0
        for r in range(repeats):
            cfg = SearchConfig(
                M=m_eff, epochs=epochs, hidden=hidden, seed=seed + r, dropout=0.0
            )
            net = SuperNet(feats, num_classes, cfg)
            t0 = time.perf_counter()
            report = train_supernet(net, labels, tr, va, h.multi_label)
            search_times.append((time.perf_counter() - t0) / epochs)
            search_bytes = _feature_bytes(feats) + _param_bytes(
                net.omega_params(sorted(net.projectors))
            )

            top = derive_top_m(report, m_eff)
            sub = feats.subset([paths.index(p) for p in top])
            tcfg = TargetConfig(
                hidden=hidden, patience=epochs, max_epochs=epochs, seed=seed + r, dropout=0.0
            )
            tnet = TargetNet(sub, num_classes, tcfg)
            t0 = time.perf_counter()
            train_target(tnet, labels, tr, va, te, h.multi_label)
            train_times.append((time.perf_counter() - t0) / epochs)
            train_bytes = _feature_bytes(sub) + _param_bytes(tnet.params())

        rows.append(
            BenchRow("search", hop, K, m_eff, repeats, precompute_s,
                     float(np.mean(search_times)), float(np.std(search_times)), search_bytes)
        )
        rows.append(
            BenchRow("train", hop, K, m_eff, repeats, precompute_s,
                     float(np.mean(train_times)), float(np.std(train_times)), train_bytes)
        )
    return rows


def write_bench_csv(rows: list[BenchRow], out_path) -> None:
    with open(out_path, "w", encoding="utf-8") as f:
        f.write(
            "stage,max_hop,num_candidates,M,repeats,"
            "precompute_seconds,epoch_seconds_mean,epoch_seconds_std,matrix_bytes\n"
        )
        for r in rows:
            f.write(
                f"{r.stage},{r.max_hop},{r.num_candidates},{r.M},{r.repeats},"
                f"{r.precompute_seconds:.6f},{r.epoch_seconds_mean:.6f},"
                f"{r.epoch_seconds_std:.6f},{r.matrix_bytes}\n"
            )
