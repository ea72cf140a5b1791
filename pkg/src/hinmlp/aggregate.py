"""One-shot feature propagation along meta-paths.

Each meta-path's feature matrix is the chain of row-normalized adjacency
matrices applied to the end-type features, evaluated right-to-left so
every intermediate stays dense with the end-type feature width.  Partial
(suffix) products are memoized across paths, and results are cached on
disk in the binary feature format, keyed by a content hash of the graph.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .hin import Hin, SparseAdjacency, read_hinf, reverse_adjacency, row_normalize, write_hinf
from .metapath import MetaPath, PathStep


class CacheError(Exception):
    """On-disk cache does not match the graph it claims to describe."""


def dataset_hash(h: Hin) -> str:
    """Content hash of schema, adjacency, and features (normalization-invariant inputs)."""
    m = hashlib.sha256()
    m.update(repr(h.schema).encode())
    for name in sorted(h.adjacency):
        a = h.adjacency[name]
        m.update(name.encode())
        for arr in (a.indptr, a.indices, a.values):
            m.update(np.ascontiguousarray(arr).tobytes())
    for name in sorted(h.features):
        m.update(name.encode())
        m.update(np.ascontiguousarray(h.features[name]).tobytes())
    m.update(b"row-normalized")
    return m.hexdigest()[:16]


@dataclass
class PathFeatureSet:
    paths: list[MetaPath]
    matrices: list[np.ndarray]
    provenance: str

    def __post_init__(self):
        if len(self.paths) != len(self.matrices):
            raise ValueError("paths/matrices length mismatch")

    def __len__(self):
        return len(self.paths)

    def by_string(self, schema) -> dict[str, np.ndarray]:
        return {p.string(schema): x for p, x in zip(self.paths, self.matrices)}

    def subset(self, indices) -> "PathFeatureSet":
        return PathFeatureSet(
            [self.paths[i] for i in indices],
            [self.matrices[i] for i in indices],
            self.provenance,
        )


@dataclass
class Aggregator:
    """Propagation engine over one immutable graph, with suffix memoization."""

    hin: Hin
    products_performed: int = 0
    _norm_cache: dict = field(default_factory=dict)
    _suffix_cache: dict = field(default_factory=dict)

    def normalized(self, step: PathStep) -> SparseAdjacency:
        key = (step.edge_type, step.transpose)
        if key not in self._norm_cache:
            a = self.hin.adjacency[step.edge_type]
            if step.transpose:
                a = reverse_adjacency(a)
            self._norm_cache[key] = row_normalize(a)
        return self._norm_cache[key]

    def _end_features(self, p: MetaPath) -> np.ndarray:
        feats = self.hin.features.get(p.end_type)
        if feats is None:
            raise ValueError(
                f"no features for end type {p.end_type!r}; synthesize them first"
            )
        return feats

    def path_features(self, p: MetaPath) -> np.ndarray:
        """Feature matrix of one meta-path (target-count rows)."""
        x = np.asarray(self._end_features(p), dtype=np.float64)
        # suffix j covers steps[j:] applied to the end features
        for j in range(p.hop - 1, -1, -1):
            key = (p.steps[j:], p.end_type)
            if key not in self._suffix_cache:
                m = self.normalized(p.steps[j]).to_scipy()
                self._suffix_cache[key] = m @ x
                self.products_performed += 1
            x = self._suffix_cache[key]
        return x


def _atomic_write_hinf(path, x: np.ndarray) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
    os.close(fd)
    try:
        write_hinf(tmp, x)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _file_hash(path) -> str:
    m = hashlib.sha256()
    with open(path, "rb") as f:
        m.update(f.read())
    return m.hexdigest()[:16]


def precompute_all(h: Hin, paths: list[MetaPath], cache_dir=None) -> PathFeatureSet:
    """Compute (or reload) the feature matrix of every path.

    With a cache directory, matrices live under <cache_dir>/<dataset_hash>/
    and are reloaded when the manifest's content hashes check out; a hash
    mismatch is reported as CacheError rather than silently recomputed.
    """
    from pathlib import Path

    prov = dataset_hash(h)
    agg = Aggregator(h)
    strings = [p.string(h.schema) for p in paths]

    if cache_dir is None:
        return PathFeatureSet(list(paths), [agg.path_features(p) for p in paths], prov)

    d = Path(cache_dir) / prov
    d.mkdir(parents=True, exist_ok=True)
    manifest_path = d / "manifest.tsv"
    manifest = {}
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as f:
            for line in f:
                parts = line.rstrip("\n").split("\t")
                if len(parts) == 4:
                    manifest[parts[0]] = (int(parts[1]), int(parts[2]), parts[3])

    matrices = []
    for p, s in zip(paths, strings):
        fpath = d / f"{s}.hinf"
        if s in manifest and fpath.exists():
            if _file_hash(fpath) != manifest[s][2]:
                raise CacheError(f"stale cache entry for path {s!r} in {d}")
            # disk is single precision; promote for downstream accumulation
            matrices.append(read_hinf(fpath))
        else:
            x = agg.path_features(p)
            _atomic_write_hinf(fpath, x)
            manifest[s] = (x.shape[0], x.shape[1], _file_hash(fpath))
            matrices.append(read_hinf(fpath))

    with open(manifest_path, "w", encoding="utf-8") as f:
        for s in sorted(manifest):
            rows, cols, hsh = manifest[s]
            f.write(f"{s}\t{rows}\t{cols}\t{hsh}\n")

    out = PathFeatureSet(list(paths), matrices, prov)
    out.products_performed = agg.products_performed  # type: ignore[attr-defined]
    return out


def compute_path_features(h: Hin, p: MetaPath) -> np.ndarray:
    """Single-path convenience wrapper around Aggregator."""
    return Aggregator(h).path_features(p)
