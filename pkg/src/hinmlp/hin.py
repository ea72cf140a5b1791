"""Typed heterogeneous graph data model and dataset I/O.

A graph is a schema (node types, directed edge types, one target type)
plus per-edge-type sparse adjacencies, per-node-type feature matrices,
labels and train/val/test splits for the target nodes.  Graphs are
immutable after loading; every mutating constructor returns a new value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .rng import RngStream

HINF_MAGIC = b"HINF"

SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST = 0, 1, 2
_SPLIT_NAMES = {"train": SPLIT_TRAIN, "val": SPLIT_VAL, "test": SPLIT_TEST}
_SPLIT_STR = {v: k for k, v in _SPLIT_NAMES.items()}


class DatasetError(Exception):
    """Malformed dataset: carries the offending file and line when known."""

    def __init__(self, message, file=None, line=None):
        loc = ""
        if file is not None:
            loc = f" [{file}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.file = file
        self.line = line


@dataclass(frozen=True)
class NodeType:
    name: str
    count: int
    feature_dim: int


@dataclass(frozen=True)
class EdgeType:
    name: str
    src_type: str
    dst_type: str


@dataclass(frozen=True)
class SchemaGraph:
    node_types: tuple[NodeType, ...]
    edge_types: tuple[EdgeType, ...]
    target_type: str

    def __post_init__(self):
        names = [t.name for t in self.node_types]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate node-type name")
        enames = [e.name for e in self.edge_types]
        if len(set(enames)) != len(enames):
            raise DatasetError("duplicate edge-type name")
        for e in self.edge_types:
            if e.src_type not in names or e.dst_type not in names:
                raise DatasetError(f"edge type {e.name!r} references undeclared node type")
        if self.target_type not in names:
            raise DatasetError(f"target type {self.target_type!r} not declared")
        for t in self.node_types:
            if t.count < 0 or t.feature_dim < 0:
                raise DatasetError(f"negative count or feature dim for {t.name!r}")

    def node_type(self, name: str) -> NodeType:
        for t in self.node_types:
            if t.name == name:
                return t
        raise KeyError(name)

    def edge_type(self, name: str) -> EdgeType:
        for e in self.edge_types:
            if e.name == name:
                return e
        raise KeyError(name)

    def count(self, name: str) -> int:
        return self.node_type(name).count

    def letters(self) -> dict[str, str]:
        """Single-letter alias per node type, for meta-path strings.

        Type names that are already single letters are used as-is;
        otherwise the uppercased first letter is used.  Collisions raise.
        """
        out = {}
        for t in self.node_types:
            letter = t.name if len(t.name) == 1 else t.name[0].upper()
            if letter in out.values():
                raise DatasetError(f"node-type letter alias collision on {letter!r}")
            out[t.name] = letter
        return out


@dataclass(frozen=True)
class SparseAdjacency:
    """CSR matrix over (src-type nodes) x (dst-type nodes)."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def validate(self) -> "SparseAdjacency":
        if len(self.indptr) != self.rows + 1:
            raise DatasetError("indptr length mismatch")
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise DatasetError("indptr not monotone from 0")
        if len(self.indices) != len(self.values):
            raise DatasetError("indices/values length mismatch")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= self.cols):
            raise DatasetError("column index out of range")
        for r in range(self.rows):
            row = self.indices[self.indptr[r]:self.indptr[r + 1]]
            if len(row) > 1 and np.any(np.diff(row) <= 0):
                raise DatasetError(f"row {r} indices not strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DatasetError("non-finite adjacency value")
        return self

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.indices, self.indptr), shape=(self.rows, self.cols)
        )

    @classmethod
    def from_scipy(cls, m: sp.spmatrix) -> "SparseAdjacency":
        m = sp.csr_matrix(m)
        m.sort_indices()
        return cls(
            rows=m.shape[0],
            cols=m.shape[1],
            indptr=np.asarray(m.indptr, dtype=np.int64),
            indices=np.asarray(m.indices, dtype=np.int64),
            values=np.asarray(m.data, dtype=np.float64),
        )

    @classmethod
    def from_edges(cls, rows, cols, src, dst, weights=None) -> "SparseAdjacency":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if weights is None:
            weights = np.ones(len(src), dtype=np.float64)
        m = sp.coo_matrix((weights, (src, dst)), shape=(rows, cols)).tocsr()
        m.sum_duplicates()
        return cls.from_scipy(m)


def row_normalize(a: SparseAdjacency) -> SparseAdjacency:
    """Scale each nonempty row to sum to one; empty rows stay empty."""
    if len(a.values) and a.values.min() < 0:
        raise ValueError("row_normalize: negative adjacency value")
    if a.rows and a.nnz:
        counts = np.diff(a.indptr)
        row_ids = np.repeat(np.arange(a.rows), counts)
        sums = np.bincount(row_ids, weights=a.values, minlength=a.rows)
        sums = np.where(counts > 0, sums, 1.0)
        values = a.values / np.repeat(sums, counts)
    else:
        values = a.values.copy()
    return replace(a, values=values)


def reverse_adjacency(a: SparseAdjacency) -> SparseAdjacency:
    """Transpose with sorted rows; values carried over, not re-normalized."""
    return SparseAdjacency.from_scipy(a.to_scipy().T)


@dataclass(frozen=True)
class Hin:
    schema: SchemaGraph
    adjacency: dict[str, SparseAdjacency]
    features: dict[str, np.ndarray]
    labels: np.ndarray  # (n_target,) int64, or (n_target, n_classes) uint8 multi-hot
    splits: np.ndarray  # (n_target,) int8 of SPLIT_* codes
    multi_label: bool = False

    @property
    def target_count(self) -> int:
        return self.schema.count(self.schema.target_type)

    @property
    def num_classes(self) -> int:
        if self.multi_label:
            return self.labels.shape[1]
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def split_indices(self, which: str) -> np.ndarray:
        return np.flatnonzero(self.splits == _SPLIT_NAMES[which])

    def featureless_types(self) -> list[str]:
        return [t.name for t in self.schema.node_types if t.name not in self.features]

    def validate(self) -> "Hin":
        for ename, a in self.adjacency.items():
            e = self.schema.edge_type(ename)
            if a.rows != self.schema.count(e.src_type) or a.cols != self.schema.count(e.dst_type):
                raise DatasetError(f"adjacency shape mismatch for edge type {ename!r}")
            a.validate()
        for tname, x in self.features.items():
            t = self.schema.node_type(tname)
            if x.shape[0] != t.count:
                raise DatasetError(f"feature row count mismatch for {tname!r}")
            if not np.all(np.isfinite(x)):
                raise DatasetError(f"non-finite feature for {tname!r}")
        n = self.target_count
        if len(self.splits) != n:
            raise DatasetError("split assignment missing for some target nodes")
        if len(self.labels) != n:
            raise DatasetError("labels missing for some target nodes")
        return self


# ---------------------------------------------------------------------------
# binary feature format

def write_hinf(path, x: np.ndarray) -> None:
    x = np.ascontiguousarray(x, dtype="<f4")
    with open(path, "wb") as f:
        f.write(HINF_MAGIC)
        f.write(struct.pack("<II", x.shape[0], x.shape[1]))
        f.write(x.tobytes())


def read_hinf(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != HINF_MAGIC:
            raise DatasetError("bad magic bytes", file=str(path))
        rows, cols = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(rows * cols * 4), dtype="<f4")
        if data.size != rows * cols:
            raise DatasetError("truncated feature file", file=str(path))
    return data.reshape(rows, cols).astype(np.float64)


# ---------------------------------------------------------------------------
# dataset directory I/O

def _parse_schema(path) -> SchemaGraph:
    node_types, edge_types, target = [], [], None
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            kind = parts[0]
            try:
                if kind == "nodetype":
                    node_types.append(NodeType(parts[1], int(parts[2]), int(parts[3])))
                elif kind == "edgetype":
                    edge_types.append(EdgeType(parts[1], parts[2], parts[3]))
                elif kind == "target":
                    target = parts[1]
                else:
                    raise DatasetError(f"unknown schema record {kind!r}", str(path), ln)
            except (IndexError, ValueError) as exc:
                raise DatasetError(f"malformed schema line: {exc}", str(path), ln) from exc
    if target is None:
        raise DatasetError("missing target line", str(path))
    return SchemaGraph(tuple(node_types), tuple(edge_types), target)


def _load_edges(path, e: EdgeType, schema: SchemaGraph) -> SparseAdjacency:
    n_src, n_dst = schema.count(e.src_type), schema.count(e.dst_type)
    srcs, dsts, weights = [], [], []
    weighted = False
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            try:
                s, d = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) > 2 else 1.0
            except (IndexError, ValueError) as exc:
                raise DatasetError(f"malformed edge line: {exc}", str(path), ln) from exc
            if not (0 <= s < n_src and 0 <= d < n_dst):
                raise DatasetError("dangling edge endpoint", str(path), ln)
            if len(parts) > 2:
                weighted = True
            srcs.append(s)
            dsts.append(d)
            weights.append(w)
    return SparseAdjacency.from_edges(
        n_src, n_dst, srcs, dsts, np.array(weights) if weighted else None
    )


def _load_features(feat_dir, t: NodeType):
    bin_path = feat_dir / f"{t.name}.bin"
    tsv_path = feat_dir / f"{t.name}.tsv"
    if bin_path.exists():
        x = read_hinf(bin_path)
    elif tsv_path.exists():
        x = np.loadtxt(tsv_path, ndmin=2, dtype=np.float64)
        if x.size == 0:
            x = x.reshape(t.count, 0)
    else:
        return None
    if x.shape[0] != t.count:
        raise DatasetError(
            f"feature matrix for {t.name!r} has {x.shape[0]} rows, schema says {t.count}",
            file=str(bin_path if bin_path.exists() else tsv_path),
        )
    if t.feature_dim and x.shape[1] != t.feature_dim:
        raise DatasetError(
            f"feature matrix for {t.name!r} has {x.shape[1]} cols, schema says {t.feature_dim}",
            file=str(bin_path if bin_path.exists() else tsv_path),
        )
    if not np.all(np.isfinite(x)):
        raise DatasetError(f"non-finite feature for {t.name!r}")
    return x


def _load_labels(path, n: int):
    ids, tokens = [], []
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            try:
                ids.append(int(parts[0]))
                tokens.append(parts[1])
            except (IndexError, ValueError) as exc:
                raise DatasetError(f"malformed label line: {exc}", str(path), ln) from exc
            if not (0 <= ids[-1] < n):
                raise DatasetError("label node id out of range", str(path), ln)
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate label assignment", str(path))
    if len(ids) != n:
        raise DatasetError(f"labels cover {len(ids)} of {n} target nodes", str(path))
    # multi-hot bit vectors: every token a fixed-width 0/1 string of length >= 2
    multi = bool(tokens) and all(len(t) >= 2 and set(t) <= {"0", "1"} for t in tokens) \
        and len({len(t) for t in tokens}) == 1
    if multi:
        width = len(tokens[0])
        labels = np.zeros((n, width), dtype=np.uint8)
        for i, tok in zip(ids, tokens):
            labels[i] = [int(c) for c in tok]
    else:
        labels = np.zeros(n, dtype=np.int64)
        for i, tok in zip(ids, tokens):
            labels[i] = int(tok)
    return labels, multi


def _load_splits(path, n: int) -> np.ndarray:
    splits = np.full(n, -1, dtype=np.int8)
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            try:
                i, name = int(parts[0]), parts[1]
                code = _SPLIT_NAMES[name]
            except (IndexError, ValueError, KeyError) as exc:
                raise DatasetError(f"malformed split line: {exc}", str(path), ln) from exc
            if not (0 <= i < n):
                raise DatasetError("split node id out of range", str(path), ln)
            if splits[i] != -1:
                raise DatasetError("duplicate split assignment", str(path), ln)
            splits[i] = code
    if np.any(splits == -1):
        raise DatasetError("split assignment missing for some target nodes", str(path))
    return splits


def load_dataset(directory) -> Hin:
    """Load and fully validate a dataset directory."""
    from pathlib import Path

    d = Path(directory)
    schema_path = d / "schema.tsv"
    if not schema_path.exists():
        raise DatasetError("missing schema.tsv", file=str(schema_path))
    schema = _parse_schema(schema_path)

    adjacency = {}
    for e in schema.edge_types:
        path = d / "edges" / f"{e.name}.tsv"
        if not path.exists():
            raise DatasetError(f"missing edge file for {e.name!r}", file=str(path))
        adjacency[e.name] = _load_edges(path, e, schema)

    features = {}
    for t in schema.node_types:
        x = _load_features(d / "features", t)
        if x is not None:
            features[t.name] = x

    n = schema.count(schema.target_type)
    labels_path = d / "labels.tsv"
    if not labels_path.exists():
        raise DatasetError("missing labels.tsv", file=str(labels_path))
    labels, multi = _load_labels(labels_path, n)

    splits_path = d / "splits.tsv"
    if not splits_path.exists():
        raise DatasetError("missing splits.tsv", file=str(splits_path))
    splits = _load_splits(splits_path, n)

    return Hin(schema, adjacency, features, labels, splits, multi).validate()


def save_dataset(h: Hin, directory) -> None:
    """Write a Hin back out in the dataset directory layout."""
    from pathlib import Path

    d = Path(directory)
    (d / "edges").mkdir(parents=True, exist_ok=True)
    (d / "features").mkdir(exist_ok=True)

    with open(d / "schema.tsv", "w", encoding="utf-8") as f:
        for t in h.schema.node_types:
            f.write(f"nodetype\t{t.name}\t{t.count}\t{t.feature_dim}\n")
        for e in h.schema.edge_types:
            f.write(f"edgetype\t{e.name}\t{e.src_type}\t{e.dst_type}\n")
        f.write(f"target\t{h.schema.target_type}\n")

    for ename, a in h.adjacency.items():
        unweighted = np.allclose(a.values, 1.0)
        with open(d / "edges" / f"{ename}.tsv", "w", encoding="utf-8") as f:
            for r in range(a.rows):
                for k in range(a.indptr[r], a.indptr[r + 1]):
                    if unweighted:
                        f.write(f"{r}\t{a.indices[k]}\n")
                    else:
                        f.write(f"{r}\t{a.indices[k]}\t{a.values[k]:.17g}\n")

    for tname, x in h.features.items():
        write_hinf(d / "features" / f"{tname}.bin", x)

    with open(d / "labels.tsv", "w", encoding="utf-8") as f:
        for i in range(len(h.labels)):
            if h.multi_label:
                f.write(f"{i}\t{''.join(str(int(b)) for b in h.labels[i])}\n")
            else:
                f.write(f"{i}\t{int(h.labels[i])}\n")

    with open(d / "splits.tsv", "w", encoding="utf-8") as f:
        for i, code in enumerate(h.splits):
            f.write(f"{i}\t{_SPLIT_STR[int(code)]}\n")


# ---------------------------------------------------------------------------
# derived graphs

def sparsify_by_in_degree_cap(h: Hin, cap: int, seed: int) -> Hin:
    """Cap every destination node's in-degree per edge type.

    For each destination the kept sources are the first `cap` entries of a
    seeded permutation of its current sources, so re-capping with the same
    (cap, seed) is a no-op.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    adjacency = {}
    for ename, a in h.adjacency.items():
        at = a.to_scipy().T.tocsr()  # dst-major
        at.sort_indices()
        keep_rows, keep_cols, keep_vals = [], [], []
        for dst in range(at.shape[0]):
            lo, hi = at.indptr[dst], at.indptr[dst + 1]
            srcs = at.indices[lo:hi]
            vals = at.data[lo:hi]
            if len(srcs) > cap:
                g = RngStream(seed, f"degcap/{ename}/{dst}").generator()
                order = g.permutation(len(srcs))[:cap]
                srcs, vals = srcs[order], vals[order]
            keep_rows.extend(srcs)
            keep_cols.extend([dst] * len(srcs))
            keep_vals.extend(vals)
        adjacency[ename] = SparseAdjacency.from_edges(
            a.rows, a.cols, keep_rows, keep_cols, np.array(keep_vals)
        )
    return replace(h, adjacency=adjacency)


def synth_features_for_featureless(h: Hin, type_name: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic uniform(-1, 1) features keyed by (seed, type, node id)."""
    if type_name in h.features:
        raise ValueError(f"node type {type_name!r} already has features")
    n = h.schema.count(type_name)
    out = np.empty((n, dim), dtype=np.float64)
    for i in range(n):
        g = RngStream(seed, f"synthfeat/{type_name}", counter=i).generator()
        out[i] = g.uniform(-1.0, 1.0, size=dim)
    return out


def with_features(h: Hin, type_name: str, x: np.ndarray) -> Hin:
    """New Hin with an extra feature matrix attached."""
    feats = dict(h.features)
    feats[type_name] = x
    return replace(h, features=feats)
