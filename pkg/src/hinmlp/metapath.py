"""Meta-path representation, parsing, and exhaustive enumeration.

A meta-path is rooted at the target node type and read left-to-right as
target <- ... <- source.  Each hop (c, d) is realised by one stored edge
type, used either in its stored orientation (src=c, dst=d) or transposed
(src=d, dst=c); transitions between the same ordered type pair are
collapsed, so a pair stored in both directions yields a single hop.
"""

from __future__ import annotations

from dataclasses import dataclass

from .hin import SchemaGraph


class PathError(ValueError):
    pass


class AmbiguousPathError(PathError):
    """Two stored edge types realise the same hop; a default mapping is needed."""


@dataclass(frozen=True)
class PathStep:
    """One hop: the stored edge type and whether its matrix is transposed.

    transpose=True means the stored matrix has (src=next, dst=current) and
    must be flipped to propagate features from next-type into current-type.
    """

    edge_type: str
    transpose: bool


@dataclass(frozen=True)
class MetaPath:
    node_type_seq: tuple[str, ...]
    steps: tuple[PathStep, ...]

    def __post_init__(self):
        if len(self.steps) != len(self.node_type_seq) - 1:
            raise PathError("step count must be node count minus one")

    @property
    def hop(self) -> int:
        return len(self.steps)

    @property
    def end_type(self) -> str:
        return self.node_type_seq[-1]

    @property
    def edge_type_seq(self) -> tuple[str, ...]:
        return tuple(s.edge_type for s in self.steps)

    def string(self, schema: SchemaGraph) -> str:
        letters = schema.letters()
        return "".join(letters[t] for t in self.node_type_seq)

    def __str__(self):
        return "".join(t if len(t) == 1 else t[0].upper() for t in self.node_type_seq)


def resolve_step(
    schema: SchemaGraph,
    cur: str,
    nxt: str,
    default_map: dict[tuple[str, str], str] | None = None,
    strict: bool = True,
) -> PathStep:
    """Pick the stored edge type realising the hop cur -> nxt.

    Edge types whose head (dst) is the current type are preferred; when
    several stored edge types compete, `default_map[(cur, nxt)]` names the
    winner, otherwise strict mode raises and lax mode picks the
    lexicographically smallest name.
    """
    direct = sorted(
        e.name for e in schema.edge_types if e.dst_type == cur and e.src_type == nxt
    )
    rev = sorted(
        e.name for e in schema.edge_types if e.src_type == cur and e.dst_type == nxt
    )
    pool, transpose = (direct, True) if direct else (rev, False)
    if not pool:
        raise PathError(f"no edge type connects {cur!r} and {nxt!r}")
    if len(pool) == 1:
        return PathStep(pool[0], transpose)
    if default_map and (cur, nxt) in default_map:
        name = default_map[(cur, nxt)]
        if name not in pool:
            raise PathError(f"default mapping {name!r} does not connect {cur!r}->{nxt!r}")
        return PathStep(name, transpose)
    if strict:
        raise AmbiguousPathError(
            f"ambiguous hop {cur!r}->{nxt!r}: edge types {pool}; configure a default mapping"
        )
    return PathStep(pool[0], transpose)


def _neighbor_types(schema: SchemaGraph, cur: str) -> list[str]:
    """Types reachable from `cur` in one hop, one entry per ordered pair."""
    out = set()
    for e in schema.edge_types:
        if e.dst_type == cur:
            out.add(e.src_type)
        if e.src_type == cur:
            out.add(e.dst_type)
    return sorted(out)


def enumerate_metapaths(
    schema: SchemaGraph,
    max_hop: int,
    exclude_types: set[str] | frozenset[str] = frozenset(),
    default_map: dict[tuple[str, str], str] | None = None,
) -> list[MetaPath]:
    """All meta-paths rooted at the target type with hop <= max_hop.

    Immediate backtracking is allowed, `exclude_types` prunes paths that
    visit any of those types, and the result is sorted by (hop, string).
    """
    if max_hop < 0:
        raise PathError("max_hop must be >= 0")
    known = {t.name for t in schema.node_types}
    unknown = set(exclude_types) - known
    if unknown:
        raise PathError(f"unknown excluded type(s): {sorted(unknown)}")

    target = schema.target_type
    if target in exclude_types:
        return []
    result: list[MetaPath] = []
    frontier = [MetaPath((target,), ())]
    result.extend(frontier)
    for _ in range(max_hop):
        nxt_frontier = []
        for p in frontier:
            cur = p.node_type_seq[-1]
            for d in _neighbor_types(schema, cur):
                if d in exclude_types:
                    continue
                step = resolve_step(schema, cur, d, default_map, strict=False)
                nxt_frontier.append(
                    MetaPath(p.node_type_seq + (d,), p.steps + (step,))
                )
        result.extend(nxt_frontier)
        frontier = nxt_frontier
    letters = schema.letters()
    result.sort(key=lambda p: (p.hop, "".join(letters[t] for t in p.node_type_seq)))
    return result


def parse_path(
    s: str,
    schema: SchemaGraph,
    default_map: dict[tuple[str, str], str] | None = None,
) -> MetaPath:
    """Parse a letter string like "APV" into a MetaPath."""
    letters = schema.letters()
    by_letter = {v: k for k, v in letters.items()}
    types = []
    for ch in s:
        if ch not in by_letter:
            raise PathError(f"unknown node-type letter {ch!r}")
        types.append(by_letter[ch])
    if not types:
        raise PathError("empty path string")
    if types[0] != schema.target_type:
        raise PathError(
            f"path must start at target type {schema.target_type!r}, got {types[0]!r}"
        )
    steps = tuple(
        resolve_step(schema, types[i], types[i + 1], default_map, strict=True)
        for i in range(len(types) - 1)
    )
    return MetaPath(tuple(types), steps)


def write_path_list(paths: list[MetaPath], schema: SchemaGraph, out_path) -> None:
    with open(out_path, "w", encoding="utf-8") as f:
        for p in paths:
            edges = ",".join(p.edge_type_seq)
            f.write(f"{p.string(schema)}\t{p.hop}\t{edges}\n")
