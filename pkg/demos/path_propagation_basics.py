"""Walk through the data model on a five-node toy graph.

Two authors, three papers, one venue.  We build the schema by hand,
enumerate the meta-paths, and watch how features flow back to the
authors as averages over typed neighborhoods.
"""

import numpy as np

from hinmlp import (
    EdgeType,
    Hin,
    NodeType,
    SchemaGraph,
    SparseAdjacency,
    compute_path_features,
    enumerate_metapaths,
    parse_path,
)

schema = SchemaGraph(
    node_types=(
        NodeType("A", 2, 2),
        NodeType("P", 3, 2),
        NodeType("V", 1, 2),
    ),
    edge_types=(
        EdgeType("ap", "A", "P"),
        EdgeType("pv", "P", "V"),
    ),
    target_type="A",
)

# author 0 wrote papers 0 and 1, author 1 wrote papers 1 and 2
ap = SparseAdjacency.from_edges(2, 3, [0, 0, 1, 1], [0, 1, 1, 2])
pv = SparseAdjacency.from_edges(3, 1, [0, 1, 2], [0, 0, 0])

features = {
    "A": np.array([[1.0, 0.0], [0.0, 1.0]]),
    "P": np.array([[2.0, 0.0], [0.0, 2.0], [4.0, 4.0]]),
    "V": np.array([[10.0, -10.0]]),
}
labels = np.array([0, 1], dtype=np.int64)
splits = np.array([0, 2], dtype=np.int8)

h = Hin(schema, {"ap": ap, "pv": pv}, features, labels, splits).validate()

print("node types:", [t.name for t in schema.node_types])
print("candidate meta-paths up to 3 hops:")
for p in enumerate_metapaths(schema, 3):
    print(f"  {p.string(schema):6s} hop={p.hop}")

# one hop: each author averages the papers it wrote
x = compute_path_features(h, parse_path("AP", schema))
print("\nAP features (mean of authored papers):")
print(x)
# author 0 averages papers 0 and 1 -> [1, 1]; author 1 papers 1 and 2 -> [2, 3]
assert np.allclose(x, [[1.0, 1.0], [2.0, 3.0]])

# two hops: papers average their venue first, then authors average papers
x = compute_path_features(h, parse_path("APV", schema))
print("\nAPV features (venue signal reaching the authors):")
print(x)
assert np.allclose(x, [[10.0, -10.0], [10.0, -10.0]])

# a path ending back at A mixes author features through co-authorship
x = compute_path_features(h, parse_path("APA", schema))
print("\nAPA features (co-author smoothing of the author features):")
print(x)
