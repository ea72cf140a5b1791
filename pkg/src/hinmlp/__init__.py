"""Meta-path search and MLP classification on heterogeneous information networks.

Pipeline: load or generate a typed graph, enumerate candidate meta-paths,
propagate features along them once, search per-path importance weights with
a sampled super-net, then train a pure-MLP classifier on the derived paths.
"""

__version__ = "0.1.0"

from .aggregate import Aggregator, PathFeatureSet, compute_path_features, precompute_all
from .datagen import EdgeSpec, SynthConfig, default_synth_config, generate_planted_hin
from .hin import (
    DatasetError,
    EdgeType,
    Hin,
    NodeType,
    SchemaGraph,
    SparseAdjacency,
    load_dataset,
    reverse_adjacency,
    row_normalize,
    save_dataset,
    sparsify_by_in_degree_cap,
    synth_features_for_featureless,
    with_features,
)
from .metapath import MetaPath, PathError, PathStep, enumerate_metapaths, parse_path
from .metrics import EvalResult, evaluate, predictions_from_logits, primary_metric
from .neural import (
    AdamState,
    MlpParams,
    NumericError,
    adam_step,
    bce_with_logits,
    cross_entropy,
    init_mlp,
    mlp_backward,
    mlp_forward,
    softmax,
    xavier_init,
)
from .rng import RngStream
from .search import (
    SearchConfig,
    SearchReport,
    SuperNet,
    derive_top_m,
    multi_seed_search,
    sample_paths,
    supernet_forward,
    train_supernet,
)
from .target import TargetConfig, TargetNet, ablate_run, target_forward, train_target
