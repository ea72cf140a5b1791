"""End-to-end run on a synthetic graph with a known informative path.

The generator plants the label signal three hops away from the target
nodes (path ABCD) and surrounds it with noise paths.  The sampled search
should push the planted path to the top of the alpha ranking, and the
final classifier trained on the derived paths should beat a raw-feature
baseline by a wide margin.
"""

import tempfile
from pathlib import Path

from hinmlp import (
    SearchConfig,
    TargetConfig,
    TargetNet,
    default_synth_config,
    derive_top_m,
    enumerate_metapaths,
    generate_planted_hin,
    load_dataset,
    multi_seed_search,
    precompute_all,
    train_target,
)

workdir = Path(tempfile.mkdtemp(prefix="hinmlp_demo_"))
cfg = default_synth_config(n_targets=1000, seed=0, signal_strength=0.9)
print(f"generating {cfg.node_counts} with planted path {cfg.planted_path} ...")
generate_planted_hin(cfg, workdir / "ds")
h = load_dataset(workdir / "ds")

paths = enumerate_metapaths(h.schema, 3)
print(f"{len(paths)} candidate paths up to 3 hops:",
      [p.string(h.schema) for p in paths])
feats = precompute_all(h, paths, workdir / "cache")

tr, va, te = (h.split_indices(s) for s in ("train", "val", "test"))
search_cfg = SearchConfig(M=8, epochs=50, hidden=64, seed=0)
best, _ = multi_seed_search(feats, h.labels, tr, va, h.num_classes, search_cfg)

print("\nalpha ranking (strongest first):")
import numpy as np

for i in np.argsort(best.rank):
    marker = "  <- planted" if best.path_strings[i] == cfg.planted_path else ""
    print(f"  {best.path_strings[i]:6s} alpha={best.alpha[i]:+.4f} "
          f"strength={best.strength[i]:.3f}{marker}")

derived = derive_top_m(best, 8)
idx = [feats.paths.index(p) for p in derived]
target_cfg = TargetConfig(hidden=64, patience=30, max_epochs=200, seed=0)
net = TargetNet(feats.subset(idx), h.num_classes, target_cfg)
rec = train_target(net, h.labels, tr, va, te)
print(f"\nclassifier on derived paths: test accuracy "
      f"{rec.test_result.accuracy:.3f} (best epoch {rec.best_epoch})")

# baseline: hop-0 features only, no propagation
strings = [str(p) for p in feats.paths]
baseline = TargetNet(feats.subset([strings.index("A")]), h.num_classes, target_cfg)
brec = train_target(baseline, h.labels, tr, va, te)
print(f"raw-feature baseline:        test accuracy "
      f"{brec.test_result.accuracy:.3f} (chance is {1 / h.num_classes:.3f})")
