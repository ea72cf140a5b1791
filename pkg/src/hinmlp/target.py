"""Final classifier over the derived meta-paths.

Each selected path is projected by its own two-layer MLP, the hidden
vectors are concatenated in ranking order, and a two-layer classifier
produces the logits.  Training uses Adam with early stopping on the
validation metric; the reported test score always comes from the
best-validation checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .aggregate import PathFeatureSet
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
    write_checkpoint,
)
from .rng import RngStream


@dataclass
class TargetConfig:
    hidden: int = 512
    lr: float = 1e-3
    weight_decay: float = 0.0
    dropout: float = 0.5
    patience: int = 30
    max_epochs: int = 500
    seed: int = 0
    dtype: type = np.float64


class TargetNet:
    def __init__(self, feats: PathFeatureSet, num_classes: int, cfg: TargetConfig):
        self.feats = feats
        self.cfg = cfg
        self.num_classes = num_classes
        self.projectors = [
            init_mlp(
                feats.matrices[i].shape[1],
                cfg.hidden,
                cfg.hidden,
                RngStream(cfg.seed, f"init/tproj{i}"),
                cfg.dtype,
            )
            for i in range(len(feats))
        ]
        self.classifier = init_mlp(
            len(feats) * cfg.hidden,
            cfg.hidden,
            num_classes,
            RngStream(cfg.seed, "init/tclf"),
            cfg.dtype,
        )
        self.adam = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
        self.dropout_rng = RngStream(cfg.seed, "dropout/target")

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, p in enumerate(self.projectors):
            for name, arr in p.as_dict().items():
                out[f"proj{i}/{name}"] = arr
        for name, arr in self.classifier.as_dict().items():
            out[f"clf/{name}"] = arr
        return out

    def load_params(self, tensors: dict[str, np.ndarray]) -> None:
        own = self.params()
        for name, arr in tensors.items():
            own[name][...] = arr.astype(own[name].dtype)

    def forward(self, batch: np.ndarray, train: bool):
        proj_out, proj_cache = [], []
        for i, p in enumerate(self.projectors):
            x = self.feats.matrices[i][batch]
            out, cache = mlp_forward(p, x, self.cfg.dropout, self.dropout_rng, train)
            proj_out.append(out)
            proj_cache.append(cache)
        concat = np.concatenate(proj_out, axis=1)
        logits, clf_cache = mlp_forward(
            self.classifier, concat, self.cfg.dropout, self.dropout_rng, train
        )
        return logits, {"proj_cache": proj_cache, "clf_cache": clf_cache}

    def backward(self, cache, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        clf_grads, d_concat = mlp_backward(cache["clf_cache"], d_logits)
        grads = {f"clf/{n}": g for n, g in clf_grads.items()}
        h = self.cfg.hidden
        for i, pc in enumerate(cache["proj_cache"]):
            pg, _ = mlp_backward(pc, d_concat[:, i * h:(i + 1) * h])
            for n, g in pg.items():
                grads[f"proj{i}/{n}"] = g
        return grads


def target_forward(net: TargetNet, batch: np.ndarray, train: bool = False) -> np.ndarray:
    logits, _ = net.forward(batch, train)
    return logits


@dataclass
class TrainRecord:
    best_epoch: int
    epochs_run: int
    best_val_metric: float
    test_result: EvalResult
    val_trace: list[float] = field(default_factory=list)
    best_params: dict = field(default_factory=dict)


def _loss(logits, labels, batch, multi_label):
    if multi_label:
        return bce_with_logits(logits, labels[batch])
    return cross_entropy(logits, labels[batch])


def train_target(
    net: TargetNet,
    labels: np.ndarray,
    splits_train: np.ndarray,
    splits_val: np.ndarray,
    splits_test: np.ndarray,
    multi_label: bool = False,
) -> TrainRecord:
    """Full-batch Adam with early stopping on the validation metric."""
    if len(splits_train) == 0 or len(splits_val) == 0:
        raise ValueError("train and val splits must be nonempty")
    cfg = net.cfg
    best_metric, best_epoch, best_params = -np.inf, -1, None
    stale = 0
    val_trace = []
    epochs_run = 0

    for epoch in range(cfg.max_epochs):
        epochs_run = epoch + 1
        logits, cache = net.forward(splits_train, train=True)
        loss, d_logits = _loss(logits, labels, splits_train, multi_label)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss {loss}")
        grads = net.backward(cache, d_logits)
        adam_step(net.params(), grads, net.adam)

        logits, _ = net.forward(splits_val, train=False)
        preds = predictions_from_logits(logits, multi_label)
        metric = primary_metric(evaluate(preds, labels[splits_val], multi_label), multi_label)
        val_trace.append(metric)
        if metric > best_metric:
            best_metric, best_epoch = metric, epoch
            best_params = {k: v.copy() for k, v in net.params().items()}
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break

    net.load_params(best_params)
    logits, _ = net.forward(splits_test, train=False)
    preds = predictions_from_logits(logits, multi_label)
    test_result = evaluate(preds, labels[splits_test], multi_label, split="test")
    return TrainRecord(best_epoch, epochs_run, best_metric, test_result, val_trace, best_params)


def save_target_checkpoint(net: TargetNet, path) -> None:
    write_checkpoint(path, net.params())


# ---------------------------------------------------------------------------
# ablation harness

@dataclass
class AblationRow:
    mode: str
    path_strings: list[str]
    accuracy_mean: float
    accuracy_std: float
    macro_f1_mean: float
    macro_f1_std: float
    micro_f1_mean: float
    micro_f1_std: float


def ablate_run(
    feats: PathFeatureSet,
    labels: np.ndarray,
    splits_train: np.ndarray,
    splits_val: np.ndarray,
    splits_test: np.ndarray,
    mode: str,
    named_paths: list[str],
    cfg: TargetConfig,
    repeats: int = 10,
    multi_label: bool = False,
) -> AblationRow:
    """Train on a reduced path set `repeats` times with fresh initialization.

    mode "drop" removes the named paths from the candidate set; mode
    "keep" retains only the named paths.
    """
    all_strings = [str(p) for p in feats.paths]
    unknown = [s for s in named_paths if s not in all_strings]
    if unknown:
        raise ValueError(f"unknown path name(s): {unknown}")
    if mode == "drop":
        idx = [i for i, s in enumerate(all_strings) if s not in named_paths]
    elif mode == "keep":
        idx = [i for i, s in enumerate(all_strings) if s in named_paths]
    else:
        raise ValueError(f"unknown ablation mode {mode!r}")
    if not idx:
        raise ValueError("ablation leaves no paths")
    sub = feats.subset(idx)

    accs, macros, micros = [], [], []
    for r in range(repeats):
        net = TargetNet(sub, _num_classes(labels, multi_label), replace(cfg, seed=cfg.seed + r))
        rec = train_target(net, labels, splits_train, splits_val, splits_test, multi_label)
        accs.append(rec.test_result.accuracy)
        macros.append(rec.test_result.macro_f1)
        micros.append(rec.test_result.micro_f1)

    return AblationRow(
        mode=mode,
        path_strings=[all_strings[i] for i in idx],
        accuracy_mean=float(np.mean(accs)),
        accuracy_std=float(np.std(accs)),
        macro_f1_mean=float(np.mean(macros)),
        macro_f1_std=float(np.std(macros)),
        micro_f1_mean=float(np.mean(micros)),
        micro_f1_std=float(np.std(micros)),
    )


def _num_classes(labels: np.ndarray, multi_label: bool) -> int:
    return labels.shape[1] if multi_label else int(labels.max()) + 1


def write_ablation_report(rows: list[AblationRow], out_path) -> None:
    with open(out_path, "w", encoding="utf-8") as f:
        for r in rows:
            paths = ",".join(r.path_strings)
            f.write(
                f"{r.mode}\t{paths}"
                f"\t{r.macro_f1_mean:.4f}±{r.macro_f1_std:.4f}"
                f"\t{r.micro_f1_mean:.4f}±{r.micro_f1_std:.4f}\n"
            )
