"""Sampled super-net search over per-meta-path architecture parameters.

Each candidate path k carries a scalar parameter alpha_k; every epoch a
uniform subset of M paths is drawn, projected by per-path two-layer MLPs,
fused as a softmax-weighted sum over the sampled subset, and classified.
Network weights are stepped on the training split with alpha frozen, then
alpha is stepped on the validation split with the weights frozen.  The
ranking of the final alphas selects the derived path set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregate import PathFeatureSet
from .metapath import MetaPath
from .metrics import evaluate, predictions_from_logits, primary_metric
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
)
from .rng import RngStream


@dataclass
class SearchConfig:
    M: int = 20
    epochs: int = 50
    hidden: int = 512
    lr: float = 1e-3
    alpha_lr: float = 1e-3
    weight_decay: float = 0.0
    dropout: float = 0.5
    seed: int = 0
    dtype: type = np.float64


@dataclass
class SearchReport:
    path_strings: list[str]
    paths: list[MetaPath]
    alpha: np.ndarray
    strength: np.ndarray  # softmax of alpha over all K
    rank: np.ndarray  # rank[i] = position of path i, 0 = strongest
    seed: int
    train_trace: list[float] = field(default_factory=list)
    val_trace: list[float] = field(default_factory=list)
    val_metric: float = float("nan")

    def write_tsv(self, out_path) -> None:
        order = np.argsort(self.rank)
        with open(out_path, "w", encoding="utf-8") as f:
            for i in order:
                f.write(
                    f"{self.path_strings[i]}\t{self.alpha[i]:.17g}"
                    f"\t{self.strength[i]:.17g}\t{self.rank[i]}\n"
                )


def sample_paths(K: int, M: int, rng) -> np.ndarray:
    """Uniform subset of min(M, K) indices, without replacement."""
    if M < 1:
        raise ValueError("M must be >= 1")
    g = rng.next_generator() if isinstance(rng, RngStream) else rng
    return np.sort(g.choice(K, size=min(M, K), replace=False))


class SuperNet:
    """Search-stage network with lazily created per-path projectors."""

    def __init__(self, feats: PathFeatureSet, num_classes: int, cfg: SearchConfig):
        self.feats = feats
        self.cfg = cfg
        self.K = len(feats)
        self.num_classes = num_classes
        self.alpha = np.zeros(self.K, dtype=np.float64)
        self.projectors: dict[int, MlpParams] = {}
        init_rng = RngStream(cfg.seed, "init/classifier")
        self.classifier = init_mlp(cfg.hidden, cfg.hidden, num_classes, init_rng, cfg.dtype)
        self.omega_state = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
        # per-entry Adam moments for alpha, touched only for sampled indices
        self.alpha_state = AdamState(lr=cfg.alpha_lr)
        self.alpha_m = np.zeros(self.K)
        self.alpha_v = np.zeros(self.K)
        self.alpha_steps = np.zeros(self.K, dtype=np.int64)
        self.ever_sampled: set[int] = set()
        self.dropout_rng = RngStream(cfg.seed, "dropout")

    def projector(self, k: int) -> MlpParams:
        if k not in self.projectors:
            in_dim = self.feats.matrices[k].shape[1]
            rng = RngStream(self.cfg.seed, f"init/proj{k}")
            self.projectors[k] = init_mlp(in_dim, self.cfg.hidden, self.cfg.hidden, rng, self.cfg.dtype)
        return self.projectors[k]

    def omega_params(self, S) -> dict[str, np.ndarray]:
        out = {}
        for k in S:
            for name, arr in self.projector(k).as_dict().items():
                out[f"proj{k}/{name}"] = arr
        for name, arr in self.classifier.as_dict().items():
            out[f"clf/{name}"] = arr
        return out

    def forward(self, S, batch: np.ndarray, train: bool):
        """Sampled subset forward pass; returns (logits, cache)."""
        S = np.asarray(S)
        if len(S) == 0:
            raise ValueError("empty sampled set")
        a = self.alpha[S]
        e = np.exp(a - a.max())
        weights = e / e.sum()  # softmax over the sampled set only
        proj_out, proj_cache = [], []
        for k in S:
            x = self.feats.matrices[k][batch]
            out, cache = mlp_forward(
                self.projector(int(k)), x, self.cfg.dropout, self.dropout_rng, train
            )
            proj_out.append(out)
            proj_cache.append(cache)
        fused = sum(w * o for w, o in zip(weights, proj_out))
        logits, clf_cache = mlp_forward(
            self.classifier, fused, self.cfg.dropout, self.dropout_rng, train
        )
        cache = {
            "S": S,
            "weights": weights,
            "proj_out": proj_out,
            "proj_cache": proj_cache,
            "clf_cache": clf_cache,
        }
        return logits, cache

    def backward(self, cache, d_logits: np.ndarray):
        """Returns (omega grads keyed like omega_params, alpha grad over sampled set)."""
        clf_grads, d_fused = mlp_backward(cache["clf_cache"], d_logits)
        S, weights = cache["S"], cache["weights"]
        omega_grads = {f"clf/{n}": g for n, g in clf_grads.items()}
        d_w = np.empty(len(S))
        for i, k in enumerate(S):
            d_w[i] = np.sum(d_fused * cache["proj_out"][i])
            pg, _ = mlp_backward(cache["proj_cache"][i], weights[i] * d_fused)
            for n, g in pg.items():
                omega_grads[f"proj{k}/{n}"] = g
        # softmax jacobian: d_alpha = w * (d_w - <w, d_w>)
        d_alpha_S = weights * (d_w - np.dot(weights, d_w))
        return omega_grads, d_alpha_S

    def alpha_adam_update(self, S, d_alpha_S: np.ndarray) -> None:
        """Adam restricted to the sampled entries; others stay untouched."""
        if not np.all(np.isfinite(d_alpha_S)):
            raise NumericError("non-finite alpha gradient")
        st = self.alpha_state
        for i, k in enumerate(S):
            g = d_alpha_S[i]
            self.alpha_steps[k] += 1
            t = self.alpha_steps[k]
            self.alpha_m[k] = st.beta1 * self.alpha_m[k] + (1 - st.beta1) * g
            self.alpha_v[k] = st.beta2 * self.alpha_v[k] + (1 - st.beta2) * g * g
            m_hat = self.alpha_m[k] / (1 - st.beta1**t)
            v_hat = self.alpha_v[k] / (1 - st.beta2**t)
            self.alpha[k] -= st.lr * m_hat / (np.sqrt(v_hat) + st.eps)


def supernet_forward(net: SuperNet, S, batch: np.ndarray, train: bool = False):
    logits, _ = net.forward(S, batch, train)
    return logits


def _loss(logits, labels, batch, multi_label):
    if multi_label:
        return bce_with_logits(logits, labels[batch])
    return cross_entropy(logits, labels[batch])


def train_supernet(
    net: SuperNet,
    labels: np.ndarray,
    splits_train: np.ndarray,
    splits_val: np.ndarray,
    multi_label: bool = False,
    phase_hook=None,
) -> SearchReport:
    """Alternating bilevel search: one weight step and one alpha step per epoch.

    `phase_hook(phase, net, S)` is called with phase "sample", "omega", or
    "alpha" as the epoch progresses (observation only).
    """
    if len(splits_train) == 0 or len(splits_val) == 0:
        raise ValueError("train and val splits must be nonempty")
    cfg = net.cfg
    sample_rng = RngStream(cfg.seed, "sample")
    train_trace, val_trace = [], []

    for _ in range(cfg.epochs):
        S = sample_paths(net.K, cfg.M, sample_rng)
        net.ever_sampled.update(int(k) for k in S)
        if phase_hook is not None:
            phase_hook("sample", net, S)

        # weight step on the training split, alpha frozen
        logits, cache = net.forward(S, splits_train, train=True)
        loss, d_logits = _loss(logits, labels, splits_train, multi_label)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss {loss}")
        omega_grads, _ = net.backward(cache, d_logits)
        adam_step(net.omega_params(S), omega_grads, net.omega_state)
        train_trace.append(loss)
        if phase_hook is not None:
            phase_hook("omega", net, S)

        # alpha step on the validation split, weights frozen
        logits, cache = net.forward(S, splits_val, train=False)
        vloss, d_logits = _loss(logits, labels, splits_val, multi_label)
        if not np.isfinite(vloss):
            raise NumericError(f"non-finite validation loss {vloss}")
        _, d_alpha_S = net.backward(cache, d_logits)
        net.alpha_adam_update(S, d_alpha_S)
        val_trace.append(vloss)
        if phase_hook is not None:
            phase_hook("alpha", net, S)

    return finalize_report(net, labels, splits_val, multi_label, train_trace, val_trace)


def finalize_report(net, labels, splits_val, multi_label, train_trace, val_trace) -> SearchReport:
    schema_strings = [str(p) for p in net.feats.paths]
    strength = np.exp(net.alpha - net.alpha.max())
    strength = strength / strength.sum()
    order = sorted(range(net.K), key=lambda i: (-net.alpha[i], schema_strings[i]))
    rank = np.empty(net.K, dtype=np.int64)
    for pos, i in enumerate(order):
        rank[i] = pos

    # validation metric at the final state, using the strongest paths that
    # actually have projectors (never-sampled paths have no weights to score)
    usable = sorted(net.projectors.keys(), key=lambda i: rank[i])
    top = usable[: min(net.cfg.M, len(usable))]
    metric = float("nan")
    if top:
        logits = supernet_forward(net, np.asarray(top), splits_val, train=False)
        preds = predictions_from_logits(logits, multi_label)
        metric = primary_metric(evaluate(preds, labels[splits_val], multi_label), multi_label)

    return SearchReport(
        path_strings=schema_strings,
        paths=list(net.feats.paths),
        alpha=net.alpha.copy(),
        strength=strength,
        rank=rank,
        seed=net.cfg.seed,
        train_trace=train_trace,
        val_trace=val_trace,
        val_metric=metric,
    )


def derive_top_m(report: SearchReport, M: int) -> list[MetaPath]:
    """The M strongest paths, ties broken by lexicographic path string."""
    if M > len(report.paths):
        M = len(report.paths)
    order = sorted(
        range(len(report.paths)),
        key=lambda i: (-report.alpha[i], report.path_strings[i]),
    )
    return [report.paths[i] for i in order[:M]]


def multi_seed_search(
    feats: PathFeatureSet,
    labels: np.ndarray,
    splits_train: np.ndarray,
    splits_val: np.ndarray,
    num_classes: int,
    cfg: SearchConfig,
    n_seeds: int = 3,
    multi_label: bool = False,
):
    """Run the search once per seed and keep the best-validation report.

    Returns (best report, all reports in seed order).
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    from dataclasses import replace

    reports = []
    for i in range(n_seeds):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        net = SuperNet(feats, num_classes, run_cfg)
        reports.append(train_supernet(net, labels, splits_train, splits_val, multi_label))
    best = max(range(n_seeds), key=lambda i: (reports[i].val_metric, -i))
    return reports[best], reports
