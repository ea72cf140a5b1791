"""Acceptance gate: one test per shipped claim, each printing a verdict line.

Criteria covered, in order: enumeration fixtures, propagation oracle
equivalence, gradient correctness, bilevel phase isolation, sampling
uniformity, planted-path recovery, ablation margins, constant per-epoch
cost under sampling, and byte-identical reruns.
"""

import numpy as np
import pytest
import scipy.stats

from hinmlp import (
    RngStream,
    SearchConfig,
    SuperNet,
    TargetConfig,
    TargetNet,
    ablate_run,
    bce_with_logits,
    cross_entropy,
    default_synth_config,
    derive_top_m,
    enumerate_metapaths,
    generate_planted_hin,
    init_mlp,
    load_dataset,
    mlp_backward,
    mlp_forward,
    multi_seed_search,
    precompute_all,
    sample_paths,
    train_supernet,
    train_target,
)
from hinmlp.aggregate import Aggregator, PathFeatureSet
from hinmlp.bench import bench_epoch_time_vs_hop
from hinmlp.cli import main
from hinmlp.datagen import EdgeSpec, SynthConfig

from conftest import random_hin
from test_aggregate import dense_path_features


def verdict(ok, name, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. enumeration fixtures

def test_criterion_1_enumeration_fixtures(citation_schema, movie_schema, academic_schema):
    got2 = [p.string(citation_schema) for p in enumerate_metapaths(citation_schema, 2)]
    ok = got2 == ["A", "AP", "APA", "APT", "APV"]

    cite5 = len(enumerate_metapaths(citation_schema, 5))
    movie4 = len(enumerate_metapaths(movie_schema, 4))
    acad = [len(enumerate_metapaths(academic_schema, h)) for h in range(1, 7)]
    ok = ok and cite5 == 26 and movie4 == 25 and acad == [4, 10, 23, 50, 107, 226]
    verdict(
        ok,
        "criterion 1 (enumeration fixtures)",
        f"citation hop-2 {got2}, hop-5 count {cite5} (want 26), "
        f"movie hop-4 count {movie4} (want 25), "
        f"academic-graph hops 1-6 {acad} (want [4, 10, 23, 50, 107, 226])",
    )


# ---------------------------------------------------------------------------
# 2. sparse chain vs dense brute force

def test_criterion_2_propagation_oracle_equivalence():
    n_graphs = 0
    n_paths = 0
    worst = 0.0
    for seed in range(100):
        h = random_hin(seed)
        agg = Aggregator(h)
        for p in enumerate_metapaths(h.schema, 4):
            if p.end_type not in h.features:
                continue
            got = agg.path_features(p)
            want = dense_path_features(h, p)
            worst = max(worst, float(np.abs(got - want).max(initial=0.0)))
            n_paths += 1
        n_graphs += 1
    verdict(
        n_graphs >= 100 and worst < 1e-6,
        "criterion 2 (propagation oracle)",
        f"{n_graphs} random graphs, {n_paths} paths to hop 4, "
        f"max abs deviation {worst:.3e} (tol 1e-6)",
    )


# ---------------------------------------------------------------------------
# 3. gradient correctness by finite differences

def _fd(loss, arr, eps=1e-6):
    out = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        hi = loss()
        arr[idx] = orig - eps
        lo = loss()
        arr[idx] = orig
        out[idx] = (hi - lo) / (2 * eps)
    return out


def _rel(analytic, fd):
    denom = max(np.abs(analytic).max(initial=0), np.abs(fd).max(initial=0), 1e-8)
    return float(np.abs(analytic - fd).max(initial=0) / denom)


def test_criterion_3_gradient_correctness():
    g = np.random.default_rng(0)
    worst = {}

    # plain MLP against a fixed linear readout
    p = init_mlp(5, 7, 4, RngStream(1, "init"))
    x = g.standard_normal((6, 5))
    r = g.standard_normal((6, 4))
    _, cache = mlp_forward(p, x, dropout=0.0, train=False)
    grads, d_x = mlp_backward(cache, r)

    def mlp_loss():
        out, _ = mlp_forward(p, x, dropout=0.0, train=False)
        return float(np.sum(out * r))

    for name, arr in p.as_dict().items():
        worst[f"mlp/{name}"] = _rel(grads[name], _fd(mlp_loss, arr))
    worst["mlp/input"] = _rel(d_x, _fd(mlp_loss, x))

    # losses directly on logits
    logits = g.standard_normal((6, 4))
    classes = g.integers(0, 4, size=6)
    _, d = cross_entropy(logits.copy(), classes)
    worst["ce"] = _rel(d, _fd(lambda: cross_entropy(logits.copy(), classes)[0], logits))
    targets = (g.random((6, 4)) < 0.4).astype(float)
    _, d = bce_with_logits(logits, targets)
    worst["bce"] = _rel(d, _fd(lambda: bce_with_logits(logits, targets)[0], logits))

    # sampled super-net: omega and alpha jointly
    dims = [3, 2, 4, 3]
    mats = [g.standard_normal((14, dim)) for dim in dims]
    from test_search import toy_paths

    feats = PathFeatureSet(toy_paths(4), mats, "fd")
    labels = g.integers(0, 3, size=14).astype(np.int64)
    net = SuperNet(feats, 3, SearchConfig(M=3, hidden=6, dropout=0.0, seed=2))
    net.alpha[:] = g.standard_normal(4) * 0.5
    S = [0, 2, 3]
    batch = np.arange(14)

    def snet_loss():
        out, _ = net.forward(S, batch, train=False)
        l, _ = cross_entropy(out, labels[batch])
        return l

    logits, cache = net.forward(S, batch, train=False)
    _, d_logits = cross_entropy(logits, labels[batch])
    omega_grads, d_alpha_S = net.backward(cache, d_logits)
    fd_alpha = np.array([_fd(snet_loss, net.alpha)[k] for k in S])
    worst["supernet/alpha"] = _rel(d_alpha_S, fd_alpha)
    params = net.omega_params(S)
    for name in ("proj0/w1", "proj2/w2", "proj3/b1", "clf/w1", "clf/b2"):
        worst[f"supernet/{name}"] = _rel(omega_grads[name], _fd(snet_loss, params[name]))

    # target net end to end
    tfeats = PathFeatureSet(toy_paths(3), mats[:3], "fd")
    tnet = TargetNet(tfeats, 3, TargetConfig(hidden=5, dropout=0.0, seed=3))
    tlogits, tcache = tnet.forward(batch, train=False)
    _, d_logits = cross_entropy(tlogits, labels[batch])
    tgrads = tnet.backward(tcache, d_logits)

    def tnet_loss():
        out, _ = tnet.forward(batch, train=False)
        l, _ = cross_entropy(out, labels[batch])
        return l

    tparams = tnet.params()
    for name in ("proj0/w1", "proj1/w2", "proj2/b1", "clf/w1", "clf/b2"):
        worst[f"target/{name}"] = _rel(tgrads[name], _fd(tnet_loss, tparams[name]))

    worst_name = max(worst, key=worst.get)
    verdict(
        max(worst.values()) < 1e-4,
        "criterion 3 (gradient correctness)",
        f"{len(worst)} finite-difference checks, worst rel err "
        f"{worst[worst_name]:.3e} at {worst_name} (tol 1e-4)",
    )


# ---------------------------------------------------------------------------
# 4. bilevel phase isolation over a 50-epoch run

def test_criterion_4_bilevel_isolation(planted_hin):
    h = planted_hin
    paths = enumerate_metapaths(h.schema, 3)
    feats = precompute_all(h, paths)
    cfg = SearchConfig(M=3, epochs=50, hidden=16, seed=13)
    net = SuperNet(feats, h.num_classes, cfg)
    tr, va = h.split_indices("train"), h.split_indices("val")

    checks = {"omega": 0, "alpha": 0}
    state = {}

    def omega_bytes():
        return b"".join(
            v.tobytes() for _, v in sorted(net.omega_params(sorted(net.projectors)).items())
        )

    def hook(phase, n, S):
        if phase == "sample":
            state["alpha"] = n.alpha.tobytes()
        elif phase == "omega":
            assert n.alpha.tobytes() == state["alpha"], "omega phase moved alpha"
            state["omega"] = omega_bytes()
            checks["omega"] += 1
        elif phase == "alpha":
            assert omega_bytes() == state["omega"], "alpha phase moved omega"
            checks["alpha"] += 1

    train_supernet(net, h.labels, tr, va, phase_hook=hook)

    never = sorted(set(range(len(feats))) - net.ever_sampled)
    frozen_ok = all(net.alpha[k] == 0.0 and net.alpha_steps[k] == 0 for k in never)

    # a second short run with M=1 guarantees never-sampled entries exist
    small = SuperNet(feats, h.num_classes, SearchConfig(M=1, epochs=3, hidden=8, seed=14))
    train_supernet(small, h.labels, tr, va)
    small_never = sorted(set(range(len(feats))) - small.ever_sampled)
    frozen_ok = frozen_ok and len(small_never) > 0 and all(
        small.alpha[k] == 0.0 for k in small_never
    )

    verdict(
        checks == {"omega": 50, "alpha": 50} and frozen_ok,
        "criterion 4 (bilevel isolation)",
        f"50 epochs: {checks['omega']} weight phases left alpha bit-identical, "
        f"{checks['alpha']} alpha phases left weights bit-identical; "
        f"{len(small_never)} never-sampled alphas stayed at init",
    )


# ---------------------------------------------------------------------------
# 5. sampling uniformity

def test_criterion_5_sampling_uniformity():
    K, M, draws = 5, 2, 100_000
    rng = RngStream(17, "sample")
    counts = np.zeros(K, dtype=np.int64)
    for _ in range(draws):
        counts[sample_paths(K, M, rng)] += 1
    freqs = counts / draws
    chi = scipy.stats.chisquare(counts, f_exp=np.full(K, draws * M / K))
    ok = np.all(np.abs(freqs - 0.4) <= 0.01) and chi.pvalue > 0.01
    verdict(
        ok,
        "criterion 5 (sampling uniformity)",
        f"per-index frequencies {np.round(freqs, 4).tolist()} "
        f"(want 0.4 +- 0.01), chi-square p={chi.pvalue:.3f} (> 0.01)",
    )


# ---------------------------------------------------------------------------
# 6 + 7 share one full-size planted dataset

@pytest.fixture(scope="module")
def recovery_setup(tmp_path_factory):
    d = tmp_path_factory.mktemp("recovery") / "ds"
    cfg = default_synth_config(n_targets=2000, seed=0, signal_strength=0.9)
    generate_planted_hin(cfg, d)
    h = load_dataset(d)
    paths = enumerate_metapaths(h.schema, 3)
    feats = precompute_all(h, paths)
    splits = tuple(h.split_indices(s) for s in ("train", "val", "test"))
    return cfg, h, feats, splits


def test_criterion_6_planted_path_recovery(recovery_setup):
    cfg, h, feats, (tr, va, te) = recovery_setup
    planted = cfg.planted_path
    strings = [str(p) for p in feats.paths]
    k_planted = strings.index(planted)

    trials = 5
    hits = 0
    ranks = []
    best = None
    for t in range(trials):
        scfg = SearchConfig(M=8, epochs=50, hidden=64, seed=100 * t)
        rep, _ = multi_seed_search(feats, h.labels, tr, va, h.num_classes, scfg, n_seeds=3)
        rank = int(rep.rank[k_planted])
        ranks.append(rank)
        if rank < 3:
            hits += 1
        if best is None or rep.val_metric > best.val_metric:
            best = rep

    derived = derive_top_m(best, 8)
    idx = [feats.paths.index(p) for p in derived]
    tcfg = TargetConfig(hidden=64, patience=30, max_epochs=200, seed=0)
    tnet = TargetNet(feats.subset(idx), h.num_classes, tcfg)
    rec = train_target(tnet, h.labels, tr, va, te)

    # raw-feature baseline: the hop-0 path only, no propagation
    raw = feats.subset([strings.index("A")])
    bnet = TargetNet(raw, h.num_classes, tcfg)
    brec = train_target(bnet, h.labels, tr, va, te)
    chance = 1.0 / h.num_classes

    ok = (
        hits >= 4
        and rec.test_result.accuracy >= 0.90
        and abs(brec.test_result.accuracy - chance) <= 0.10
    )
    verdict(
        ok,
        "criterion 6 (planted-path recovery)",
        f"planted rank per trial {ranks} (top-3 in {hits}/5, want >=4), "
        f"classifier test accuracy {rec.test_result.accuracy:.3f} (>= 0.90), "
        f"raw-feature baseline {brec.test_result.accuracy:.3f} vs chance {chance:.3f} "
        f"(within 0.10)",
    )


def test_criterion_7_ablation_margins(recovery_setup):
    cfg, h, feats, (tr, va, te) = recovery_setup
    planted = cfg.planted_path
    noise = cfg.noise_paths
    tcfg = TargetConfig(hidden=64, patience=30, max_epochs=200, seed=0)

    full = ablate_run(feats, h.labels, tr, va, te, "drop", [], tcfg, repeats=3)
    drop_planted = ablate_run(feats, h.labels, tr, va, te, "drop", [planted], tcfg, repeats=3)
    drop_noise = ablate_run(feats, h.labels, tr, va, te, "drop", noise, tcfg, repeats=3)
    keep_planted = ablate_run(feats, h.labels, tr, va, te, "keep", [planted], tcfg, repeats=3)

    degrade = full.accuracy_mean - drop_planted.accuracy_mean
    noise_shift = abs(full.accuracy_mean - drop_noise.accuracy_mean)
    keep_gap = abs(full.accuracy_mean - keep_planted.accuracy_mean)
    ok = degrade >= 0.20 and noise_shift <= 0.02 and keep_gap <= 0.03
    verdict(
        ok,
        "criterion 7 (ablation margins)",
        f"full {full.accuracy_mean:.3f}; drop planted {drop_planted.accuracy_mean:.3f} "
        f"(degrade {degrade:.3f}, want >= 0.20); drop noise shift {noise_shift:.3f} "
        f"(<= 0.02); keep-planted gap {keep_gap:.3f} (<= 0.03)",
    )


# ---------------------------------------------------------------------------
# 8. constant per-epoch cost when sampling

def test_criterion_8_constant_cost(tmp_path):
    cfg = SynthConfig(
        node_counts={"A": 1000, "P": 600, "T": 400, "V": 400},
        edge_specs={
            "ap": EdgeSpec("A", "P", 3.0),
            "pt": EdgeSpec("P", "T", 3.0),
            "pv": EdgeSpec("P", "V", 3.0),
        },
        target_type="A",
        planted_path="APV",
        feature_dim=8,
        seed=3,
    )
    h = generate_planted_hin(cfg, tmp_path / "bench")

    sampled = bench_epoch_time_vs_hop(h, [4, 8], M=8, repeats=3, epochs=10, hidden=64)
    by = {(r.stage, r.max_hop): r for r in sampled}
    assert by[("search", 4)].num_candidates == 17
    assert by[("search", 8)].num_candidates == 161
    search_ratio = by[("search", 8)].epoch_seconds_mean / by[("search", 4)].epoch_seconds_mean
    train_ratio = by[("train", 8)].epoch_seconds_mean / by[("train", 4)].epoch_seconds_mean

    control = bench_epoch_time_vs_hop(
        h, [4, 8], M=8, repeats=3, epochs=10, hidden=64, full_set_control=True
    )
    cby = {(r.stage, r.max_hop): r for r in control}
    control_ratio = cby[("search", 8)].epoch_seconds_mean / cby[("search", 4)].epoch_seconds_mean

    ok = search_ratio <= 1.5 and train_ratio <= 1.5 and control_ratio >= 2.0
    verdict(
        ok,
        "criterion 8 (constant cost)",
        f"hop-8/hop-4 per-epoch ratio with M=8: search {search_ratio:.2f}, "
        f"train {train_ratio:.2f} (both <= 1.5); full-candidate-set control "
        f"{control_ratio:.2f} (>= 2.0); candidates 17 -> 161",
    )


# ---------------------------------------------------------------------------
# 9. byte-identical reruns

def test_criterion_9_determinism(tmp_path):
    ds = tmp_path / "ds"
    assert main(["gen-synth", "--targets", "300", "--seed", "5", "--out", str(ds)]) == 0

    outs = [tmp_path / "run1", tmp_path / "run2"]
    for out in outs:
        args = ["--dataset", str(ds), "--seed", "9", "--threads", "1", "--out", str(out)]
        assert main(["search", "--max-hop", "3", "--m", "4", "--epochs", "10",
                     "--hidden", "16", "--n-seeds", "2"] + args) == 0
        assert main(["train", "--hidden", "16", "--patience", "5",
                     "--max-epochs", "20"] + args) == 0

    compared = []
    same = True
    for name in ("search_report.tsv", "derived_paths.txt", "loss_trace_seed9.csv",
                 "loss_trace_seed10.csv", "target.hinp", "metrics.tsv"):
        a = (outs[0] / name).read_bytes()
        b = (outs[1] / name).read_bytes()
        same = same and a == b
        compared.append(name)
    verdict(
        same,
        "criterion 9 (determinism)",
        f"two identical runs, byte-compared artifacts: {', '.join(compared)}",
    )
