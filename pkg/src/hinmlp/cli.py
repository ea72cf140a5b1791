"""Command-line front end for the full pipeline.

Subcommands: enumerate, precompute, search, train, ablate, bench,
gen-synth, sparsify.  Options may come from a `key = value` config file
(`#` comments allowed); explicit flags win over the file.  Exit codes:
0 ok, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregate import CacheError, precompute_all
from .bench import bench_epoch_time_vs_hop, write_bench_csv
from .datagen import default_synth_config, generate_planted_hin
from .hin import (
    DatasetError,
    Hin,
    load_dataset,
    save_dataset,
    sparsify_by_in_degree_cap,
    synth_features_for_featureless,
    with_features,
)
from .metapath import PathError, enumerate_metapaths, parse_path, write_path_list
from .metrics import primary_metric
from .neural import NumericError
from .search import SearchConfig, derive_top_m, multi_seed_search
from .target import (
    TargetConfig,
    TargetNet,
    ablate_run,
    save_target_checkpoint,
    train_target,
    write_ablation_report,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line {ln}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _set_threads(n: int) -> None:
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass


def _config_hash(args: argparse.Namespace) -> str:
    items = sorted(
        (k, repr(v)) for k, v in vars(args).items() if k not in ("func", "config")
    )
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


def write_run_meta(out_dir: Path, args: argparse.Namespace, seeds: list[int]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run_meta.tsv", "w", encoding="utf-8") as f:
        f.write(f"command\t{args.command}\n")
        f.write(f"config_hash\t{_config_hash(args)}\n")
        f.write(f"seeds\t{','.join(str(s) for s in seeds)}\n")
        f.write(f"threads\t{args.threads}\n")
        f.write(f"version\t{__version__}\n")
        f.write(f"numpy\t{np.__version__}\n")
        for k, v in sorted(vars(args).items()):
            if k not in ("func", "command", "config"):
                f.write(f"opt:{k}\t{v}\n")


def _load(args) -> Hin:
    if not args.dataset:
        raise UsageError("--dataset is required")
    return load_dataset(args.dataset)


def _ensure_features(h: Hin, dim: int, seed: int) -> Hin:
    for t in h.featureless_types():
        h = with_features(h, t, synth_features_for_featureless(h, t, dim, seed))
    return h


def _precompute(h: Hin, max_hop: int, cache_dir=None):
    paths = enumerate_metapaths(h.schema, max_hop)
    return paths, precompute_all(h, paths, cache_dir)


# ---------------------------------------------------------------------------
# subcommands

def cmd_enumerate(args) -> int:
    h = _load(args)
    exclude = set(args.exclude.split(",")) if args.exclude else set()
    paths = enumerate_metapaths(h.schema, args.max_hop, exclude)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_path_list(paths, h.schema, out / "paths.tsv")
    write_run_meta(out, args, [])
    for p in paths:
        print(p.string(h.schema))
    return EXIT_OK


def cmd_precompute(args) -> int:
    h = _ensure_features(_load(args), args.feat_dim, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths, feats = _precompute(h, args.max_hop, out / "cache")
    write_run_meta(out, args, [args.seed])
    print(f"precomputed {len(paths)} path feature matrices")
    return EXIT_OK


def cmd_search(args) -> int:
    h = _ensure_features(_load(args), args.feat_dim, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths, feats = _precompute(h, args.max_hop, out / "cache")
    cfg = SearchConfig(
        M=args.m,
        epochs=args.epochs,
        hidden=args.hidden,
        lr=args.lr,
        alpha_lr=args.alpha_lr,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        seed=args.seed,
        dtype=np.float64 if args.precision == "f64" else np.float32,
    )
    tr, va = h.split_indices("train"), h.split_indices("val")
    best, reports = multi_seed_search(
        feats, h.labels, tr, va, h.num_classes, cfg, args.n_seeds, h.multi_label
    )
    best.write_tsv(out / "search_report.tsv")
    derived = derive_top_m(best, args.m)
    with open(out / "derived_paths.txt", "w", encoding="utf-8") as f:
        for p in derived:
            f.write(p.string(h.schema) + "\n")
    for rep in reports:
        with open(out / f"loss_trace_seed{rep.seed}.csv", "w", encoding="utf-8") as f:
            f.write("epoch,train_loss,val_loss\n")
            for e, (t, v) in enumerate(zip(rep.train_trace, rep.val_trace)):
                f.write(f"{e},{t:.9g},{v:.9g}\n")
    write_run_meta(out, args, [args.seed + i for i in range(args.n_seeds)])
    print(f"best seed {best.seed} val metric {best.val_metric:.4f}")
    return EXIT_OK


def _read_derived(args, h: Hin):
    if args.paths:
        path_file = Path(args.paths)
    else:
        path_file = Path(args.out) / "derived_paths.txt"
        if not path_file.exists():
            raise UsageError(
                "no derived_paths.txt in --out; run `search` first or pass --paths"
            )
    strings = [
        line.strip() for line in path_file.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    try:
        return [parse_path(s, h.schema) for s in strings]
    except PathError as exc:
        raise DatasetError(str(exc), file=str(path_file)) from exc


def cmd_train(args) -> int:
    h = _ensure_features(_load(args), args.feat_dim, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    derived = _read_derived(args, h)
    feats = precompute_all(h, derived, out / "cache")
    cfg = TargetConfig(
        hidden=args.hidden,
        lr=args.lr,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
        dtype=np.float64 if args.precision == "f64" else np.float32,
    )
    net = TargetNet(feats, h.num_classes, cfg)
    tr, va, te = (h.split_indices(s) for s in ("train", "val", "test"))
    rec = train_target(net, h.labels, tr, va, te, h.multi_label)
    save_target_checkpoint(net, out / "target.hinp")
    with open(out / "metrics.tsv", "w", encoding="utf-8") as f:
        f.write(f"best_epoch\t{rec.best_epoch}\n")
        f.write(f"epochs_run\t{rec.epochs_run}\n")
        f.write(f"val_metric\t{rec.best_val_metric:.6f}\n")
        f.write(f"test_accuracy\t{rec.test_result.accuracy:.6f}\n")
        f.write(f"test_micro_f1\t{rec.test_result.micro_f1:.6f}\n")
        f.write(f"test_macro_f1\t{rec.test_result.macro_f1:.6f}\n")
    write_run_meta(out, args, [args.seed])
    print(
        f"test accuracy {rec.test_result.accuracy:.4f} "
        f"micro-F1 {rec.test_result.micro_f1:.4f} macro-F1 {rec.test_result.macro_f1:.4f}"
    )
    return EXIT_OK


def cmd_ablate(args) -> int:
    h = _ensure_features(_load(args), args.feat_dim, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths, feats = _precompute(h, args.max_hop, out / "cache")
    named = [s for s in args.paths_list.split(",") if s]
    cfg = TargetConfig(
        hidden=args.hidden,
        lr=args.lr,
        dropout=args.dropout,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )
    tr, va, te = (h.split_indices(s) for s in ("train", "val", "test"))
    row = ablate_run(
        feats, h.labels, tr, va, te, args.mode, named, cfg, args.repeats, h.multi_label
    )
    write_ablation_report([row], out / "ablation_report.tsv")
    write_run_meta(out, args, [args.seed + i for i in range(args.repeats)])
    print(
        f"{row.mode}({','.join(named)}): accuracy {row.accuracy_mean:.4f}±{row.accuracy_std:.4f} "
        f"micro-F1 {row.micro_f1_mean:.4f}±{row.micro_f1_std:.4f}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    h = _ensure_features(_load(args), args.feat_dim, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hops = [int(x) for x in args.hops.split(",") if x]
    rows = bench_epoch_time_vs_hop(
        h, hops, args.m, args.repeats, args.epochs, args.hidden, args.seed,
        full_set_control=args.full_set,
    )
    write_bench_csv(rows, out / "bench.csv")
    write_run_meta(out, args, [args.seed])
    for r in rows:
        print(
            f"{r.stage} hop={r.max_hop} K={r.num_candidates} M={r.M} "
            f"epoch {r.epoch_seconds_mean * 1e3:.2f}±{r.epoch_seconds_std * 1e3:.2f} ms"
        )
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    cfg = default_synth_config(args.targets, args.seed, args.strength)
    generate_planted_hin(cfg, args.out)
    write_run_meta(Path(args.out), args, [args.seed])
    print(f"wrote planted dataset to {args.out} (planted path {cfg.planted_path})")
    return EXIT_OK


def cmd_sparsify(args) -> int:
    h = _load(args)
    capped = sparsify_by_in_degree_cap(h, args.cap, args.seed)
    save_dataset(capped, args.out)
    write_run_meta(Path(args.out), args, [args.seed])
    before = sum(a.nnz for a in h.adjacency.values())
    after = sum(a.nnz for a in capped.adjacency.values())
    print(f"edges {before} -> {after} (cap {args.cap})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value options file; flags override it")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--feat-dim", type=int, default=16,
                   help="synthesized feature width for featureless node types")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hinmlp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list candidate meta-paths")
    _add_common(p)
    p.add_argument("--max-hop", type=int, required=True)
    p.add_argument("--exclude", help="comma-joined node types to prune")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("precompute", help="materialize path feature matrices")
    _add_common(p)
    p.add_argument("--max-hop", type=int, required=True)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("search", help="super-net meta-path search")
    _add_common(p)
    _add_model(p)
    p.add_argument("--max-hop", type=int, required=True)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--n-seeds", type=int, default=3)
    p.add_argument("--alpha-lr", type=float, default=1e-3)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="train the final classifier on derived paths")
    _add_common(p)
    _add_model(p)
    p.add_argument("--paths", help="path list file (defaults to --out/derived_paths.txt)")
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--max-epochs", type=int, default=500)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="drop/keep path ablations")
    _add_common(p)
    _add_model(p)
    p.add_argument("--max-hop", type=int, required=True)
    p.add_argument("--mode", choices=("drop", "keep"), required=True)
    p.add_argument("--paths-list", required=True, help="comma-joined path strings")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--max-epochs", type=int, default=500)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="per-epoch cost vs maximum hop")
    _add_common(p)
    p.add_argument("--hops", required=True, help="comma-joined max hops, e.g. 4,8")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--full-set", action="store_true",
                   help="control run: sampling budget = whole candidate set")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-synth", help="generate a planted-signal dataset")
    _add_common(p)
    p.add_argument("--targets", type=int, default=2000)
    p.add_argument("--strength", type=float, default=0.9)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("sparsify", help="cap per-edge-type in-degree")
    _add_common(p)
    p.add_argument("--cap", type=int, required=True)
    p.set_defaults(func=cmd_sparsify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, remaining = parser.parse_known_args(argv)
    if remaining:
        print(f"error\t{EXIT_USAGE}\tunknown arguments: {' '.join(remaining)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.config:
            file_opts = read_config_file(args.config)
            # flags given explicitly on the command line win over the file
            explicit = _explicit_dests(parser, argv if argv is not None else sys.argv[1:])
            for key, value in file_opts.items():
                if key not in vars(args):
                    raise UsageError(f"unknown config key {key!r}")
                if key in explicit:
                    continue
                current = getattr(args, key)
                caster = type(current) if current is not None else str
                if caster is bool:
                    setattr(args, key, value.lower() in ("1", "true", "yes"))
                else:
                    setattr(args, key, caster(value))
        _set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"error\t{EXIT_USAGE}\t{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, PathError, CacheError, FileNotFoundError, ValueError) as exc:
        print(f"error\t{EXIT_DATA}\t{exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error\t{EXIT_NUMERIC}\t{exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _explicit_dests(parser: argparse.ArgumentParser, argv) -> set[str]:
    """Option dests that were literally present on the command line."""
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    out = set()
    for sp in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        for action in sp._actions:  # noqa: SLF001
            if any(opt in given for opt in action.option_strings):
                out.add(action.dest)
    return out


if __name__ == "__main__":
    sys.exit(main())
