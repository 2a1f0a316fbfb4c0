"""Command-line entry point: ``node2seq {train,eval,gradcheck,datagen,convert}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, TrainConfig, load_config
from .datasets import RAW_FORMATS, convert, write_planted_partition
from .graph import load_dataset
from .gradcheck import gradcheck
from .selector import SelectorConfig
from .training import build_model, evaluate, prepare_features, split_for_seed, train

log = logging.getLogger("node2seq")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(items: list[str]) -> dict[str, str]:
    pairs = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v
    return pairs


def _config(args) -> TrainConfig:
    cfg = load_config(args.config, _overrides(args.overrides))
    if not cfg.dataset_dir:
        raise ConfigError("dataset_dir is not set (config file or dataset_dir=... override)")
    return cfg


def _load(cfg: TrainConfig):
    if not Path(cfg.dataset_dir).is_dir():
        raise ConfigError(f"dataset directory {cfg.dataset_dir} not found")
    return load_dataset(cfg.dataset_dir, cfg.per_class_train, cfg.val_size)


def _run_seed(
    cfg: TrainConfig, seed: int, out: Path, save_model: bool = False
) -> tuple[int, int, float, float, int, float]:
    dataset = _load(cfg)
    model, report = train(dataset, cfg, seed)
    (out / f"run_seed{seed}.csv").write_text(report.to_csv(cfg.to_lines()))
    if save_model:
        np.savez(out / f"model_seed{seed}.npz", **model.parameters())
    return seed, report.best_epoch, report.best_val, report.best_test, report.epochs, report.wall_clock


def format_mean_std(values: list[float]) -> str:
    """Percent ``mean±std`` with sample std, one decimal."""
    mean = 100.0 * statistics.fmean(values)
    std = 100.0 * statistics.stdev(values) if len(values) > 1 else 0.0
    return f"{mean:.1f}±{std:.1f}"


def write_summary(path: Path, cfg: TrainConfig, rows) -> str:
    tests = [r[3] for r in rows]
    vals = [r[2] for r in rows]
    text = format_mean_std(tests)
    lines = [f"# {ln}" for ln in cfg.to_lines()]
    lines.append("seed,best_epoch,val_acc,test_acc,epochs,wall_clock")
    lines += [f"{s},{e},{v!r},{t!r},{n},{w:.3f}" for s, e, v, t, n, w in rows]
    std = lambda xs: statistics.stdev(xs) if len(xs) > 1 else 0.0  # noqa: E731
    lines.append(f"mean,,{statistics.fmean(vals)!r},{statistics.fmean(tests)!r},,")
    lines.append(f"std,,{std(vals)!r},{std(tests)!r},,")
    lines.append(f"# test_acc {text} over {len(rows)} seeds")
    path.write_text("\n".join(lines) + "\n")
    return text


def cmd_train(args) -> int:
    cfg = _config(args)
    _load(cfg)  # fail early on a missing or malformed dataset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = len(cfg.seeds)
    if args.jobs > 1 and k > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_seed, [cfg] * k, cfg.seeds, [out] * k, [args.save_model] * k))
    else:
        rows = []
        for seed in cfg.seeds:
            rows.append(_run_seed(cfg, seed, out, args.save_model))
            log.info("seed %d: best epoch %d val %.4f test %.4f", *rows[-1][:4])
    text = write_summary(out / "summary.csv", cfg, rows)
    print(f"test accuracy {text} over {len(rows)} seed(s); reports in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    dataset = _load(cfg)
    seed = cfg.seeds[0]
    dataset = split_for_seed(dataset, cfg, seed)
    model = build_model(cfg, dataset.features.shape[1], dataset.num_classes, np.random.default_rng(seed))
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint {ckpt} not found")
    with np.load(ckpt) as data:
        model.set_parameters({k: data[k] for k in data.files})
    acc = evaluate(model, dataset, args.split, features=prepare_features(dataset, cfg))
    print(f"{args.split} accuracy {acc:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    selector = SelectorConfig(args.beta, args.ell, args.nonlocal_)
    result = gradcheck(
        seed=args.seed,
        h=args.h,
        tolerance=args.tolerance,
        readout=args.readout,
        skip=args.skip,
        selector=selector,
        corrupt_conv=args.corrupt_conv,
    )
    for key, err in result.errors.items():
        mark = "ok" if err < result.tolerance else "FAIL"
        print(f"{key:16s} worst rel. error {err:.3e}  {mark}")
    print(f"{'PASS' if result.passed else 'FAIL'} (tolerance {result.tolerance:g}, h={args.h:g})")
    return EXIT_OK if result.passed else EXIT_RUNTIME


def cmd_datagen(args) -> int:
    if args.n < args.classes:
        raise UsageError(f"n={args.n} must be >= classes={args.classes}")
    out = write_planted_partition(
        args.out,
        n=args.n,
        classes=args.classes,
        p_in=args.p_in,
        p_out=args.p_out,
        seed=args.seed,
        feature_dim=args.feature_dim,
        signal=args.signal,
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_convert(args) -> int:
    ds = convert(args.format, args.in_dir, args.out_dir)
    print(
        f"wrote {args.out_dir}: num_nodes={ds.graph.n} num_edges={ds.graph.num_edges} "
        f"num_features={ds.features.shape[1]} num_classes={ds.num_classes}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="node2seq", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_args(sp):
        sp.add_argument("--config", help="key=value config file (a report CSV also works)")
        sp.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides; these win")

    t = sub.add_parser("train", help="train over every configured seed")
    run_args(t)
    t.add_argument("--out", default="runs", help="report directory")
    t.add_argument("--jobs", type=int, default=1, help="seeds trained in parallel processes")
    t.add_argument("--save-model", action="store_true", help="also write model_seed<N>.npz checkpoints")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved checkpoint")
    run_args(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference check of every gradient")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--h", type=float, default=1e-5)
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--readout", choices=("mean", "max", "sum"), default="mean")
    g.add_argument("--skip", choices=("sum", "concat", "none"), default="sum")
    g.add_argument("--nonlocal", dest="nonlocal_", action="store_true")
    g.add_argument("--beta", type=float, default=0.0)
    g.add_argument("--ell", type=int, default=2)
    g.add_argument("--corrupt-conv", action="store_true", help=argparse.SUPPRESS)
    g.set_defaults(func=cmd_gradcheck)

    d = sub.add_parser("datagen", help="write a planted-partition dataset")
    d.add_argument("--n", type=int, default=60)
    d.add_argument("--classes", type=int, default=3)
    d.add_argument("--p-in", type=float, default=0.5)
    d.add_argument("--p-out", type=float, default=0.02)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--feature-dim", type=int, default=8)
    d.add_argument("--signal", type=float, default=1.0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_datagen)

    c = sub.add_parser("convert", help="convert raw citation data to the text layout")
    c.add_argument("--format", choices=sorted(RAW_FORMATS), default="planetoid_text")
    c.add_argument("in_dir")
    c.add_argument("out_dir")
    c.set_defaults(func=cmd_convert)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    # key=value overrides may also follow the options (``train --out r epochs=5``)
    args, extra = parser.parse_known_args(argv)
    if extra:
        if not hasattr(args, "overrides") or any(a.startswith("-") or "=" not in a for a in extra):
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        args.overrides = list(args.overrides) + extra
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"node2seq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"node2seq: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
