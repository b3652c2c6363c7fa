from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from mdanlab.config import ExperimentConfig, load_config
from mdanlab.data.domains import features_of
from mdanlab.data.loaders import load_domain_file, write_dense_csv, write_sparse_sv
from mdanlab.data.manifest import DomainManifest, ManifestEntry, write_manifest
from mdanlab.data.synthetic import generate
from mdanlab.errors import ConfigError, InputError, MdanLabError
from mdanlab.eval.pad import pad_report
from mdanlab.eval.stats import wilcoxon_signed_rank
from mdanlab.mdan.model import build_model
from mdanlab.mdan.train import evaluate, train
from mdanlab.pipeline.reports import format_kv, write_csv, write_json, write_kv
from mdanlab.pipeline.run import experiment_bound, load_experiment_data, run_experiment
from mdanlab.theory.divergence import h_divergence
from mdanlab.theory.hypotheses import enumerate_stumps

logger = logging.getLogger("mdanlab")

DEFAULT_CONFIG = "configs/rotated_moons.yaml"


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=DEFAULT_CONFIG, help=f"实验配置（YAML），默认: {DEFAULT_CONFIG}")
    p.add_argument("--out", default=None, help="输出目录；缺省时用配置中的 outputs_dir")


def _add_train_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=["hard", "soft"], default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdanlab", description="多源域适应实验室：MDAN 训练与理论工具")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="按配置生成合成多域数据，写出域文件与 manifest")
    _add_config(gen)
    gen.add_argument("--seed", type=int, default=None, help="覆盖 synthetic.seed")
    gen.add_argument("--format", choices=["dense_csv", "sparse_sv"], default="dense_csv")

    tr = sub.add_parser("train", help="训练一个 MDAN 模型，写出 checkpoint 与逐步 trace")
    _add_config(tr)
    _add_train_overrides(tr)

    div = sub.add_parser("divergence", help="两个样本文件之间的经验 H 散度（阈值桩类）")
    div.add_argument("file_a")
    div.add_argument("file_b")
    div.add_argument("--format", choices=["dense_csv", "sparse_sv"], default=None)
    div.add_argument("--dim", type=int, default=None, help="sparse_sv 文件需要")
    div.add_argument("--out", default=None)

    bd = sub.add_parser("bound", help="装配多源泛化界，写出 bound.txt")
    _add_config(bd)
    bd.add_argument("--seed", type=int, default=None, help="覆盖 bound.seed")

    pd_ = sub.add_parser("pad", help="各源域相对目标域的 PAD 与排序，写出 pad.csv")
    _add_config(pd_)
    pd_.add_argument("--seed", type=int, default=None, help="覆盖 pad.seed")

    wx = sub.add_parser("wilcoxon", help="对 CSV 中两列配对指标做符号秩检验")
    wx.add_argument("csv")
    wx.add_argument("--columns", nargs=2, default=None, metavar=("A", "B"), help="默认取前两列")
    wx.add_argument("--out", default=None)

    ex = sub.add_parser("experiment", help="完整实验：各方法 x 各种子，写出全部报告")
    _add_config(ex)
    _add_train_overrides(ex)
    ex.add_argument("--workers", type=int, default=None)
    return parser


def _out_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    return Path(args.out).resolve() if args.out else config.outputs_dir


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes = {
        key: getattr(args, key)
        for key in ("mode", "gamma", "mu", "batch", "epochs")
        if getattr(args, key, None) is not None
    }
    seed = getattr(args, "seed", None)
    if seed is not None:
        changes["seed"] = seed
    updated = replace(config, train=replace(config.train, **changes)) if changes else config
    if seed is not None:
        updated = replace(updated, seeds=(seed,))
    workers = getattr(args, "workers", None)
    if workers is not None:
        updated = replace(updated, workers=workers)
    return updated


# ------------------------ Commands ------------------------ #
def _cmd_generate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if config.synthetic is None:
        raise ConfigError("generate needs a data.synthetic section")
    spec = config.synthetic if args.seed is None else replace(config.synthetic, seed=args.seed)
    out = _out_dir(args, config)
    sources, target = generate(spec)
    suffix = ".csv" if args.format == "dense_csv" else ".sv"
    writer = write_dense_csv if args.format == "dense_csv" else write_sparse_sv
    entries = []
    for dom in [*sources, target]:
        path = out / f"{dom.domain_id}{suffix}"
        writer(path, dom)
        role = "target" if dom is target else "source"
        # 目标域标签仅供 oracle 评估
        entries.append(ManifestEntry(path=path, role=role, format=args.format, labeled=True))
    write_manifest(out / "manifest.yaml", DomainManifest(entries=tuple(entries), dim=target.dim))
    logger.info("generated k=%d out=%s", len(sources), out)
    print(out / "manifest.yaml")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _out_dir(args, config)
    sources, target = load_experiment_data(config)
    cfg = config.train
    model = build_model(target.dim, len(sources), cfg, seed=cfg.seed)
    model, history = train(
        model, sources, target, cfg,
        trace_path=out / "trace" / f"mdan_{cfg.mode}-{cfg.seed}.log",
        checkpoint_path=out / "model.ckpt",
    )
    summary = {"mode": cfg.mode, "seed": cfg.seed, "steps": len(history), "k": len(sources)}
    if target.has_oracle:
        summary[config.metric] = evaluate(model, target.oracle(), config.metric)
    write_json(out / "train_summary.json", summary)
    print(format_kv(summary), end="")
    return 0


def _cmd_divergence(args: argparse.Namespace) -> int:
    a = load_domain_file(args.file_a, fmt=args.format, dim=args.dim)
    b = load_domain_file(args.file_b, fmt=args.format, dim=args.dim)
    if a.dim != b.dim:
        raise InputError(f"sample dims differ: {a.dim} vs {b.dim}")
    H = enumerate_stumps(np.vstack([features_of(a), features_of(b)]))
    value = h_divergence(H, a, b)
    if args.out:
        write_json(Path(args.out) / "divergence.json", {"file_a": args.file_a, "file_b": args.file_b, "h_divergence": value, "class_size": len(H)})
    print(value)
    return 0


def _cmd_bound(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    cfg = config.bound if args.seed is None else replace(config.bound, seed=args.seed)
    out = _out_dir(args, config)
    sources, target = load_experiment_data(config)
    if not target.has_oracle:
        raise ConfigError("bound needs target labels (oracle mode)")
    result = experiment_bound(sources, target, cfg)
    if result is None:
        raise InputError("bound needs binary labels")
    report, extras = result
    record = {**report.to_record(), **extras}
    write_kv(out / "bound.txt", record)
    print(format_kv(record), end="")
    return 0


def _cmd_pad(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    probe = config.pad if args.seed is None else replace(config.pad, seed=args.seed)
    out = _out_dir(args, config)
    sources, target = load_experiment_data(config)
    report = pad_report(sources, target, probe)
    df = pd.DataFrame(
        {
            "source": [s.domain_id for s in sources],
            "pad": list(report.pads),
            "rank": [report.rank_of(i) for i in range(len(sources))],
        }
    )
    write_csv(out / "pad.csv", df)
    print(df.to_string(index=False))
    return 0


def _cmd_wilcoxon(args: argparse.Namespace) -> int:
    try:
        df = pd.read_csv(args.csv)
    except OSError as exc:
        raise InputError(f"cannot read {args.csv}: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{args.csv}: {exc}") from exc
    cols = args.columns or list(df.columns[:2])
    if len(cols) != 2 or any(c not in df.columns for c in cols):
        raise InputError(f"{args.csv}: need two metric columns, got {list(df.columns)}")
    try:
        a, b = (df[c].to_numpy(dtype=float) for c in cols)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.csv}: non-numeric metric column: {exc}") from exc
    statistic, p = wilcoxon_signed_rank(a, b)
    record = {"pair": f"{cols[0]} vs {cols[1]}", "n": int(df.shape[0]), "statistic": statistic, "p": p}
    if args.out:
        write_csv(Path(args.out) / "wilcoxon.csv", pd.DataFrame([record]))
    print(format_kv(record), end="")
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    result = run_experiment(config, out_dir=_out_dir(args, config))
    print(result.summary.to_string(index=False))
    return 0


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "divergence": _cmd_divergence,
    "bound": _cmd_bound,
    "pad": _cmd_pad,
    "wilcoxon": _cmd_wilcoxon,
    "experiment": _cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except MdanLabError as exc:
        print(f"mdanlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
