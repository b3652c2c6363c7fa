from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from mdanlab.config import BoundConfig, ExperimentConfig, TrainConfig, config_snapshot
from mdanlab.data.domains import LabeledDomain, UnlabeledDomain, combine_domains
from mdanlab.data.manifest import load_manifest, load_manifest_domains
from mdanlab.data.synthetic import generate
from mdanlab.errors import ConfigError
from mdanlab.eval.pad import PadReport, pad_report
from mdanlab.eval.stats import wilcoxon_signed_rank
from mdanlab.mdan.baselines import train_source_only
from mdanlab.mdan.model import build_model
from mdanlab.mdan.train import evaluate, train, train_dann
from mdanlab.pipeline.reports import write_csv, write_json, write_kv
from mdanlab.theory.bound import BoundReport, assemble_bound, empirical_risk_01, erm_minmax
from mdanlab.theory.hypotheses import enumerate_stumps

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentResult:
    out_dir: Path
    metrics: pd.DataFrame
    summary: pd.DataFrame
    pad: PadReport
    bound: BoundReport | None
    wilcoxon: pd.DataFrame


# ------------------------ Data ------------------------ #
def load_experiment_data(config: ExperimentConfig) -> tuple[list[LabeledDomain], UnlabeledDomain]:
    """合成数据直接生成；manifest 数据在训练前检查文件。目标域一律去掉可见标签。"""
    if config.synthetic is not None:
        sources, target = generate(config.synthetic)
        return sources, target.unlabeled()
    manifest = load_manifest(config.manifest)
    manifest.check_files()
    return load_manifest_domains(manifest)


def _validate(config: ExperimentConfig, sources: Sequence[LabeledDomain], target: UnlabeledDomain) -> None:
    if not target.has_oracle:
        raise ConfigError("experiment needs target labels for evaluation (oracle mode)")
    dims = {s.dim for s in sources} | {target.dim}
    if len(dims) != 1:
        raise ConfigError(f"domains disagree on dim: {sorted(dims)}")
    n_classes = config.train.n_classes
    for s in [*sources, target.oracle()]:
        y = np.asarray(s.labels)
        if config.metric == "accuracy" and (y.min() < 0 or y.max() >= n_classes):
            raise ConfigError(f"domain {s.domain_id!r} has labels outside [0, {n_classes})")


# ------------------------ Cells ------------------------ #
def _better(metric: str, a: float, b: float) -> bool:
    return a > b if metric == "accuracy" else a < b


def _best(metric: str, values: Sequence[float]) -> float:
    best = values[0]
    for v in values[1:]:
        if _better(metric, v, best):
            best = v
    return best


def run_cell(
    method: str,
    seed: int,
    train_cfg: TrainConfig,
    metric: str,
    sources: Sequence[LabeledDomain],
    target: UnlabeledDomain,
    trace_dir: Path,
) -> dict[str, Any]:
    """训练并评估一个 (method, seed) 单元，返回一行 metrics 记录。"""
    cfg = replace(train_cfg, seed=seed)
    oracle = target.oracle()
    dim = target.dim
    per_source: list[float] = []

    if method == "source_only_combined":
        net, _ = train_source_only(sources, cfg)
        value = evaluate(net, oracle, metric)
    elif method == "best_single_source":
        for s in sources:
            net, _ = train_source_only([s], cfg)
            per_source.append(evaluate(net, oracle, metric))
        value = _best(metric, per_source)
    elif method == "dann_single_best":
        for i, s in enumerate(sources):
            model = build_model(dim, 1, cfg, seed=seed)
            model, _ = train_dann(model, s, target, cfg, trace_path=trace_dir / f"{method}-{seed}-source{i}.log")
            per_source.append(evaluate(model, oracle, metric))
        value = _best(metric, per_source)
    elif method == "dann_combined":
        combined = combine_domains(list(sources), domain_id="combined")
        model = build_model(dim, 1, cfg, seed=seed)
        model, _ = train_dann(model, combined, target, cfg, trace_path=trace_dir / f"{method}-{seed}.log")
        value = evaluate(model, oracle, metric)
    elif method in ("mdan_hard", "mdan_soft"):
        cfg = replace(cfg, mode=method.split("_", 1)[1])
        model = build_model(dim, len(sources), cfg, seed=seed)
        model, _ = train(model, sources, target, cfg, trace_path=trace_dir / f"{method}-{seed}.log")
        value = evaluate(model, oracle, metric)
    else:
        raise ConfigError(f"unknown method {method!r}")

    logger.info("cell_done method=%s seed=%d %s=%.4f", method, seed, metric, value)
    return {"method": method, "seed": seed, "metric": metric, "value": float(value)}


def _run_cell_packed(args: tuple) -> dict[str, Any]:
    return run_cell(*args)


# ------------------------ Reports ------------------------ #
def summarize(metrics: pd.DataFrame, methods: Sequence[str]) -> pd.DataFrame:
    """按方法取种子中位数，行顺序同配置中的 methods。"""
    rows = []
    for method in methods:
        g = metrics[metrics["method"] == method]
        if g.empty:
            continue
        rows.append({"method": method, "metric": g["metric"].iloc[0], "median": float(g["value"].median()), "n_seeds": int(g.shape[0])})
    return pd.DataFrame(rows, columns=["method", "metric", "median", "n_seeds"])


def wilcoxon_table(metrics: pd.DataFrame, methods: Sequence[str]) -> pd.DataFrame:
    """所有无序方法对，按种子配对。"""
    rows = []
    for a, b in itertools.combinations(methods, 2):
        va = metrics[metrics["method"] == a].set_index("seed")["value"]
        vb = metrics[metrics["method"] == b].set_index("seed")["value"]
        seeds = [s for s in va.index if s in vb.index]
        if not seeds:
            continue
        stat, p = wilcoxon_signed_rank(va.loc[seeds].to_numpy(), vb.loc[seeds].to_numpy())
        rows.append({"pair": f"{a} vs {b}", "method_a": a, "method_b": b, "n": len(seeds), "statistic": stat, "p": p})
    return pd.DataFrame(rows, columns=["pair", "method_a", "method_b", "n", "statistic", "p"])


def _subsample(dom: LabeledDomain, max_points: int, rng: np.random.Generator) -> LabeledDomain:
    if dom.n <= max_points:
        return dom
    return dom.subset(np.sort(rng.choice(dom.n, size=max_points, replace=False)))


def experiment_bound(
    sources: Sequence[LabeledDomain],
    target: UnlabeledDomain,
    cfg: BoundConfig,
) -> tuple[BoundReport, dict[str, Any]] | None:
    """在输入空间上用阈值桩类装配泛化界；h 取最坏源风险最小的桩。仅二分类标签可用。"""
    oracle = target.oracle()
    labels = np.concatenate([*[s.labels for s in sources], oracle.labels])
    if not np.isin(labels, (0, 1)).all():
        logger.warning("bound_skipped reason=non_binary_labels")
        return None
    rng = np.random.default_rng(cfg.seed)
    sub_sources = [_subsample(s, cfg.max_points, rng) for s in sources]
    sub_target = _subsample(oracle, cfg.max_points, rng)
    pooled = np.vstack([sub_target.features, *[s.features for s in sub_sources]])
    H = enumerate_stumps(pooled)
    h, _ = erm_minmax(H, sub_sources)
    report = assemble_bound(H, h, sub_target.features, sub_sources, target_labeled=sub_target, delta=cfg.delta)
    extras = {"hypothesis": repr(h), "class_size": len(H), "target_risk_oracle": empirical_risk_01(h, sub_target)}
    return report, extras


def run_experiment(config: ExperimentConfig, *, out_dir: Path | None = None) -> ExperimentResult:
    out_dir = Path(out_dir or config.outputs_dir)

    # 0) 数据与校验：任何训练开始前失败
    sources, target = load_experiment_data(config)
    _validate(config, sources, target)
    trace_dir = out_dir / "trace"
    trace_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "config_snapshot.json", config_snapshot(config))
    logger.info(
        "experiment_start k=%d methods=%s seeds=%s workers=%d out=%s",
        len(sources), list(config.methods), list(config.seeds), config.workers, out_dir,
    )

    # 1) (method, seed) 单元
    cells = [
        (method, seed, config.train, config.metric, sources, target, trace_dir)
        for method in config.methods
        for seed in config.seeds
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_cell_packed, cells))
    else:
        records = [run_cell(*cell) for cell in cells]
    metrics = pd.DataFrame(records, columns=["method", "seed", "metric", "value"])
    write_csv(out_dir / "metrics.csv", metrics)

    # 2) 汇总、PAD、界、显著性
    summary = summarize(metrics, config.methods)
    write_csv(out_dir / "summary.csv", summary)

    pads = pad_report(sources, target, config.pad)
    pad_df = pd.DataFrame(
        {
            "source": [s.domain_id for s in sources],
            "pad": list(pads.pads),
            "rank": [pads.rank_of(i) for i in range(len(sources))],
        }
    )
    write_csv(out_dir / "pad.csv", pad_df)

    bound = None
    if config.bound.enabled:
        result = experiment_bound(sources, target, config.bound)
        if result is not None:
            bound, extras = result
            write_kv(out_dir / "bound.txt", {**bound.to_record(), **extras})

    wilcoxon = wilcoxon_table(metrics, config.methods)
    write_csv(out_dir / "wilcoxon.csv", wilcoxon)
    logger.info("experiment_done out=%s", out_dir)
    return ExperimentResult(out_dir=out_dir, metrics=metrics, summary=summary, pad=pads, bound=bound, wilcoxon=wilcoxon)
