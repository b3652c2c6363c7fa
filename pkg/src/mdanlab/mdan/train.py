from __future__ import annotations

import json
import logging
import math
from contextlib import nullcontext
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import softmax

from mdanlab.config import METRICS, TrainConfig
from mdanlab.data.domains import LabeledDomain, UnlabeledDomain
from mdanlab.data.sampler import minibatch_iter
from mdanlab.errors import InputError, ModeError
from mdanlab.mdan.model import MdanModel, OptStates, TaskNetwork, save_model
from mdanlab.mdan.steps import StepTrace, dann_step, step_hard, step_soft
from mdanlab.nn.mlp import predict_logits
from mdanlab.util.seeding import child_seeds, derive_seed

logger = logging.getLogger(__name__)


def steps_per_epoch(sources: Sequence[LabeledDomain], batch: int) -> int:
    """一个 epoch 覆盖最大源域一遍。"""
    return max(1, math.ceil(max(d.n for d in sources) / batch))


def _check_target(target) -> UnlabeledDomain:
    if isinstance(target, LabeledDomain):
        raise ModeError("training target must be unlabeled; pass target.unlabeled()")
    if not isinstance(target, UnlabeledDomain):
        raise InputError(f"target must be an UnlabeledDomain, got {type(target).__name__}")
    return target


def _check_sources(sources: Sequence[LabeledDomain], dim: int) -> None:
    if not sources:
        raise InputError("need at least one source domain")
    for i, s in enumerate(sources):
        if s.dim != dim:
            raise InputError(f"source {i} has dim {s.dim}, model expects {dim}")


def run_adversarial(
    model: MdanModel,
    sources: Sequence[LabeledDomain],
    target: UnlabeledDomain,
    config: TrainConfig,
    step_fn: Callable[..., tuple[MdanModel, OptStates, StepTrace]],
    *,
    trace_path: str | Path | None = None,
    label: str = "mdan",
) -> tuple[MdanModel, list[StepTrace]]:
    """对抗训练外层循环：每步各源域取 m 个有标签样本，目标域取 m 个无标签样本。"""
    target = _check_target(target)
    _check_sources(sources, model.in_dim)
    if target.dim != model.in_dim:
        raise InputError(f"target has dim {target.dim}, model expects {model.in_dim}")
    history: list[StepTrace] = []
    if config.epochs == 0:
        return model, history

    sampler_seed, step_root = child_seeds(config.seed, 2)
    batches = minibatch_iter(sources, target, config.batch, sampler_seed)
    states = OptStates.for_model(model, config)
    per_epoch = steps_per_epoch(sources, config.batch)

    if trace_path is not None:
        trace_path = Path(trace_path)
        trace_path.parent.mkdir(parents=True, exist_ok=True)
    with open(trace_path, "w", encoding="utf-8") if trace_path is not None else nullcontext() as fh:
        step = 0
        for epoch in range(config.epochs):
            start = len(history)
            for _ in range(per_epoch):
                source_batches, target_batch = next(batches)
                model, states, trace = step_fn(
                    model, source_batches, target_batch, config, states,
                    step_seed=derive_seed(step_root, step), step=step,
                )
                history.append(trace)
                if fh is not None:
                    fh.write(json.dumps(trace.to_record()) + "\n")
                step += 1
            epoch_traces = history[start:]
            logger.info(
                "epoch_done method=%s epoch=%d steps=%d task_loss=%.4f domain_loss=%.4f objective=%.4f",
                label,
                epoch + 1,
                len(epoch_traces),
                float(np.mean([np.mean(t.task_losses) for t in epoch_traces])),
                float(np.mean([np.mean(t.domain_losses) for t in epoch_traces])),
                float(np.mean([t.objective for t in epoch_traces])),
            )
    return model, history


def train(
    model: MdanModel,
    sources: Sequence[LabeledDomain],
    target: UnlabeledDomain,
    config: TrainConfig,
    *,
    trace_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
) -> tuple[MdanModel, list[StepTrace]]:
    if len(sources) != model.k:
        raise InputError(f"model has {model.k} discriminators but {len(sources)} sources were given")
    step_fn = step_hard if config.mode == "hard" else step_soft
    model, history = run_adversarial(model, sources, target, config, step_fn, trace_path=trace_path, label=f"mdan_{config.mode}")
    if checkpoint_path is not None:
        save_model(checkpoint_path, model)
        logger.info("checkpoint_saved path=%s", checkpoint_path)
    return model, history


def _dann_adapter(model, source_batches, target_batch, config, states, *, step_seed, step):
    return dann_step(model, source_batches[0], target_batch, config, states, step_seed=step_seed, step=step)


def train_dann(
    model: MdanModel,
    source: LabeledDomain,
    target: UnlabeledDomain,
    config: TrainConfig,
    *,
    trace_path: str | Path | None = None,
) -> tuple[MdanModel, list[StepTrace]]:
    if model.k != 1:
        raise InputError(f"DANN needs a single discriminator, model has {model.k}")
    return run_adversarial(model, [source], target, config, _dann_adapter, trace_path=trace_path, label="dann")


def predict(model: TaskNetwork, features) -> tuple[np.ndarray, np.ndarray]:
    """返回 (预测类别, 类别概率)。推理时不启用 dropout。"""
    x = features.features if isinstance(features, (LabeledDomain, UnlabeledDomain)) else np.asarray(features, dtype=np.float64)
    logits = predict_logits(model.task_head, predict_logits(model.extractor, x))
    probs = softmax(logits, axis=1)
    return np.argmax(logits, axis=1), probs


def evaluate(model: TaskNetwork, dom: LabeledDomain, metric: str = "accuracy") -> float:
    """accuracy 要求整数标签；mae 用期望类别值 Σ c·p_c 与标签比较。"""
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}, expected one of {METRICS}")
    if not isinstance(dom, LabeledDomain):
        raise ModeError("evaluation needs labels; use target.oracle() for the target domain")
    labels = np.asarray(dom.labels, dtype=np.float64)
    pred, probs = predict(model, dom.features)
    if metric == "accuracy":
        if not np.all(np.mod(labels, 1) == 0):
            raise InputError("accuracy needs integer class labels")
        return float(np.mean(pred == labels.astype(np.int64)))
    expected = probs @ np.arange(probs.shape[1], dtype=np.float64)
    return float(np.mean(np.abs(expected - labels)))
