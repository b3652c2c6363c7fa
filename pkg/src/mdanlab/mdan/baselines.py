from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from mdanlab.config import TrainConfig
from mdanlab.data.domains import LabeledDomain, combine_domains
from mdanlab.data.sampler import labeled_batches
from mdanlab.errors import InputError
from mdanlab.mdan.model import OptStates, TaskNetwork, build_task_network
from mdanlab.nn.mlp import backward, forward, loss
from mdanlab.nn.optim import opt_step
from mdanlab.util.seeding import child_seeds, derive_seed

logger = logging.getLogger(__name__)


def source_only_step(
    net: TaskNetwork,
    batch,
    config: TrainConfig,
    states: OptStates,
    *,
    step_seed: int = 0,
) -> tuple[TaskNetwork, OptStates, float]:
    ext = forward(net.extractor, batch.features, dropout_rate=config.dropout, rng_seed=step_seed)
    head = forward(net.task_head, ext.output, dropout_rate=config.dropout, rng_seed=derive_seed(step_seed, 1))
    value, g_logits = loss(head.output, batch.labels, "softmax_xent")
    g_head, g_z = backward(net.task_head, head, g_logits)
    g_ext, _ = backward(net.extractor, ext, g_z)
    extractor, s_ext = opt_step(net.extractor, g_ext, states.extractor)
    task_head, s_task = opt_step(net.task_head, g_head, states.task_head)
    return (
        TaskNetwork(extractor=extractor, task_head=task_head),
        replace(states, extractor=s_ext, task_head=s_task),
        value,
    )


def train_source_only(
    sources: Sequence[LabeledDomain],
    config: TrainConfig,
    *,
    seed: int | None = None,
) -> tuple[TaskNetwork, list[float]]:
    """只在（合并后的）源域上做任务训练，不构造判别器，也不看目标域。"""
    if not sources:
        raise InputError("need at least one source domain")
    data = sources[0] if len(sources) == 1 else combine_domains(list(sources), domain_id="combined")
    seed = config.seed if seed is None else seed
    init_seed, sampler_seed, step_root = child_seeds(seed, 3)
    net = build_task_network(data.dim, config, seed=init_seed)
    states = OptStates.for_model(net, config)
    losses: list[float] = []
    if config.epochs == 0:
        return net, losses

    per_epoch = max(1, math.ceil(data.n / config.batch))
    batches = labeled_batches(data, config.batch, sampler_seed)
    step = 0
    for epoch in range(config.epochs):
        start = len(losses)
        for _ in range(per_epoch):
            net, states, value = source_only_step(net, next(batches), config, states, step_seed=derive_seed(step_root, step))
            losses.append(value)
            step += 1
        logger.info("epoch_done method=source_only epoch=%d task_loss=%.4f", epoch + 1, float(np.mean(losses[start:])))
    return net, losses
