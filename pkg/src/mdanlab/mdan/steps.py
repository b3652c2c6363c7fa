from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
from scipy.special import softmax

from mdanlab.config import TrainConfig
from mdanlab.errors import InputError, ModeError
from mdanlab.mdan.model import MdanModel, OptStates
from mdanlab.nn.mlp import Activations, Batch, MlpParams, backward, forward, grad_reverse, loss, params_add, params_scale
from mdanlab.nn.optim import opt_step
from mdanlab.theory.divergence import lse_max
from mdanlab.util.seeding import derive_seed


@dataclass(frozen=True)
class StepTrace:
    step: int
    mode: str
    task_losses: tuple[float, ...]
    domain_losses: tuple[float, ...]
    scores: tuple[float, ...]
    chosen: int | None = None
    weights: tuple[float, ...] | None = None
    objective: float = 0.0

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "step": self.step,
            "mode": self.mode,
            "task_losses": list(self.task_losses),
            "domain_losses": list(self.domain_losses),
            "scores": list(self.scores),
            "objective": self.objective,
        }
        if self.chosen is not None:
            record["chosen"] = self.chosen
        if self.weights is not None:
            record["weights"] = list(self.weights)
        return record


@dataclass(frozen=True)
class DomainPass:
    """源域 i 与目标批次拼接后的一次前向：[S_i; T] 共 2m 行。"""

    m: int
    source_labels: np.ndarray
    extractor_acts: Activations
    task_acts: Activations
    disc_acts: Activations
    task_loss: float
    task_grad: np.ndarray
    domain_loss: float
    domain_grad: np.ndarray


@dataclass(frozen=True)
class DomainGrads:
    extractor: MlpParams
    task_head: MlpParams
    discriminator: MlpParams


@dataclass(frozen=True)
class ScoreResult:
    scores: np.ndarray
    passes: tuple[DomainPass, ...]

    @property
    def task_losses(self) -> tuple[float, ...]:
        return tuple(p.task_loss for p in self.passes)

    @property
    def domain_losses(self) -> tuple[float, ...]:
        return tuple(p.domain_loss for p in self.passes)


def _domain_labels(m: int) -> np.ndarray:
    return np.concatenate([np.zeros(m, dtype=np.int64), np.ones(m, dtype=np.int64)])


def _check_batches(source_batches: Sequence[Batch], target_batch: Batch, k: int) -> int:
    if len(source_batches) != k:
        raise InputError(f"expected {k} source batches, got {len(source_batches)}")
    if target_batch.labels is not None:
        raise InputError("target batch must be unlabeled")
    m = target_batch.m
    for i, b in enumerate(source_batches):
        if b.labels is None:
            raise InputError(f"source batch {i} has no labels")
        if b.m != m:
            raise InputError(f"source batch {i} has {b.m} rows, target batch has {m}")
    return m


def domain_pass(
    extractor: MlpParams,
    task_head: MlpParams,
    discriminator: MlpParams,
    source: Batch,
    target: Batch,
    *,
    dropout_rate: float,
    seed: int,
) -> DomainPass:
    m = source.m
    x = np.vstack([source.features, target.features])
    ext = forward(extractor, x, dropout_rate=dropout_rate, rng_seed=seed)
    z = ext.output
    task_acts = forward(task_head, z[:m], dropout_rate=dropout_rate, rng_seed=derive_seed(seed, 1))
    disc_acts = forward(discriminator, z, dropout_rate=dropout_rate, rng_seed=derive_seed(seed, 2))
    task_loss, task_grad = loss(task_acts.output, source.labels, "softmax_xent")
    domain_loss, domain_grad = loss(disc_acts.output, _domain_labels(m), "softmax_xent")
    return DomainPass(
        m=m,
        source_labels=source.labels,
        extractor_acts=ext,
        task_acts=task_acts,
        disc_acts=disc_acts,
        task_loss=task_loss,
        task_grad=task_grad,
        domain_loss=domain_loss,
        domain_grad=domain_grad,
    )


def domain_scores(
    model: MdanModel,
    source_batches: Sequence[Batch],
    target_batch: Batch,
    *,
    mu: float = 0.1,
    dropout_rate: float = 0.0,
    step_seed: int = 0,
) -> ScoreResult:
    """ε̂_i = 任务损失_i - μ·判别损失_i；判别器 i 的损失是当前对 HΔH 内最小域分类误差的近似。"""
    _check_batches(source_batches, target_batch, model.k)
    passes = tuple(
        domain_pass(
            model.extractor,
            model.task_head,
            model.discriminators[i],
            source_batches[i],
            target_batch,
            dropout_rate=dropout_rate,
            seed=derive_seed(step_seed, i),
        )
        for i in range(model.k)
    )
    scores = np.array([p.task_loss - mu * p.domain_loss for p in passes])
    return ScoreResult(scores=scores, passes=passes)


def domain_gradients(
    extractor: MlpParams,
    task_head: MlpParams,
    discriminator: MlpParams,
    p: DomainPass,
    *,
    mu: float,
    include_task: bool = True,
) -> DomainGrads:
    """单个域的梯度：判别器对域损失下降；提取器收到任务梯度 + 经梯度反转的域梯度。"""
    g_task, g_zs = backward(task_head, p.task_acts, p.task_grad if include_task else None)
    g_disc, g_z_dom = backward(discriminator, p.disc_acts, p.domain_grad)
    g_z = np.vstack([g_zs, np.zeros_like(g_zs)]) + grad_reverse(g_z_dom, mu)
    g_ext, _ = backward(extractor, p.extractor_acts, g_z)
    return DomainGrads(extractor=g_ext, task_head=g_task, discriminator=g_disc)


def soft_weights(eps, gamma: float) -> np.ndarray:
    """w = softmax(γ·ε)，即 log-sum-exp 平滑目标对各域的梯度权重。"""
    e = np.asarray(eps, dtype=np.float64).ravel()
    if e.size < 1:
        raise InputError("soft_weights needs at least one score")
    if not gamma > 0:
        raise InputError(f"gamma must be > 0, got {gamma}")
    return softmax(gamma * e)


def _mixture(grads: Sequence[MlpParams], weights: np.ndarray) -> MlpParams:
    out = params_scale(grads[0], weights[0])
    for g, w in zip(grads[1:], weights[1:]):
        out = params_add(out, params_scale(g, w))
    return out


def _apply_shared(model: MdanModel, states: OptStates, g_ext: MlpParams, g_task: MlpParams) -> tuple[MdanModel, OptStates]:
    extractor, s_ext = opt_step(model.extractor, g_ext, states.extractor)
    task_head, s_task = opt_step(model.task_head, g_task, states.task_head)
    return replace(model, extractor=extractor, task_head=task_head), replace(states, extractor=s_ext, task_head=s_task)


def step_hard(
    model: MdanModel,
    source_batches: Sequence[Batch],
    target_batch: Batch,
    config: TrainConfig,
    opt_states: OptStates,
    *,
    step_seed: int = 0,
    step: int = 0,
) -> tuple[MdanModel, OptStates, StepTrace]:
    """只回传得分最大的域；其余判别器本步不更新。"""
    if config.mode != "hard":
        raise ModeError(f"step_hard called with mode={config.mode!r}")
    res = domain_scores(model, source_batches, target_batch, mu=config.mu, dropout_rate=config.dropout, step_seed=step_seed)
    i = int(np.argmax(res.scores))
    g = domain_gradients(model.extractor, model.task_head, model.discriminators[i], res.passes[i], mu=config.mu)

    new_model, new_states = _apply_shared(model, opt_states, g.extractor, g.task_head)
    disc, s_disc = opt_step(model.discriminators[i], g.discriminator, opt_states.discriminators[i])
    new_model = new_model.with_discriminator(i, disc)
    new_states = new_states.with_discriminator(i, s_disc)
    trace = StepTrace(
        step=step,
        mode="hard",
        task_losses=res.task_losses,
        domain_losses=res.domain_losses,
        scores=tuple(float(s) for s in res.scores),
        chosen=i,
        objective=float(res.scores[i]),
    )
    return new_model, new_states, trace


def step_soft(
    model: MdanModel,
    source_batches: Sequence[Batch],
    target_batch: Batch,
    config: TrainConfig,
    opt_states: OptStates,
    *,
    step_seed: int = 0,
    step: int = 0,
) -> tuple[MdanModel, OptStates, StepTrace]:
    """共享参数收到 Σ w_i ∂ε̂_i/∂θ；每个判别器都按自身域损失更新。"""
    if config.mode != "soft":
        raise ModeError(f"step_soft called with mode={config.mode!r}")
    res = domain_scores(model, source_batches, target_batch, mu=config.mu, dropout_rate=config.dropout, step_seed=step_seed)
    w = soft_weights(res.scores, config.gamma)
    grads = [
        domain_gradients(model.extractor, model.task_head, model.discriminators[i], res.passes[i], mu=config.mu)
        for i in range(model.k)
    ]
    g_ext = _mixture([g.extractor for g in grads], w)
    g_task = _mixture([g.task_head for g in grads], w)

    new_model, new_states = _apply_shared(model, opt_states, g_ext, g_task)
    for i, g in enumerate(grads):
        disc, s_disc = opt_step(model.discriminators[i], g.discriminator, opt_states.discriminators[i])
        new_model = new_model.with_discriminator(i, disc)
        new_states = new_states.with_discriminator(i, s_disc)
    trace = StepTrace(
        step=step,
        mode="soft",
        task_losses=res.task_losses,
        domain_losses=res.domain_losses,
        scores=tuple(float(s) for s in res.scores),
        weights=tuple(float(x) for x in w),
        objective=lse_max(res.scores, config.gamma),
    )
    return new_model, new_states, trace


def smoothed_objective(
    model: MdanModel,
    source_batches: Sequence[Batch],
    target_batch: Batch,
    config: TrainConfig,
    *,
    step_seed: int = 0,
) -> float:
    """(1/γ) log Σ exp(γ ε̂_i)，step_soft 的共享参数梯度即此标量的梯度。"""
    res = domain_scores(model, source_batches, target_batch, mu=config.mu, dropout_rate=config.dropout, step_seed=step_seed)
    return lse_max(res.scores, config.gamma)


def dann_step(
    model: MdanModel,
    source_batch: Batch,
    target_batch: Batch,
    config: TrainConfig,
    opt_states: OptStates,
    *,
    step_seed: int = 0,
    step: int = 0,
) -> tuple[MdanModel, OptStates, StepTrace]:
    """单源 DANN 参考步：一次前向，梯度反转，三组参数同时更新。"""
    if model.k != 1:
        raise InputError(f"dann_step needs a single discriminator, model has {model.k}")
    if target_batch.labels is not None:
        raise InputError("target batch must be unlabeled")
    if source_batch.m != target_batch.m:
        raise InputError(f"source batch has {source_batch.m} rows, target batch has {target_batch.m}")
    m = source_batch.m
    seed = derive_seed(step_seed, 0)
    disc = model.discriminators[0]

    x = np.vstack([source_batch.features, target_batch.features])
    ext = forward(model.extractor, x, dropout_rate=config.dropout, rng_seed=seed)
    z = ext.output
    task_acts = forward(model.task_head, z[:m], dropout_rate=config.dropout, rng_seed=derive_seed(seed, 1))
    disc_acts = forward(disc, z, dropout_rate=config.dropout, rng_seed=derive_seed(seed, 2))
    task_loss, task_grad = loss(task_acts.output, source_batch.labels, "softmax_xent")
    domain_loss, domain_grad = loss(disc_acts.output, _domain_labels(m), "softmax_xent")

    g_task, g_zs = backward(model.task_head, task_acts, task_grad)
    g_disc, g_z_dom = backward(disc, disc_acts, domain_grad)
    g_z = np.vstack([g_zs, np.zeros_like(g_zs)]) + grad_reverse(g_z_dom, config.mu)
    g_ext, _ = backward(model.extractor, ext, g_z)

    extractor, s_ext = opt_step(model.extractor, g_ext, opt_states.extractor)
    task_head, s_task = opt_step(model.task_head, g_task, opt_states.task_head)
    new_disc, s_disc = opt_step(disc, g_disc, opt_states.discriminators[0])
    new_model = replace(model, extractor=extractor, task_head=task_head, discriminators=(new_disc,))
    new_states = replace(opt_states, extractor=s_ext, task_head=s_task, discriminators=(s_disc,))
    score = task_loss - config.mu * domain_loss
    trace = StepTrace(
        step=step,
        mode="dann",
        task_losses=(task_loss,),
        domain_losses=(domain_loss,),
        scores=(score,),
        chosen=0,
        objective=score,
    )
    return new_model, new_states, trace
