from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from mdanlab.data.domains import features_of
from mdanlab.errors import InputError
from mdanlab.theory.hypotheses import FiniteHypothesisClass, SymDiffClass

logger = logging.getLogger(__name__)

HypothesisSet = Union[FiniteHypothesisClass, SymDiffClass]


def _pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    a = features_of(A)
    b = features_of(B)
    if a.shape[1] != b.shape[1]:
        raise InputError(f"sample dims differ: {a.shape[1]} vs {b.shape[1]}")
    return a, b


def h_divergence(H: HypothesisSet, A, B) -> float:
    """经验 H 散度：2 * max_h |P_A(h=1) - P_B(h=1)|，取值 [0, 2]。"""
    a, b = _pair(A, B)
    gap = np.abs(H.positive_rates(a) - H.positive_rates(b))
    return float(min(2.0, 2.0 * gap.max()))


def multi_discrepancy(H: HypothesisSet, T, sources: Sequence) -> tuple[float, int]:
    """max_i d_H(T, S_i) 及其下标；并列时取最小下标。"""
    if len(sources) == 0:
        raise InputError("multi_discrepancy needs at least one source")
    values = [h_divergence(H, T, S) for S in sources]
    idx = int(np.argmax(values))
    return float(values[idx]), idx


@dataclass(frozen=True)
class IdentityResult:
    value: float
    per_source: tuple[float, ...]
    min_errors: tuple[float, ...]
    # source 下标 -> (目标子样本下标, 源子样本下标)；None 表示未抽样
    subsamples: dict[int, tuple[np.ndarray | None, np.ndarray | None]] = field(default_factory=dict)


def _equalize(t: np.ndarray, s: np.ndarray, rng: np.random.Generator):
    m = min(t.shape[0], s.shape[0])
    t_idx = s_idx = None
    if t.shape[0] > m:
        t_idx = np.sort(rng.choice(t.shape[0], size=m, replace=False))
        t = t[t_idx]
    if s.shape[0] > m:
        s_idx = np.sort(rng.choice(s.shape[0], size=m, replace=False))
        s = s[s_idx]
    return t, s, t_idx, s_idx


def disc_error_identity(H: FiniteHypothesisClass, T, sources: Sequence, *, seed: int = 0) -> IdentityResult:
    """把 HΔH 散度写成域判别的平衡误差：value = max_i 2 * (1 - 2 * min_err_i)。

    域样本量不同时对较大一方做无放回抽样（由 seed 决定），抽样下标记录在结果中。
    """
    if len(sources) == 0:
        raise InputError("disc_error_identity needs at least one source")
    t_all = features_of(T)
    pooled = np.vstack([t_all, *[features_of(S) for S in sources]])
    if not H.is_complement_closed(pooled):
        raise InputError("hypothesis class is not closed under complement on the pooled sample")

    rng = np.random.default_rng(seed)
    hdh = SymDiffClass(H)
    per_source: list[float] = []
    min_errors: list[float] = []
    subsamples: dict[int, tuple[np.ndarray | None, np.ndarray | None]] = {}
    for i, S in enumerate(sources):
        t, s = _pair(t_all, S)
        t, s, t_idx, s_idx = _equalize(t, s, rng)
        if t.shape[0] != s.shape[0]:
            raise InputError(f"source {i}: sizes differ after subsampling ({t.shape[0]} vs {s.shape[0]})")
        if t_idx is not None or s_idx is not None:
            subsamples[i] = (t_idx, s_idx)
            logger.debug("disc_identity_subsample source=%d m=%d", i, t.shape[0])
        # 判别器把 h=1 判为源域：err = ½·P_T(h=1) + ½·P_S(h=0)
        err = 0.5 - 0.5 * (hdh.positive_rates(s) - hdh.positive_rates(t))
        best = float(err.min())
        min_errors.append(best)
        per_source.append(2.0 * (1.0 - 2.0 * best))
    return IdentityResult(
        value=max(per_source),
        per_source=tuple(per_source),
        min_errors=tuple(min_errors),
        subsamples=subsamples,
    )


def lse_max(values, gamma: float) -> float:
    """log-sum-exp 平滑最大值 (1/γ) log Σ exp(γ v_i)，满足 max ≤ lse ≤ max + log(k)/γ。"""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 1:
        raise InputError("lse_max needs at least one value")
    if not gamma > 0:
        raise InputError(f"gamma must be > 0, got {gamma}")
    vmax = float(v.max())
    return vmax + float(logsumexp(gamma * (v - vmax))) / gamma
