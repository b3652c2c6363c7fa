from __future__ import annotations

import numpy as np
from scipy import stats

from mdanlab.errors import InputError

EXACT_MAX_N = 12


def rank_sources(pads) -> list[int]:
    """按 PAD 升序排列源域下标，相等时下标小者在前。"""
    values = np.asarray(pads, dtype=np.float64).ravel()
    if values.size < 1:
        raise InputError("rank_sources needs at least one value")
    return [int(i) for i in np.argsort(values, kind="stable")]


def _exact_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    center = n * (n + 1) / 4.0
    signs = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    dist = signs @ ranks
    observed = abs(w_plus - center)
    return float(np.mean(np.abs(dist - center) >= observed - 1e-9))


def _normal_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    center = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(counts**3 - counts)) / 48.0
    if var <= 0:
        return 1.0
    # 连续性校正
    z = max(abs(w_plus - center) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, 2.0 * stats.norm.sf(z)))


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """配对符号秩检验：统计量 min(W+, W-)，双侧 p。

    零差值剔除；|差值| 相同取平均秩。剔除后 n <= 12 时枚举全部 2^n 种符号求精确 p，否则用带结校正的正态近似。
    全部差值为零时返回 (0, 1)。
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size < 1:
        raise InputError("wilcoxon_signed_rank needs at least one pair")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        return 0.0, 1.0
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)
    p = _exact_p(ranks, w_plus) if d.size <= EXACT_MAX_N else _normal_p(ranks, w_plus)
    return statistic, max(p, float(np.finfo(np.float64).tiny))
