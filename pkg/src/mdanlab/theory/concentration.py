from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from mdanlab.errors import InputError
from mdanlab.theory.bound import discrepancy_deviation, risk_deviation
from mdanlab.theory.hypotheses import FiniteHypothesisClass

logger = logging.getLogger(__name__)

STATISTICS = ("discrepancy", "risk")


def _as_probs(p, n: int, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.shape != (n,):
        raise InputError(f"{what}: expected {n} probabilities, got shape {p.shape}")
    if (p < 0).any() or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise InputError(f"{what}: probabilities must be non-negative and sum to 1")
    return p / p.sum()


@dataclass(frozen=True)
class DiscreteDomainSpec:
    """有限支撑上的目标分布与 k 个源分布；总体散度与风险可精确计算。

    source_labels[i] 给出源域 i 在每个支撑点上的标签（确定性标注函数）。
    """

    support: np.ndarray
    target_probs: np.ndarray
    source_probs: tuple[np.ndarray, ...]
    source_labels: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.support, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise InputError(f"support must be a non-empty (n, dim) array, got {x.shape}")
        n = x.shape[0]
        if not self.source_probs:
            raise InputError("need at least one source distribution")
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "target_probs", _as_probs(self.target_probs, n, "target"))
        object.__setattr__(
            self, "source_probs", tuple(_as_probs(p, n, f"source {i}") for i, p in enumerate(self.source_probs))
        )
        if self.source_labels is not None:
            labels = tuple(np.asarray(y).astype(bool) for y in self.source_labels)
            if len(labels) != len(self.source_probs) or any(y.shape != (n,) for y in labels):
                raise InputError("source_labels must give one label per support point for every source")
            object.__setattr__(self, "source_labels", labels)

    @property
    def k(self) -> int:
        return len(self.source_probs)


def _discrepancy(preds: np.ndarray, pt: np.ndarray, ps: list[np.ndarray]) -> float:
    rt = preds @ pt
    return float(max(2.0 * np.abs(rt - preds @ p).max() for p in ps))


def _worst_risk(errors: list[np.ndarray], ps: list[np.ndarray]) -> np.ndarray:
    return np.max([e @ p for e, p in zip(errors, ps)], axis=0)


def concentration_mc(
    spec: DiscreteDomainSpec,
    H: FiniteHypothesisClass,
    *,
    m: int,
    d: int | None = None,
    delta: float = 0.05,
    trials: int = 2000,
    seed: int = 0,
    statistic: str = "discrepancy",
) -> float:
    """蒙特卡洛：每次从各分布独立抽 m 个点，统计 |总体 - 经验| 超过偏差半径的比例。

    statistic="discrepancy" 检查多源 H 散度；statistic="risk" 检查 sup_h |最坏源风险偏差|。
    """
    if statistic not in STATISTICS:
        raise InputError(f"unknown statistic {statistic!r}, expected one of {STATISTICS}")
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    d = H.vc_dim if d is None else d
    k = spec.k
    preds = H.predict_matrix(spec.support).astype(np.float64)
    rng = np.random.default_rng(seed)

    if statistic == "discrepancy":
        radius = discrepancy_deviation(k, m, d, delta)
        population = _discrepancy(preds, spec.target_probs, list(spec.source_probs))
    else:
        if spec.source_labels is None:
            raise InputError("statistic='risk' needs source_labels")
        radius = risk_deviation(k, m, d, delta)
        errors = [(preds != y[None, :]).astype(np.float64) for y in spec.source_labels]
        population_risk = _worst_risk(errors, list(spec.source_probs))

    violations = 0
    for _ in range(trials):
        emp_sources = [rng.multinomial(m, p) / m for p in spec.source_probs]
        if statistic == "discrepancy":
            emp_target = rng.multinomial(m, spec.target_probs) / m
            deviation = abs(population - _discrepancy(preds, emp_target, emp_sources))
        else:
            deviation = float(np.abs(population_risk - _worst_risk(errors, emp_sources)).max())
        if deviation > radius:
            violations += 1

    rate = violations / trials
    logger.info(
        "concentration_mc statistic=%s k=%d m=%d d=%d delta=%.3f radius=%.4f violation_rate=%.4f",
        statistic, k, m, d, delta, radius, rate,
    )
    return rate
