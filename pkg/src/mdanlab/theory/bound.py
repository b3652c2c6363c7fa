from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain, features_of
from mdanlab.errors import InputError, ModeError
from mdanlab.theory.divergence import multi_discrepancy
from mdanlab.theory.hypotheses import FiniteHypothesisClass, Hypothesis, SymDiffClass

logger = logging.getLogger(__name__)


def _require_labeled(dom, what: str) -> LabeledDomain:
    if isinstance(dom, LabeledDomain):
        return dom
    if isinstance(dom, UnlabeledDomain):
        raise ModeError(f"{what} {dom.domain_id!r} is unlabeled; this quantity needs oracle labels")
    raise InputError(f"{what} must be a LabeledDomain, got {type(dom).__name__}")


def empirical_risk_01(h: Hypothesis, dom: LabeledDomain) -> float:
    dom = _require_labeled(dom, "domain")
    return float(np.mean(h.predict(dom.features) != (dom.labels == 1)))


def risk_vector(H: FiniteHypothesisClass, dom: LabeledDomain) -> np.ndarray:
    """H 中每个假设在 dom 上的 0-1 风险。"""
    dom = _require_labeled(dom, "domain")
    return (H.predict_matrix(dom.features) != (dom.labels == 1)[None, :]).mean(axis=1)


def optimal_joint_risk(H: FiniteHypothesisClass, T, sources: Sequence) -> tuple[Hypothesis, float]:
    """λ = min_h ε_T(h) + max_i ε_{S_i}(h)；并列取最小下标。"""
    T = _require_labeled(T, "target")
    if len(sources) == 0:
        raise InputError("optimal_joint_risk needs at least one source")
    worst = np.max([risk_vector(H, _require_labeled(S, "source")) for S in sources], axis=0)
    total = risk_vector(H, T) + worst
    idx = int(np.argmin(total))
    return H[idx], float(total[idx])


def erm_minmax(H: FiniteHypothesisClass, sources: Sequence) -> tuple[Hypothesis, float]:
    """最小化最坏源域经验风险的假设。"""
    if len(sources) == 0:
        raise InputError("erm_minmax needs at least one source")
    worst = np.max([risk_vector(H, _require_labeled(S, "source")) for S in sources], axis=0)
    idx = int(np.argmin(worst))
    return H[idx], float(worst[idx])


def _check_regime(k: int, m: int, d: int, delta: float) -> None:
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if d < 1:
        raise InputError(f"d must be >= 1, got {d}")
    if m < d:
        raise InputError(f"m={m} < d={d}: growth-function bound needs m >= d")
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must lie in (0, 1), got {delta}")


def conc_terms(k: int, m: int, d: int, delta: float) -> tuple[float, float]:
    """多源界中的两个复杂度项 (risk_term, disc_term)；disc_term 中 HΔH 的 VC 维取 2d。"""
    _check_regime(k, m, d, delta)
    risk = math.sqrt((1.0 / (2.0 * m)) * (math.log(4.0 * k / delta) + d * math.log(m * math.e / d)))
    disc = math.sqrt((2.0 / m) * (math.log(8.0 * k / delta) + 2.0 * d * math.log(m * math.e / (2.0 * d))))
    return risk, disc


def discrepancy_deviation(k: int, m: int, d: int, delta: float) -> float:
    """|d_H(T;{S_i}) - 经验值| 的高概率上界半径。"""
    _check_regime(k, m, d, delta)
    return 2.0 * math.sqrt((2.0 / m) * (math.log(4.0 * k / delta) + d * math.log(math.e * m / d)))


def risk_deviation(k: int, m: int, d: int, delta: float) -> float:
    """sup_h |max_i ε_{S_i}(h) - max_i 经验风险| 的高概率上界半径。"""
    _check_regime(k, m, d, delta)
    return math.sqrt((1.0 / (2.0 * m)) * (math.log(2.0 * k / delta) + d * math.log(m * math.e / d)))


@dataclass(frozen=True)
class BoundReport:
    worst_source_risk: float
    discrepancy_HdH: float
    lambda_: float | None
    risk_conc_term: float
    disc_conc_term: float
    total: float
    k: int
    m: int
    d: int
    delta: float
    lambda_available: bool
    argmax_source: int

    def __post_init__(self) -> None:
        terms = [self.worst_source_risk, self.discrepancy_HdH, self.risk_conc_term, self.disc_conc_term]
        if self.lambda_ is not None:
            terms.append(self.lambda_)
        if min(terms) < 0:
            raise InputError(f"bound terms must be non-negative, got {terms}")

    def to_record(self) -> dict[str, Any]:
        """扁平 key-value 记录，λ 不可用时写为 unavailable。"""
        record = asdict(self)
        lam = record.pop("lambda_")
        ordered: dict[str, Any] = {
            "worst_source_risk": self.worst_source_risk,
            "discrepancy_HdH": self.discrepancy_HdH,
            "lambda": "unavailable" if lam is None else lam,
            "lambda_available": self.lambda_available,
            "risk_conc_term": self.risk_conc_term,
            "disc_conc_term": self.disc_conc_term,
            "total": self.total,
        }
        for key in ("k", "m", "d", "delta", "argmax_source"):
            ordered[key] = record[key]
        return ordered


def _total(worst: float, disc: float, lam: float | None, risk_term: float, disc_term: float) -> float:
    return worst + disc / 2.0 + (lam if lam is not None else 0.0) + risk_term + disc_term


def assemble_bound(
    H: FiniteHypothesisClass,
    h: Hypothesis,
    T,
    sources: Sequence[LabeledDomain],
    *,
    target_labeled: LabeledDomain | None = None,
    delta: float = 0.05,
) -> BoundReport:
    """多源泛化界的全部项。m 取各域样本量的最小值，d 取 H 的 VC 维。"""
    if len(sources) == 0:
        raise InputError("assemble_bound needs at least one source")
    sources = [_require_labeled(S, "source") for S in sources]
    t = features_of(T)
    k = len(sources)
    m = min([t.shape[0], *[S.n for S in sources]])
    d = H.vc_dim

    disc, argmax = multi_discrepancy(SymDiffClass(H), t, sources)
    worst = max(empirical_risk_01(h, S) for S in sources)
    lam = None
    if target_labeled is not None:
        _, lam = optimal_joint_risk(H, target_labeled, sources)
    risk_term, disc_term = conc_terms(k, m, d, delta)
    report = BoundReport(
        worst_source_risk=worst,
        discrepancy_HdH=disc,
        lambda_=lam,
        risk_conc_term=risk_term,
        disc_conc_term=disc_term,
        total=_total(worst, disc, lam, risk_term, disc_term),
        k=k,
        m=m,
        d=d,
        delta=float(delta),
        lambda_available=lam is not None,
        argmax_source=argmax,
    )
    logger.info(
        "bound_assembled k=%d m=%d d=%d total=%.6f lambda_available=%s",
        k, m, d, report.total, report.lambda_available,
    )
    return report


@dataclass(frozen=True)
class SingleSourceBound:
    source_risk: float
    discrepancy_HdH: float
    lambda_: float | None
    complexity: float
    total: float
    m: int
    d: int
    delta: float

    @property
    def lambda_available(self) -> bool:
        return self.lambda_ is not None


def single_source_bound(
    H: FiniteHypothesisClass,
    h: Hypothesis,
    source: LabeledDomain,
    T,
    *,
    target_labeled: LabeledDomain | None = None,
    delta: float = 0.05,
) -> SingleSourceBound:
    """单源界：ε_S(h) + ½ d̂_HΔH + 4 sqrt((2d log(2m) + log(4/δ))/m) + λ。"""
    source = _require_labeled(source, "source")
    t = features_of(T)
    m = min(t.shape[0], source.n)
    d = H.vc_dim
    _check_regime(1, m, d, delta)
    disc, _ = multi_discrepancy(SymDiffClass(H), t, [source])
    risk = empirical_risk_01(h, source)
    complexity = 4.0 * math.sqrt((2.0 * d * math.log(2.0 * m) + math.log(4.0 / delta)) / m)
    lam = None
    if target_labeled is not None:
        _, lam = optimal_joint_risk(H, target_labeled, [source])
    total = risk + disc / 2.0 + complexity + (lam if lam is not None else 0.0)
    return SingleSourceBound(
        source_risk=risk,
        discrepancy_HdH=disc,
        lambda_=lam,
        complexity=complexity,
        total=total,
        m=m,
        d=d,
        delta=float(delta),
    )


def population_slacks(H: FiniteHypothesisClass, T: LabeledDomain, sources: Sequence[LabeledDomain]) -> np.ndarray:
    """把经验分布当作总体时，H 中每个 h 的 rhs - lhs。"""
    T = _require_labeled(T, "target")
    sources = [_require_labeled(S, "source") for S in sources]
    if not sources:
        raise InputError("population_slacks needs at least one source")
    worst = np.max([risk_vector(H, S) for S in sources], axis=0)
    target_risk = risk_vector(H, T)
    lam = float(np.min(target_risk + worst))
    disc, _ = multi_discrepancy(SymDiffClass(H), T, sources)
    return worst + lam + 0.5 * disc - target_risk


def verify_population_bound(
    H: FiniteHypothesisClass,
    h: Hypothesis,
    T: LabeledDomain,
    sources: Sequence[LabeledDomain],
) -> float:
    T = _require_labeled(T, "target")
    sources = [_require_labeled(S, "source") for S in sources]
    _, lam = optimal_joint_risk(H, T, sources)
    disc, _ = multi_discrepancy(SymDiffClass(H), T, sources)
    rhs = max(empirical_risk_01(h, S) for S in sources) + lam + 0.5 * disc
    return float(rhs - empirical_risk_01(h, T))
