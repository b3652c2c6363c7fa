from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import balanced_accuracy_score
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from mdanlab.config import ProbeConfig
from mdanlab.data.domains import features_of
from mdanlab.errors import InputError
from mdanlab.eval.stats import rank_sources

logger = logging.getLogger(__name__)


def pad(source, target, probe: ProbeConfig | None = None) -> float:
    """代理 A 距离：线性 logistic 探针区分两域，PAD = 2(1 - 2·err) 截断到 [0, 2]，err 为留出集平衡误差。"""
    probe = probe or ProbeConfig()
    xs = features_of(source)
    xt = features_of(target)
    if xs.shape[1] != xt.shape[1]:
        raise InputError(f"sample dims differ: {xs.shape[1]} vs {xt.shape[1]}")
    if xs.shape[0] < 2 or xt.shape[0] < 2:
        raise InputError("PAD needs at least two points per domain")

    x = np.vstack([xs, xt])
    y = np.concatenate([np.zeros(xs.shape[0], dtype=np.int64), np.ones(xt.shape[0], dtype=np.int64)])
    x_train, x_test, y_train, y_test = train_test_split(
        x, y, train_size=probe.train_fraction, stratify=y, random_state=probe.seed
    )
    clf = make_pipeline(StandardScaler(), LogisticRegression(C=probe.C, max_iter=probe.max_iter))
    clf.fit(x_train, y_train)
    err = 1.0 - balanced_accuracy_score(y_test, clf.predict(x_test))
    value = float(np.clip(2.0 * (1.0 - 2.0 * err), 0.0, 2.0))
    logger.debug("pad n_source=%d n_target=%d err=%.4f pad=%.4f", xs.shape[0], xt.shape[0], err, value)
    return value


@dataclass(frozen=True)
class PadReport:
    pads: tuple[float, ...]
    ranking: tuple[int, ...]

    def rank_of(self, source: int) -> int:
        return self.ranking.index(source)


def pad_report(sources: Sequence, target, probe: ProbeConfig | None = None) -> PadReport:
    if not sources:
        raise InputError("pad_report needs at least one source")
    pads = tuple(pad(s, target, probe) for s in sources)
    report = PadReport(pads=pads, ranking=tuple(rank_sources(pads)))
    logger.info("pad_report pads=%s ranking=%s", [round(p, 4) for p in pads], list(report.ranking))
    return report
