from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain, features_of
from mdanlab.errors import InputError


@dataclass(frozen=True)
class Stump:
    """polarity=+1: h(x)=1[x_f > t]；polarity=-1: h(x)=1[x_f <= t]。两者互为补。"""

    feature: int
    threshold: float
    polarity: int = 1

    def predict(self, x: np.ndarray) -> np.ndarray:
        col = np.asarray(x, dtype=np.float64)[:, self.feature]
        return col > self.threshold if self.polarity > 0 else col <= self.threshold

    def complement(self) -> Stump:
        return Stump(feature=self.feature, threshold=self.threshold, polarity=-self.polarity)


@dataclass(frozen=True)
class Constant:
    value: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(x).shape[0], bool(self.value))

    def complement(self) -> Constant:
        return Constant(value=1 - int(self.value))


Hypothesis = Union[Stump, Constant]


def stump_vc_dim(dim: int) -> int:
    """轴对齐阈值桩（含常数）的 VC 维：最大的 n 使 2^n <= 2 + 2*dim*(n-1)。dim=1 时精确为 2。"""
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    n = 1
    while 2 ** (n + 1) <= 2 + 2 * dim * n:
        n += 1
    return n


@dataclass(frozen=True)
class FiniteHypothesisClass:
    hypotheses: tuple[Hypothesis, ...]
    vc_dim: int

    def __post_init__(self) -> None:
        if not self.hypotheses:
            raise InputError("hypothesis class must be non-empty")
        if self.vc_dim < 1:
            raise InputError(f"vc_dim must be >= 1, got {self.vc_dim}")

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __getitem__(self, idx: int) -> Hypothesis:
        return self.hypotheses[idx]

    def predict_matrix(self, x) -> np.ndarray:
        """形状 (|H|, n) 的布尔预测矩阵。"""
        x = features_of(x)
        return np.vstack([h.predict(x) for h in self.hypotheses])

    def positive_rates(self, x, weights: np.ndarray | None = None) -> np.ndarray:
        preds = self.predict_matrix(x)
        if weights is None:
            return preds.sum(axis=1) / preds.shape[1]
        return preds.astype(np.float64) @ np.asarray(weights, dtype=np.float64)

    def is_complement_closed(self, x) -> bool:
        preds = self.predict_matrix(x)
        behaviours = {row.tobytes() for row in preds}
        return all((~row).tobytes() in behaviours for row in preds)

    def dedup(self, x) -> FiniteHypothesisClass:
        preds = self.predict_matrix(x)
        seen: set[bytes] = set()
        keep: list[Hypothesis] = []
        for h, row in zip(self.hypotheses, preds):
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                keep.append(h)
        return FiniteHypothesisClass(hypotheses=tuple(keep), vc_dim=self.vc_dim)


def enumerate_stumps(sample, *, dedup: bool = True, vc_dim: int | None = None) -> FiniteHypothesisClass:
    """阈值取每维排序后相邻不同取值的中点，外加 ±inf 哨兵；两种极性；再加两个常数分类器。"""
    if not isinstance(sample, (LabeledDomain, UnlabeledDomain)) and np.size(sample) == 0:
        raise InputError("cannot enumerate stumps on an empty sample")
    x = np.asarray(features_of(sample), dtype=np.float64)
    hypotheses: list[Hypothesis] = []
    for f in range(x.shape[1]):
        vals = np.unique(x[:, f])
        thresholds = np.concatenate([[-np.inf], (vals[:-1] + vals[1:]) / 2.0, [np.inf]])
        for t in thresholds:
            for polarity in (1, -1):
                hypotheses.append(Stump(feature=f, threshold=float(t), polarity=polarity))
    hypotheses.extend([Constant(0), Constant(1)])
    H = FiniteHypothesisClass(hypotheses=tuple(hypotheses), vc_dim=vc_dim or stump_vc_dim(x.shape[1]))
    return H.dedup(x) if dedup else H


@dataclass(frozen=True)
class SymDiffClass:
    """HΔH：所有 (h, h') 对的异或，按 i <= j 的上三角枚举（异或对称），包含 h=h' 的全零谓词。"""

    base: FiniteHypothesisClass

    def __len__(self) -> int:
        n = len(self.base)
        return n * (n + 1) // 2

    @property
    def vc_dim(self) -> int:
        return 2 * self.base.vc_dim

    @property
    def pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.triu_indices(len(self.base))
        return list(zip(rows.tolist(), cols.tolist()))

    def predict_matrix(self, x) -> np.ndarray:
        preds = self.base.predict_matrix(x)
        rows, cols = np.triu_indices(len(self.base))
        return preds[rows] ^ preds[cols]

    def positive_rates(self, x, weights: np.ndarray | None = None) -> np.ndarray:
        # P(h xor h' = 1) = P(h) + P(h') - 2 P(h and h')，用 Gram 矩阵一次算完所有对
        preds = self.base.predict_matrix(x)
        rows, cols = np.triu_indices(len(self.base))
        if weights is None:
            b = preds.astype(np.int64)
            counts = b.sum(axis=1)
            both = b @ b.T
            xor_counts = counts[:, None] + counts[None, :] - 2 * both
            return xor_counts[rows, cols] / preds.shape[1]
        w = np.asarray(weights, dtype=np.float64)
        b = preds.astype(np.float64)
        single = b @ w
        both = (b * w) @ b.T
        return (single[:, None] + single[None, :] - 2.0 * both)[rows, cols]
