from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mdanlab.errors import InputError, ModeError, ShapeError


def _as_features(features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"domain features must be a non-empty (n, dim) array, got {x.shape}")
    if not np.isfinite(x).all():
        raise InputError("domain features contain NaN/Inf")
    return x


@dataclass(frozen=True)
class LabeledDomain:
    features: np.ndarray
    labels: np.ndarray
    domain_id: str = "domain"

    def __post_init__(self) -> None:
        x = _as_features(self.features)
        y = np.asarray(self.labels)
        if y.shape != (x.shape[0],):
            raise ShapeError(f"labels shape {y.shape} != ({x.shape[0]},)")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def unlabeled(self) -> UnlabeledDomain:
        """隐藏标签：训练端只能拿到特征，评估端通过 oracle() 取回。"""
        return UnlabeledDomain(features=self.features, domain_id=self.domain_id, _oracle_labels=self.labels)

    def subset(self, indices: np.ndarray) -> LabeledDomain:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDomain(features=self.features[idx], labels=self.labels[idx], domain_id=self.domain_id)


@dataclass(frozen=True)
class UnlabeledDomain:
    features: np.ndarray
    domain_id: str = "target"
    _oracle_labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        x = _as_features(self.features)
        object.__setattr__(self, "features", x)
        if self._oracle_labels is not None:
            y = np.asarray(self._oracle_labels)
            if y.shape != (x.shape[0],):
                raise ShapeError(f"oracle labels shape {y.shape} != ({x.shape[0]},)")
            object.__setattr__(self, "_oracle_labels", y)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def has_oracle(self) -> bool:
        return self._oracle_labels is not None

    def oracle(self) -> LabeledDomain:
        if self._oracle_labels is None:
            raise ModeError(f"domain {self.domain_id!r} has no oracle labels")
        return LabeledDomain(features=self.features, labels=self._oracle_labels, domain_id=self.domain_id)


def combine_domains(domains: list[LabeledDomain], *, domain_id: str = "combined") -> LabeledDomain:
    if not domains:
        raise InputError("cannot combine an empty list of domains")
    return LabeledDomain(
        features=np.vstack([d.features for d in domains]),
        labels=np.concatenate([d.labels for d in domains]),
        domain_id=domain_id,
    )


def features_of(domain: LabeledDomain | UnlabeledDomain | np.ndarray) -> np.ndarray:
    if isinstance(domain, (LabeledDomain, UnlabeledDomain)):
        return domain.features
    return _as_features(domain)
