from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from sklearn.datasets import make_moons

from mdanlab.data.domains import LabeledDomain
from mdanlab.errors import InputError
from mdanlab.util.seeding import child_seeds

logger = logging.getLogger(__name__)

FAMILIES = ("rotated_moons", "gaussian_shift")


@dataclass(frozen=True)
class SyntheticSpec:
    """k 个源域 + 1 个目标域；params[-1] 属于目标域。

    rotated_moons: params 为绕原点的旋转角（弧度）；gaussian_shift: params 为均值平移向量。
    """

    family: str
    k: int
    params: tuple[Any, ...]
    n: int = 500
    noise: float = 0.1
    seed: int = 0
    separation: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InputError(f"unknown synthetic family {self.family!r}, expected one of {FAMILIES}")
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if len(self.params) != self.k + 1:
            raise InputError(f"expected {self.k + 1} per-domain parameters (k sources + target), got {len(self.params)}")
        if self.n < 2:
            raise InputError(f"n must be >= 2, got {self.n}")
        if self.family == "rotated_moons":
            angles = tuple(float(a) for a in self.params)
            if not np.all(np.isfinite(angles)):
                raise InputError("rotation angles must be finite")
            object.__setattr__(self, "params", angles)
        else:
            shifts = tuple(np.atleast_1d(np.asarray(p, dtype=np.float64)) for p in self.params)
            if len({s.shape for s in shifts}) != 1:
                raise InputError("all shift vectors must have the same length")
            object.__setattr__(self, "params", shifts)

    @property
    def domain_ids(self) -> list[str]:
        return [f"source{i}" for i in range(self.k)] + ["target"]


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def gen_rotated_moons(spec: SyntheticSpec) -> tuple[list[LabeledDomain], LabeledDomain]:
    if spec.family != "rotated_moons":
        raise InputError(f"spec family is {spec.family!r}, not rotated_moons")
    seeds = child_seeds(spec.seed, spec.k + 1)
    domains: list[LabeledDomain] = []
    for domain_id, angle, seed in zip(spec.domain_ids, spec.params, seeds):
        x, y = make_moons(n_samples=spec.n, noise=spec.noise, random_state=seed)
        x = x @ rotation_matrix(angle).T
        domains.append(LabeledDomain(features=x, labels=y.astype(np.int64), domain_id=domain_id))
    logger.debug("generated family=rotated_moons k=%d n=%d angles=%s", spec.k, spec.n, list(spec.params))
    return domains[:-1], domains[-1]


def gen_gaussian_shift(spec: SyntheticSpec) -> tuple[list[LabeledDomain], LabeledDomain]:
    if spec.family != "gaussian_shift":
        raise InputError(f"spec family is {spec.family!r}, not gaussian_shift")
    if spec.noise <= 0:
        raise InputError(f"noise sigma must be > 0, got {spec.noise}")
    dim = spec.params[0].shape[0]
    e1 = np.zeros(dim)
    e1[0] = 1.0
    seeds = child_seeds(spec.seed, spec.k + 1)
    domains: list[LabeledDomain] = []
    for domain_id, shift, seed in zip(spec.domain_ids, spec.params, seeds):
        rng = np.random.default_rng(seed)
        y = np.concatenate([np.zeros(spec.n // 2, dtype=np.int64), np.ones(spec.n - spec.n // 2, dtype=np.int64)])
        y = rng.permutation(y)
        means = np.where(y[:, None] == 1, spec.separation * e1, -spec.separation * e1)
        x = means + shift + spec.noise * rng.standard_normal((spec.n, dim))
        domains.append(LabeledDomain(features=x, labels=y, domain_id=domain_id))
    logger.debug("generated family=gaussian_shift k=%d n=%d dim=%d", spec.k, spec.n, dim)
    return domains[:-1], domains[-1]


def generate(spec: SyntheticSpec) -> tuple[list[LabeledDomain], LabeledDomain]:
    if spec.family == "rotated_moons":
        return gen_rotated_moons(spec)
    return gen_gaussian_shift(spec)


def spec_from_mapping(raw: dict[str, Any]) -> SyntheticSpec:
    """配置中的 synthetic 段 → SyntheticSpec；rotated_moons 可用 angles_deg 以角度书写。"""
    family = str(raw.get("family", "rotated_moons"))
    params: Sequence[Any] | None
    if "angles_deg" in raw:
        params = [np.deg2rad(float(a)) for a in raw["angles_deg"]]
    else:
        params = raw.get("angles", raw.get("shifts", raw.get("params")))
    if params is None:
        raise InputError("synthetic spec needs angles / angles_deg / shifts")
    k = int(raw.get("k", len(params) - 1))
    return SyntheticSpec(
        family=family,
        k=k,
        params=tuple(params),
        n=int(raw.get("n", 500)),
        noise=float(raw.get("noise", 0.1)),
        seed=int(raw.get("seed", 0)),
        separation=float(raw.get("separation", 1.0)),
    )
