from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from mdanlab.data.synthetic import SyntheticSpec, spec_from_mapping
from mdanlab.errors import ConfigError, InputError

MODES = ("hard", "soft")
METHODS = (
    "source_only_combined",
    "best_single_source",
    "dann_single_best",
    "dann_combined",
    "mdan_hard",
    "mdan_soft",
)
METRICS = ("accuracy", "mae")


@dataclass(frozen=True)
class TrainConfig:
    """默认值：隐层 (1000, 500, 100)，γ=10，μ=0.1，dropout 0.7，Adam 学习率 0.01。桌面规模用 width_factor 缩小隐层。"""

    mode: str = "soft"
    gamma: float = 10.0
    mu: float = 0.1
    lr: float = 0.01
    batch: int = 20
    epochs: int = 50
    dropout: float = 0.7
    seed: int = 0
    hidden: tuple[int, ...] = (1000, 500, 100)
    width_factor: float = 1.0
    disc_hidden: tuple[int, ...] = ()
    n_classes: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        # PyYAML 把 1e-8 这类写法读成字符串，这里统一转换
        try:
            for name in ("gamma", "mu", "lr", "dropout", "width_factor", "beta1", "beta2", "eps"):
                object.__setattr__(self, name, float(getattr(self, name)))
            for name in ("batch", "epochs", "seed", "n_classes"):
                object.__setattr__(self, name, int(getattr(self, name)))
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
            object.__setattr__(self, "disc_hidden", tuple(int(h) for h in self.disc_hidden))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train value: {exc}") from exc
        if self.mode not in MODES:
            raise ConfigError(f"train.mode must be one of {MODES}, got {self.mode!r}")
        if not self.gamma > 0:
            raise ConfigError(f"train.gamma must be > 0, got {self.gamma}")
        if self.mu < 0:
            raise ConfigError(f"train.mu must be >= 0, got {self.mu}")
        if not self.lr > 0:
            raise ConfigError(f"train.lr must be > 0, got {self.lr}")
        if self.batch < 1:
            raise ConfigError(f"train.batch must be >= 1, got {self.batch}")
        if self.epochs < 0:
            raise ConfigError(f"train.epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"train.dropout must lie in [0, 1), got {self.dropout}")
        if not self.width_factor > 0:
            raise ConfigError(f"train.width_factor must be > 0, got {self.width_factor}")
        if any(h < 1 for h in (*self.hidden, *self.disc_hidden)):
            raise ConfigError("hidden layer widths must be >= 1")
        if self.n_classes < 1:
            raise ConfigError(f"train.n_classes must be >= 1, got {self.n_classes}")

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(max(1, int(round(h * self.width_factor))) for h in self.hidden)


@dataclass(frozen=True)
class ProbeConfig:
    """PAD 线性探针：标准化 + logistic 回归，固定 50/50 分层划分。"""

    C: float = 1.0
    max_iter: int = 1000
    seed: int = 0
    train_fraction: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "C", float(self.C))
        if not self.C > 0:
            raise ConfigError(f"pad.C must be > 0, got {self.C}")
        if self.max_iter < 1:
            raise ConfigError(f"pad.max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"pad.train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class BoundConfig:
    enabled: bool = True
    delta: float = 0.05
    max_points: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", float(self.delta))
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"bound.delta must lie in (0, 1), got {self.delta}")
        if self.max_points < 1:
            raise ConfigError(f"bound.max_points must be >= 1, got {self.max_points}")


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticSpec | None = None
    manifest: Path | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    methods: tuple[str, ...] = ("source_only_combined", "mdan_hard", "mdan_soft")
    metric: str = "accuracy"
    seeds: tuple[int, ...] = (0,)
    outputs_dir: Path = Path("outputs")
    workers: int = 1
    pad: ProbeConfig = field(default_factory=ProbeConfig)
    bound: BoundConfig = field(default_factory=BoundConfig)

    def __post_init__(self) -> None:
        if (self.synthetic is None) == (self.manifest is None):
            raise ConfigError("data section needs exactly one of 'synthetic' or 'manifest'")
        try:
            object.__setattr__(self, "methods", tuple(str(m) for m in self.methods))
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            object.__setattr__(self, "workers", int(self.workers))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment value: {exc}") from exc
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}, expected a subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def _section(config: dict[str, Any], name: str) -> dict[str, Any]:
    value = config.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return value


def _build(cls, raw: dict[str, Any], section: str):
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {unknown}")
    try:
        return cls(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


def train_config_from_mapping(raw: dict[str, Any]) -> TrainConfig:
    return _build(TrainConfig, dict(raw), "train")


def experiment_from_mapping(config: dict[str, Any], *, base_dir: Path) -> ExperimentConfig:
    """相对路径以配置文件所在目录为基准解析。"""
    data = _section(config, "data")
    synthetic = None
    manifest = None
    if "synthetic" in data:
        try:
            synthetic = spec_from_mapping(data["synthetic"] or {})
        except InputError as exc:
            raise ConfigError(f"data.synthetic: {exc}") from exc
    if "manifest" in data:
        manifest = Path(data["manifest"])
        if not manifest.is_absolute():
            manifest = (base_dir / manifest).resolve()

    outputs_dir = Path(config.get("outputs_dir", "outputs"))
    if not outputs_dir.is_absolute():
        outputs_dir = (base_dir / outputs_dir).resolve()

    kwargs: dict[str, Any] = {}
    for key in ("methods", "metric", "seeds", "workers"):
        if key in config:
            kwargs[key] = config[key]
    return ExperimentConfig(
        synthetic=synthetic,
        manifest=manifest,
        train=train_config_from_mapping(_section(config, "train")),
        outputs_dir=outputs_dir,
        pad=_build(ProbeConfig, _section(config, "pad"), "pad"),
        bound=_build(BoundConfig, _section(config, "bound"), "bound"),
        **kwargs,
    )


def load_config(config_path: str | Path) -> ExperimentConfig:
    config_path = Path(config_path)
    if not config_path.is_file():
        raise ConfigError(f"config not found: {config_path}")
    try:
        raw = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{config_path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return experiment_from_mapping(raw, base_dir=config_path.parent)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def config_snapshot(config: ExperimentConfig) -> dict[str, Any]:
    """解析后的完整配置，写入 config_snapshot.json。"""
    return _jsonable(asdict(config))
