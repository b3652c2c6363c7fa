from __future__ import annotations

from dataclasses import dataclass, replace

from mdanlab.config import TrainConfig
from mdanlab.errors import InputError, ShapeError
from mdanlab.nn.checkpoint import load_params, save_params
from mdanlab.nn.mlp import MlpParams, init_mlp
from mdanlab.nn.optim import AdamState
from mdanlab.util.seeding import child_seeds

DOMAIN_LOGITS = 2  # 判别器输出：0 = 源域，1 = 目标域


@dataclass(frozen=True)
class TaskNetwork:
    """特征提取器 + 任务头；source-only 基线只用到这一部分。"""

    extractor: MlpParams
    task_head: MlpParams

    def __post_init__(self) -> None:
        if self.task_head.in_dim != self.extractor.out_dim:
            raise ShapeError(f"task head in_dim {self.task_head.in_dim} != extractor out_dim {self.extractor.out_dim}")

    @property
    def in_dim(self) -> int:
        return self.extractor.in_dim

    @property
    def n_classes(self) -> int:
        return self.task_head.out_dim

    def groups(self) -> dict[str, MlpParams]:
        return {"extractor": self.extractor, "task_head": self.task_head}


@dataclass(frozen=True)
class MdanModel(TaskNetwork):
    discriminators: tuple[MlpParams, ...] = ()

    def __post_init__(self) -> None:
        super().__post_init__()
        object.__setattr__(self, "discriminators", tuple(self.discriminators))
        if not self.discriminators:
            raise InputError("MdanModel needs at least one discriminator (k >= 1)")
        for i, disc in enumerate(self.discriminators):
            if disc.in_dim != self.extractor.out_dim:
                raise ShapeError(f"discriminator {i} in_dim {disc.in_dim} != extractor out_dim {self.extractor.out_dim}")
            if disc.out_dim != DOMAIN_LOGITS:
                raise ShapeError(f"discriminator {i} must output {DOMAIN_LOGITS} logits, got {disc.out_dim}")

    @property
    def k(self) -> int:
        return len(self.discriminators)

    def with_discriminator(self, i: int, params: MlpParams) -> MdanModel:
        discs = list(self.discriminators)
        discs[i] = params
        return replace(self, discriminators=tuple(discs))

    def groups(self) -> dict[str, MlpParams]:
        out = super().groups()
        for i, disc in enumerate(self.discriminators):
            out[f"discriminator{i}"] = disc
        return out

    @classmethod
    def from_groups(cls, groups: dict[str, MlpParams]) -> MdanModel:
        try:
            extractor = groups["extractor"]
            task_head = groups["task_head"]
        except KeyError as exc:
            raise InputError(f"checkpoint is missing group {exc.args[0]!r}") from exc
        k = sum(1 for name in groups if name.startswith("discriminator"))
        discs = tuple(groups[f"discriminator{i}"] for i in range(k))
        return cls(extractor=extractor, task_head=task_head, discriminators=discs)


def build_task_network(in_dim: int, config: TrainConfig, *, seed: int) -> TaskNetwork:
    s_ext, s_task = child_seeds(seed, 2)
    sizes = [in_dim, *config.hidden_sizes]
    if len(sizes) < 2:
        raise InputError("extractor needs at least one hidden layer")
    extractor = init_mlp(sizes, seed=s_ext, role="extractor", output_activation="relu")
    task_head = init_mlp([sizes[-1], config.n_classes], seed=s_task, role="task")
    return TaskNetwork(extractor=extractor, task_head=task_head)


def build_model(in_dim: int, k: int, config: TrainConfig, *, seed: int) -> MdanModel:
    """提取器与任务头的初始化与 build_task_network 相同种子派生，判别器各自独立派生。"""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    s_net, s_disc = child_seeds(seed, 2)
    net = build_task_network(in_dim, config, seed=s_net)
    feat = net.extractor.out_dim
    discs = tuple(
        init_mlp([feat, *config.disc_hidden, DOMAIN_LOGITS], seed=s, role="discriminator")
        for s in child_seeds(s_disc, k)
    )
    return MdanModel(extractor=net.extractor, task_head=net.task_head, discriminators=discs)


@dataclass(frozen=True)
class OptStates:
    """每个参数组一个 Adam 状态。"""

    extractor: AdamState
    task_head: AdamState
    discriminators: tuple[AdamState, ...] = ()

    @classmethod
    def for_model(cls, model: TaskNetwork, config: TrainConfig) -> OptStates:
        def make(p: MlpParams) -> AdamState:
            return AdamState.for_params(p, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)

        discs = tuple(make(d) for d in getattr(model, "discriminators", ()))
        return cls(extractor=make(model.extractor), task_head=make(model.task_head), discriminators=discs)

    def with_discriminator(self, i: int, state: AdamState) -> OptStates:
        discs = list(self.discriminators)
        discs[i] = state
        return replace(self, discriminators=tuple(discs))


def save_model(path, model: TaskNetwork) -> None:
    save_params(path, model.groups())


def load_model(path) -> TaskNetwork:
    groups = load_params(path)
    if any(name.startswith("discriminator") for name in groups):
        return MdanModel.from_groups(groups)
    return TaskNetwork(extractor=groups["extractor"], task_head=groups["task_head"])
