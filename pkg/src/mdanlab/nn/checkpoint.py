from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from mdanlab.errors import ParseError
from mdanlab.nn.mlp import Layer, MlpParams

logger = logging.getLogger(__name__)

# 格式见 docs/formats.md：魔数 + 版本 + 分组数，随后逐组写 name/role/层形状与行优先的 float64 数据
MAGIC = b"MDANCKPT"
VERSION = 1
_ACT_CODES = {"identity": 0, "relu": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_params(path: str | Path, groups: Mapping[str, MlpParams]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(groups))]
    for name, params in groups.items():
        chunks.append(_pack_str(name))
        chunks.append(_pack_str(params.role))
        chunks.append(struct.pack("<I", len(params.layers)))
        for layer in params.layers:
            chunks.append(struct.pack("<BII", _ACT_CODES[layer.activation], layer.out_dim, layer.in_dim))
            chunks.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
            chunks.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    logger.debug("checkpoint_saved path=%s groups=%d", path, len(groups))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self._data = data
        self._pos = 0
        self._path = path

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ParseError("truncated checkpoint", path=str(self._path))
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def floats(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def load_params(path: str | Path) -> dict[str, MlpParams]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ParseError("not a mdanlab checkpoint (bad magic header)", path=str(path))
    version, n_groups = reader.unpack("<II")
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path=str(path))

    groups: dict[str, MlpParams] = {}
    for _ in range(n_groups):
        name = reader.text()
        role = reader.text()
        (n_layers,) = reader.unpack("<I")
        layers: list[Layer] = []
        for _ in range(n_layers):
            code, out_dim, in_dim = reader.unpack("<BII")
            if code not in _ACT_NAMES:
                raise ParseError(f"unknown activation code {code}", path=str(path))
            weight = reader.floats((out_dim, in_dim))
            bias = reader.floats((out_dim,))
            layers.append(Layer(weight=weight, bias=bias, activation=_ACT_NAMES[code]))
        groups[name] = MlpParams(layers=tuple(layers), role=role)
    if not reader.exhausted:
        raise ParseError("trailing bytes after last group", path=str(path))
    return groups
