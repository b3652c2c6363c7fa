from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))


@pytest.fixture
def small_moons():
    """两个源域 + 一个目标域（目标标签只经 oracle 可见），每域 40 点。"""
    from mdanlab.data.synthetic import SyntheticSpec, generate

    spec = SyntheticSpec(family="rotated_moons", k=2, params=tuple(np.deg2rad([0.0, 20.0, 35.0])), n=40, noise=0.1, seed=1)
    sources, target = generate(spec)
    return sources, target.unlabeled()


@pytest.fixture
def live_biases():
    """把各层偏置换成 U(0.1, 0.5) 的正值；init_mlp 的零偏置容易让整行 ReLU 失活。"""

    def apply(params, seed: int):
        rng = np.random.default_rng(seed)
        layers = tuple(replace(layer, bias=rng.uniform(0.1, 0.5, size=layer.out_dim)) for layer in params.layers)
        return replace(params, layers=layers)

    return apply
