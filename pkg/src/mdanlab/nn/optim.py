from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mdanlab.errors import InputError, NumericError
from mdanlab.nn.mlp import Gradients, Layer, MlpParams, check_same_shape


@dataclass(frozen=True)
class AdamState:
    m: MlpParams
    v: MlpParams
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(
        cls,
        params: MlpParams,
        *,
        lr: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> AdamState:
        if lr <= 0:
            raise InputError(f"learning rate must be > 0, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise InputError(f"moment decay rates must lie in [0, 1), got {beta1}, {beta2}")
        return cls(m=params.zeros_like(), v=params.zeros_like(), step=0, lr=float(lr), beta1=float(beta1), beta2=float(beta2), eps=float(eps))


def opt_step(params: MlpParams, grads: Gradients, state: AdamState) -> tuple[MlpParams, AdamState]:
    """带偏差校正的一阶/二阶矩更新；纯函数，返回新参数与新状态。"""
    check_same_shape(params, grads)
    check_same_shape(params, state.m)
    check_same_shape(params, state.v)
    if state.step < 0:
        raise InputError(f"optimizer step counter must be >= 0, got {state.step}")
    for idx, g in enumerate(grads.layers):
        if not (np.isfinite(g.weight).all() and np.isfinite(g.bias).all()):
            raise NumericError("non-finite gradient", layer=idx)

    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t

    def _update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m_new / c1
        v_hat = v_new / c2
        return p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), m_new, v_new

    new_layers: list[Layer] = []
    m_layers: list[Layer] = []
    v_layers: list[Layer] = []
    for idx, (p, g, m, v) in enumerate(zip(params.layers, grads.layers, state.m.layers, state.v.layers)):
        w, mw, vw = _update(p.weight, g.weight, m.weight, v.weight)
        b, mb, vb = _update(p.bias, g.bias, m.bias, v.bias)
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NumericError("non-finite parameter after update", layer=idx)
        new_layers.append(Layer(weight=w, bias=b, activation=p.activation))
        m_layers.append(Layer(weight=mw, bias=mb, activation=p.activation))
        v_layers.append(Layer(weight=vw, bias=vb, activation=p.activation))

    new_state = AdamState(
        m=MlpParams(layers=tuple(m_layers), role=params.role),
        v=MlpParams(layers=tuple(v_layers), role=params.role),
        step=t,
        lr=state.lr,
        beta1=b1,
        beta2=b2,
        eps=state.eps,
    )
    return MlpParams(layers=tuple(new_layers), role=params.role), new_state
