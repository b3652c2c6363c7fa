from __future__ import annotations

import math

import numpy as np
import pytest

from mdanlab.errors import InputError, ShapeError
from mdanlab.nn.mlp import Batch, Layer, MlpParams, backward, forward, grad_reverse, init_mlp, loss


def _single(weight, activation: str) -> MlpParams:
    w = np.asarray(weight, dtype=float)
    return MlpParams(layers=(Layer(weight=w, bias=np.zeros(w.shape[0]), activation=activation),))


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def _fd_params(params: MlpParams, fn, h: float = 1e-6) -> np.ndarray:
    theta = params.flat()
    out = np.zeros_like(theta)
    for j in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        out[j] = (fn(params.with_flat(up)) - fn(params.with_flat(dn))) / (2 * h)
    return out


def test_forward_identity_and_relu():
    out = forward(_single(np.eye(2), "identity"), np.array([[1.0, 2.0]])).output
    np.testing.assert_array_equal(out, [[1.0, 2.0]])
    out = forward(_single(np.eye(2), "relu"), np.array([[-1.0, 2.0]])).output
    np.testing.assert_array_equal(out, [[0.0, 2.0]])


def test_forward_matches_scalar_loop():
    params = init_mlp([3, 4, 2], seed=11)
    x = np.random.default_rng(0).normal(size=(5, 3))
    got = forward(params, x).output

    expected = np.zeros((5, 2))
    for r in range(5):
        h = list(x[r])
        for layer in params.layers:
            nxt = []
            for o in range(layer.out_dim):
                s = layer.bias[o]
                for i in range(layer.in_dim):
                    s += layer.weight[o, i] * h[i]
                nxt.append(max(s, 0.0) if layer.activation == "relu" else s)
            h = nxt
        expected[r] = h
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_forward_shape_errors():
    params = init_mlp([3, 2], seed=0)
    with pytest.raises(ShapeError):
        forward(params, np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        forward(params, np.zeros((0, 3)))
    with pytest.raises(InputError):
        forward(params, np.zeros((1, 3)), dropout_rate=1.0)


def test_forward_is_pure_and_dropout_deterministic():
    params = init_mlp([4, 8, 8, 2], seed=3)
    x = np.random.default_rng(1).normal(size=(6, 4))
    a = forward(params, x, dropout_rate=0.5, rng_seed=42)
    b = forward(params, x, dropout_rate=0.5, rng_seed=42)
    assert np.array_equal(a.output, b.output)
    mask = a.masks[0]
    assert mask is not None
    assert set(np.unique(mask)) <= {0.0, 2.0}
    assert forward(params, x, dropout_rate=0.0).masks == (None, None, None)


def test_forward_accepts_batch():
    params = init_mlp([2, 3], seed=0)
    batch = Batch(features=np.ones((2, 2)), labels=np.array([0, 1]), n_classes=2)
    np.testing.assert_array_equal(forward(params, batch).output, forward(params, np.ones((2, 2))).output)
    with pytest.raises(InputError):
        Batch(features=np.ones((2, 2)), labels=np.array([0, 2]), n_classes=2)


def test_softmax_xent_uniform_logits():
    value, grad = loss(np.zeros((1, 2)), np.array([0]), "softmax_xent")
    assert value == pytest.approx(math.log(2.0))
    np.testing.assert_allclose(grad, [[-0.5, 0.5]])


def test_confident_logits_have_near_zero_loss():
    value, _ = loss(np.array([[50.0, -50.0]]), np.array([0]), "softmax_xent")
    assert 0.0 <= value < 1e-12
    value, _ = loss(np.array([[60.0]]), np.array([1]), "logistic")
    assert 0.0 <= value < 1e-12


def test_loss_label_errors():
    with pytest.raises(InputError):
        loss(np.zeros((2, 2)), np.array([0, 2]), "softmax_xent")
    with pytest.raises(InputError):
        loss(np.zeros((2, 3)), np.array([0, 1]), "logistic")
    with pytest.raises(InputError):
        loss(np.zeros((2, 2)), np.array([0, 1]), "hinge")


@pytest.mark.parametrize("kind,c", [("softmax_xent", 3), ("logistic", 1), ("logistic", 2)])
def test_loss_gradient_matches_finite_differences(kind, c):
    rng = np.random.default_rng(5)
    z = rng.normal(size=(4, c))
    y = rng.integers(0, max(c, 2), size=4)
    _, grad = loss(z, y, kind)
    h = 1e-4
    fd = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        up = z.copy()
        dn = z.copy()
        up[idx] += h
        dn[idx] -= h
        fd[idx] = (loss(up, y, kind)[0] - loss(dn, y, kind)[0]) / (2 * h)
    assert _rel_err(grad, fd) < 1e-5


def test_backward_zero_gradient():
    params = init_mlp([3, 4, 2], seed=2)
    acts = forward(params, np.ones((2, 3)))
    grads, gx = backward(params, acts, np.zeros((2, 2)))
    assert not grads.flat().any()
    assert not gx.any()
    grads, _ = backward(params, acts, None)
    assert not grads.flat().any()


def test_backward_linear_layer_closed_form():
    rng = np.random.default_rng(0)
    params = _single(rng.normal(size=(2, 3)), "identity")
    x = rng.normal(size=(1, 3))
    t = rng.normal(size=(1, 2))
    acts = forward(params, x)
    delta = acts.output - t  # 平方损失 ½||Wx + b - t||² 对输出的梯度
    grads, _ = backward(params, acts, delta)
    np.testing.assert_allclose(grads.layers[0].weight, delta.T @ x)
    np.testing.assert_allclose(grads.layers[0].bias, delta[0])


def test_backward_shape_mismatch():
    params = init_mlp([3, 4, 2], seed=0)
    other = init_mlp([3, 5, 2], seed=0)
    acts = forward(params, np.ones((2, 3)))
    with pytest.raises(ShapeError):
        backward(other, acts, np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        backward(params, acts, np.zeros((2, 3)))


def _near_kink(params: MlpParams, acts, margin: float = 1e-4) -> bool:
    return any(
        layer.activation == "relu" and np.abs(pre).min() < margin for layer, pre in zip(params.layers, acts.pre)
    )


def test_gradient_check_random_networks(live_biases):
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for trial in range(100):
        n_layers = int(rng.integers(1, 4))
        kind = "softmax_xent" if trial % 2 == 0 else "logistic"
        out_dim = int(rng.integers(2, 5)) if kind == "softmax_xent" else int(rng.integers(1, 3))
        sizes = [int(rng.integers(1, 7)) for _ in range(n_layers)] + [out_dim]
        params = live_biases(init_mlp(sizes, seed=trial), trial)
        x = rng.normal(size=(3, sizes[0]))
        y = rng.integers(0, 2 if kind == "logistic" else out_dim, size=3)

        def objective(p: MlpParams) -> float:
            return loss(forward(p, x).output, y, kind)[0]

        acts = forward(params, x)
        # 中心差分跨过 ReLU 折点时会平均两侧斜率
        if _near_kink(params, acts):
            continue
        _, g_logits = loss(acts.output, y, kind)
        grads, _ = backward(params, acts, g_logits)
        fd = _fd_params(params, objective)
        if np.linalg.norm(fd) < 1e-9:
            continue
        worst = max(worst, _rel_err(grads.flat(), fd))
        checked += 1
    assert checked >= 80
    assert worst < 1e-4


def test_grad_reverse():
    assert grad_reverse(np.array(2.0), 1.0) == -2.0
    assert grad_reverse(np.array(2.0), 0.1) == pytest.approx(-0.2)
    assert not np.any(grad_reverse(np.array([1.0, -3.0]), 0.0))
    g = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(grad_reverse(grad_reverse(g, 1.0), 1.0), g)
    params = init_mlp([2, 3], seed=0)
    flipped = grad_reverse(params, 1.0)
    np.testing.assert_array_equal(flipped.flat(), -params.flat())
    with pytest.raises(InputError):
        grad_reverse(g, -1.0)


def test_params_shape_chain_validated():
    with pytest.raises(ShapeError):
        MlpParams(
            layers=(
                Layer(weight=np.zeros((3, 2)), bias=np.zeros(3)),
                Layer(weight=np.zeros((1, 4)), bias=np.zeros(1), activation="identity"),
            )
        )


def test_roles_are_the_three_network_parts():
    layer = Layer(weight=np.zeros((2, 2)), bias=np.zeros(2), activation="identity")
    for role in ("extractor", "task", "discriminator"):
        assert MlpParams(layers=(layer,), role=role).role == role
    with pytest.raises(InputError):
        MlpParams(layers=(layer,), role="probe")
