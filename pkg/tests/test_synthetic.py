from __future__ import annotations

import numpy as np
import pytest

from mdanlab.data.synthetic import SyntheticSpec, generate, rotation_matrix, spec_from_mapping
from mdanlab.errors import InputError
from mdanlab.theory.divergence import h_divergence
from mdanlab.theory.hypotheses import enumerate_stumps


def _moons(angles, n=200, noise=0.1, seed=7) -> SyntheticSpec:
    return SyntheticSpec(family="rotated_moons", k=len(angles) - 1, params=tuple(angles), n=n, noise=noise, seed=seed)


def test_same_seed_gives_identical_data():
    for spec in (
        _moons([0.0, 0.3, 0.7]),
        SyntheticSpec(family="gaussian_shift", k=2, params=([0, 0], [1, 0], [0, 1]), n=50, noise=0.2, seed=1),
    ):
        a_sources, a_target = generate(spec)
        b_sources, b_target = generate(spec)
        for a, b in zip([*a_sources, a_target], [*b_sources, b_target]):
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.labels, b.labels)
        assert [d.domain_id for d in a_sources] == ["source0", "source1"]
        assert a_target.domain_id == "target"


def test_label_balance():
    sources, target = generate(_moons([0.0, 0.2, 0.4], n=500))
    for dom in [*sources, target]:
        assert abs(dom.labels.mean() - 0.5) <= 0.1
    sources, target = generate(
        SyntheticSpec(family="gaussian_shift", k=1, params=([0.0], [0.0]), n=101, noise=0.5, seed=0)
    )
    for dom in [*sources, target]:
        assert abs(dom.labels.mean() - 0.5) <= 0.1


def test_rotation_matrix():
    np.testing.assert_allclose(rotation_matrix(0.0), np.eye(2))
    np.testing.assert_allclose(rotation_matrix(np.pi / 2) @ np.array([1.0, 0.0]), [0.0, 1.0], atol=1e-15)


def test_half_turn_about_origin_negates_points():
    # 无噪声时绕原点转 180 度即 x -> -x，标签不变
    sources, target = generate(_moons([0.0, np.pi], n=40, noise=0.0))
    negated = {tuple(np.round(-x, 9)): y for x, y in zip(sources[0].features, sources[0].labels)}
    rotated = {tuple(np.round(x, 9)): y for x, y in zip(target.features, target.labels)}
    assert negated == rotated


def _stump_divergence(angle: float) -> float:
    sources, target = generate(_moons([0.0, angle], n=500, noise=0.1))
    H = enumerate_stumps(np.vstack([sources[0].features, target.features]))
    return h_divergence(H, sources[0], target)


def test_half_turn_separates_domains_more_than_small_turn():
    small = _stump_divergence(np.deg2rad(15.0))
    half = _stump_divergence(np.pi)
    assert half > 0.75
    assert small < half
    assert _stump_divergence(0.0) < 0.3


def test_gaussian_shift_moves_both_classes():
    spec = SyntheticSpec(family="gaussian_shift", k=1, params=([0.0, 0.0], [5.0, 0.0]), n=400, noise=0.1, seed=2)
    (source,), target = generate(spec)
    for c, mean in ((0, -1.0), (1, 1.0)):
        assert source.features[source.labels == c, 0].mean() == pytest.approx(mean, abs=0.05)
        assert target.features[target.labels == c, 0].mean() == pytest.approx(mean + 5.0, abs=0.05)


def test_spec_validation():
    with pytest.raises(InputError):
        SyntheticSpec(family="spirals", k=1, params=(0.0, 0.1))
    with pytest.raises(InputError):
        SyntheticSpec(family="rotated_moons", k=2, params=(0.0, 0.1))
    with pytest.raises(InputError):
        SyntheticSpec(family="gaussian_shift", k=1, params=([0.0], [0.0, 1.0]))
    with pytest.raises(InputError):
        generate(SyntheticSpec(family="gaussian_shift", k=1, params=([0.0], [1.0]), noise=0.0))


def test_spec_from_mapping_degrees():
    spec = spec_from_mapping({"family": "rotated_moons", "angles_deg": [0, 90, 180], "n": 30, "seed": 4})
    assert spec.k == 2
    np.testing.assert_allclose(spec.params, [0.0, np.pi / 2, np.pi])
    assert spec.n == 30
    with pytest.raises(InputError):
        spec_from_mapping({"family": "rotated_moons"})
