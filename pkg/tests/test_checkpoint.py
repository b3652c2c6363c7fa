from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from mdanlab.errors import ParseError
from mdanlab.nn.checkpoint import MAGIC, load_params, save_params
from mdanlab.nn.mlp import init_mlp


def test_checkpoint_roundtrip(tmp_path: Path):
    groups = {
        "extractor": init_mlp([3, 5, 4], seed=1, role="extractor", output_activation="relu"),
        "task_head": init_mlp([4, 2], seed=2, role="task"),
        "discriminator0": init_mlp([4, 3, 2], seed=3, role="discriminator"),
    }
    path = tmp_path / "model.ckpt"
    save_params(path, groups)
    assert path.read_bytes().startswith(MAGIC)

    loaded = load_params(path)
    assert list(loaded) == list(groups)
    for name, params in groups.items():
        got = loaded[name]
        assert got.role == params.role
        assert [l.activation for l in got.layers] == [l.activation for l in params.layers]
        np.testing.assert_array_equal(got.flat(), params.flat())


def test_checkpoint_rejects_bad_files(tmp_path: Path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(ParseError):
        load_params(bad)

    good = tmp_path / "good.ckpt"
    save_params(good, {"task_head": init_mlp([2, 2], seed=0, role="task")})
    truncated = tmp_path / "truncated.ckpt"
    truncated.write_bytes(good.read_bytes()[:-5])
    with pytest.raises(ParseError):
        load_params(truncated)

    trailing = tmp_path / "trailing.ckpt"
    trailing.write_bytes(good.read_bytes() + b"\x00")
    with pytest.raises(ParseError):
        load_params(trailing)
