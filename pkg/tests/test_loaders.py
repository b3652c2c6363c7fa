from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain
from mdanlab.data.loaders import (
    load_dense_csv,
    load_domain_file,
    load_sparse_sv,
    write_dense_csv,
    write_sparse_sv,
)
from mdanlab.errors import InputError, ParseError


def test_sparse_fixture(tmp_path: Path):
    p = tmp_path / "books.sv"
    p.write_text("1 0:0.5 2:1.5\n0\n1 1:-2  # 注释\n", encoding="utf-8")
    dom = load_sparse_sv(p, dim=3)
    assert isinstance(dom, LabeledDomain)
    np.testing.assert_array_equal(dom.features, [[0.5, 0.0, 1.5], [0.0, 0.0, 0.0], [0.0, -2.0, 0.0]])
    np.testing.assert_array_equal(dom.labels, [1, 0, 1])
    assert dom.domain_id == "books"


def test_sparse_unlabeled(tmp_path: Path):
    p = tmp_path / "t.sv"
    p.write_text("0:1 3:2\n\n1:4\n", encoding="utf-8")
    dom = load_sparse_sv(p, dim=4)
    assert isinstance(dom, UnlabeledDomain)
    np.testing.assert_array_equal(dom.features, [[1, 0, 0, 2], [0, 4, 0, 0]])


@pytest.mark.parametrize(
    "text,line",
    [
        ("1 0:1\n1 2:1 1:3\n", 2),
        ("1 0:1\n0 a:b\n", 2),
        ("1 0:1\n0 0:x\n", 2),
        ("1 0:1\n\n0:1\n", 3),
        ("x 0:1\n", 1),
    ],
)
def test_sparse_parse_errors_carry_line(tmp_path: Path, text, line):
    p = tmp_path / "bad.sv"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_sparse_sv(p, dim=3)
    assert info.value.line == line


def test_sparse_index_out_of_range(tmp_path: Path):
    p = tmp_path / "wide.sv"
    p.write_text("1 5:1\n", encoding="utf-8")
    with pytest.raises(InputError):
        load_sparse_sv(p, dim=3)
    with pytest.raises(InputError):
        load_domain_file(p)


def test_dense_csv_labeled_and_unlabeled(tmp_path: Path):
    p = tmp_path / "src.csv"
    p.write_text("x0,x1,label\n1.0,2.0,0\n-3,4.5,1\n", encoding="utf-8")
    dom = load_dense_csv(p)
    assert isinstance(dom, LabeledDomain)
    np.testing.assert_array_equal(dom.features, [[1.0, 2.0], [-3.0, 4.5]])
    np.testing.assert_array_equal(dom.labels, [0, 1])

    q = tmp_path / "tgt.csv"
    q.write_text("a,b\n1,2\n", encoding="utf-8")
    assert isinstance(load_domain_file(q), UnlabeledDomain)


def test_dense_csv_errors(tmp_path: Path):
    p = tmp_path / "bad.csv"
    p.write_text("x0,x1,label\n1,2,0\n3,abc,1\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_dense_csv(p)
    assert info.value.line == 3

    p.write_text("x0,label\n1,0\nnan,1\n", encoding="utf-8")
    with pytest.raises(InputError):
        load_dense_csv(p)

    p.write_text("x0,label\n1,0.5\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_dense_csv(p)

    p.write_text("x0,label\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_dense_csv(p)


def test_write_then_read(tmp_path: Path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 3))
    x[2] = 0.0
    x[4, 1] = 0.0
    dom = LabeledDomain(features=x, labels=np.array([0, 1, 1, 0, 2, 1]), domain_id="d")

    write_dense_csv(tmp_path / "d.csv", dom)
    back = load_domain_file(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.features, dom.features)
    np.testing.assert_array_equal(back.labels, dom.labels)

    write_sparse_sv(tmp_path / "d.sv", dom)
    back = load_domain_file(tmp_path / "d.sv", dim=3)
    np.testing.assert_array_equal(back.features, dom.features)
    np.testing.assert_array_equal(back.labels, dom.labels)

    write_dense_csv(tmp_path / "u.csv", dom, include_labels=False)
    assert isinstance(load_domain_file(tmp_path / "u.csv"), UnlabeledDomain)


def test_dense_csv_keeps_every_bit(tmp_path: Path):
    x = np.random.default_rng(3).normal(size=(50, 3))
    write_dense_csv(tmp_path / "n.csv", UnlabeledDomain(features=x, domain_id="n"))
    np.testing.assert_array_equal(load_dense_csv(tmp_path / "n.csv").features, x)
