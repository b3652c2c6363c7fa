from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain
from mdanlab.errors import InputError
from mdanlab.nn.mlp import Batch
from mdanlab.util.seeding import child_seeds


class _IndexStream:
    """单个域的下标流：逐轮随机排列后按 m 切块；一轮末尾不足 m 时，余下的点全部用上，差额有放回补齐。

    域本身小于 m 时每批都有放回抽样。
    """

    def __init__(self, n: int, m: int, seed: int):
        self._n = n
        self._m = m
        self._rng = np.random.default_rng(seed)
        self._perm = np.empty(0, dtype=np.int64)
        self._cursor = 0

    def next(self) -> np.ndarray:
        if self._n < self._m:
            return self._rng.choice(self._n, size=self._m, replace=True)
        if self._cursor >= self._perm.size:
            self._perm = self._rng.permutation(self._n)
            self._cursor = 0
        out = self._perm[self._cursor : self._cursor + self._m]
        self._cursor += self._m
        if out.size < self._m:
            out = np.concatenate([out, self._rng.choice(self._n, size=self._m - out.size, replace=True)])
        return out


def minibatch_iter(
    sources: Sequence[LabeledDomain],
    target: UnlabeledDomain | LabeledDomain,
    m: int,
    seed: int,
) -> Iterator[tuple[list[Batch], Batch]]:
    """无限流：每次给出 k 个各 m 行的源域批次和 m 行的无标签目标批次。"""
    if m < 1:
        raise InputError(f"batch size m must be >= 1, got {m}")
    if not sources:
        raise InputError("minibatch_iter needs at least one source domain")
    k = len(sources)
    seeds = child_seeds(seed, k + 1)
    streams = [_IndexStream(d.n, m, s) for d, s in zip(sources, seeds[:k])]
    target_stream = _IndexStream(target.n, m, seeds[k])
    while True:
        source_batches = []
        for i, (dom, stream) in enumerate(zip(sources, streams)):
            idx = stream.next()
            source_batches.append(Batch(features=dom.features[idx], labels=dom.labels[idx], domain=i, indices=idx))
        idx = target_stream.next()
        yield source_batches, Batch(features=target.features[idx], labels=None, domain=k, indices=idx)


def labeled_batches(domain: LabeledDomain, m: int, seed: int) -> Iterator[Batch]:
    """单个有标签域的无限批次流，供不涉及目标域的基线使用。"""
    if m < 1:
        raise InputError(f"batch size m must be >= 1, got {m}")
    stream = _IndexStream(domain.n, m, seed)
    while True:
        idx = stream.next()
        yield Batch(features=domain.features[idx], labels=domain.labels[idx], domain=0, indices=idx)
