from __future__ import annotations

import numpy as np


def child_seeds(seed: int, n: int) -> list[int]:
    """由一个运行种子派生 n 个互不相关的整数种子（顺序稳定）。"""
    seq = np.random.SeedSequence(int(seed))
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in seq.spawn(int(n))]


def derive_seed(seed: int, *keys: int) -> int:
    seq = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(seq.generate_state(1, dtype=np.uint32)[0])
