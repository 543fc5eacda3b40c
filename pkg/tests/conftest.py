"""Shared corpus builders for the test suite.

Instances are generated through the same seeded pipeline the dataset CLI
uses, so tests exercise exactly the distributions the benchmarks run on.
"""

import numpy as np

from pdlab.dataset import _build_instance
from pdlab.instances import make_instance


def corpus(task, count, sizes=(8, 12, 16, 20), seed=0, b=5):
    """Deterministic list of `count` instances cycling through `sizes`."""
    family = "ba" if task == "mvc" else "ba_bipartite"
    params = {} if task == "mvc" else {"b": b}
    out = []
    for i in range(count):
        size = sizes[i % len(sizes)]
        p = dict(params)
        if task != "mvc":
            p["b"] = min(b, max(1, size // 2))
        out.append(_build_instance(task, family, size, seed, i, p))
    return out


def random_instance(rng, n_lo=4, n_hi=12, task="mhs"):
    """Small unstructured instance: random subsets over random weights."""
    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(rng.integers(1, 2 * n))
    sets = []
    for _ in range(m):
        k = int(rng.integers(1, max(2, n // 2) + 1))
        sets.append(sorted(rng.choice(n, size=k, replace=False).tolist()))
    weights = rng.random(n)
    return make_instance(task, weights, sets, id=f"rand-{rng.integers(1 << 30)}")
