import itertools
import math

import numpy as np
import pytest

from causal_rdf.prob import (
    CausalKernelFamily,
    KernelKind,
    indexers,
    iid_source,
    markov_source,
    memoryless_channel,
    random_family,
    random_pmf_rows,
)

LN2 = math.log(2.0)
HAMMING = [[0.0, 1.0], [1.0, 0.0]]
BSC01 = [[0.9, 0.1], [0.1, 0.9]]
IDENTITY2 = [[1.0, 0.0], [0.0, 1.0]]


def h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log(p) - (1 - p) * math.log(1 - p)


def brute_joint(p, q):
    """Joint pmf as a dict over (x^n, y^n) tuples, by explicit loops over stage tables."""
    xs, ys = p.x_indexer.shape, p.y_indexer.shape
    n = p.horizon
    out = {}
    for x in itertools.product(*(range(k) for k in xs)):
        for y in itertools.product(*(range(k) for k in ys)):
            w = 1.0
            for i in range(n + 1):
                w *= p.stages[i][x[:i] + y[:i] + (x[i],)]
                w *= q.stages[i][x[: i + 1] + y[:i] + (y[i],)]
            out[(x, y)] = w
    return out


def brute_directed_information(p, q):
    """sum P log(prod_i q_i / nu) with every term formed by hand."""
    joint = brute_joint(p, q)
    nu = {}
    for (x, y), w in joint.items():
        nu[y] = nu.get(y, 0.0) + w
    total = 0.0
    for (x, y), w in joint.items():
        if w == 0:
            continue
        qprod = 1.0
        for i in range(p.horizon + 1):
            qprod *= q.stages[i][x[: i + 1] + y[:i] + (y[i],)]
        total += w * math.log(qprod / nu[y])
    return total


def feedback_free_source(x_idx, y_idx, rng):
    """Random SOURCE_FB family whose stages ignore past reproductions."""
    stages = []
    for i in range(x_idx.horizon + 1):
        shape = KernelKind.SOURCE_FB.table_shape(i, x_idx.shape, y_idx.shape)
        base = random_pmf_rows(tuple(x_idx.shape[:i]) + (x_idx.shape[i],), rng)
        view = base.reshape(tuple(x_idx.shape[:i]) + (1,) * i + (x_idx.shape[i],))
        stages.append(np.broadcast_to(view, shape).copy())
    return CausalKernelFamily(KernelKind.SOURCE_FB, x_idx, y_idx, tuple(stages))


def random_instances(count, seed, max_horizon=3, feedback=True):
    """Seeded (p, q) pairs with alphabets in {2, 3} and horizon <= max_horizon."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(0, max_horizon + 1))
        nx, ny = (int(v) for v in rng.integers(2, 4, size=2))
        xi, yi = indexers(n, nx, ny)
        p = (random_family(KernelKind.SOURCE_FB, xi, yi, rng) if feedback
             else feedback_free_source(xi, yi, rng))
        q = random_family(KernelKind.CHANNEL_FF, xi, yi, rng)
        out.append((p, q))
    return out


@pytest.fixture
def bsc_pair():
    return iid_source([0.5, 0.5], 0, 2), memoryless_channel(BSC01, 0)


@pytest.fixture
def sym_markov_n2():
    return markov_source([0.5, 0.5], [[0.7, 0.3], [0.3, 0.7]], 2, 2)
