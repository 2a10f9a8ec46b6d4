import numpy as np
import pytest

from metriq.core import MetricSpace
from metriq.generators import gen_euclidean_cloud


def random_metric(n: int, seed: int, dim: int = 3) -> MetricSpace:
    """Random Euclidean point cloud: always exactly a metric."""
    return gen_euclidean_cloud(n, seed, dim)


def random_partition(n: int, rng: np.random.Generator, max_blocks: int | None = None):
    """Random partition of 0..n-1 into a random number of nonempty blocks."""
    k = int(rng.integers(1, (max_blocks or n) + 1))
    assign = rng.integers(0, k, size=n)
    # make every label 0..k'-1 nonempty by relabelling the used ones
    used = np.unique(assign)
    blocks = [tuple(int(i) for i in np.flatnonzero(assign == u)) for u in used]
    return tuple(blocks)


def shortest_path_closure(w):
    """Pure-Python Floyd-Warshall, the independent oracle for quotient metrics."""
    k = len(w)
    d = [[float(w[i][j]) for j in range(k)] for i in range(k)]
    for mid in range(k):
        for i in range(k):
            dim_ = d[i][mid]
            row = d[mid]
            di = d[i]
            for j in range(k):
                alt = dim_ + row[j]
                if alt < di[j]:
                    di[j] = alt
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(0)
