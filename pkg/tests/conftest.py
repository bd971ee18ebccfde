import numpy as np
import pytest

from cyclecluster.instance import Instance


def t1_instance(alpha: float = 0.5) -> Instance:
    """3-vertex, 3-cluster instance with a distinct directed triangle.

    Optimal value 0.4 at the singleton clustering ({0},{1},{2}); the reversed
    cycle order scores -0.4.
    """
    q = np.zeros((3, 3))
    q[0, 1] = 0.4
    q[1, 2] = 0.3
    q[2, 0] = 0.2
    q[1, 0] = 0.1
    return Instance(n=3, m=3, alpha=alpha, Q=q)


def random_instance(n: int, m: int, seed: int, alpha: float = 0.5, density: float = 1.0) -> Instance:
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.0, 1.0, size=(n, n))
    if density < 1.0:
        q *= rng.random((n, n)) < density
    np.fill_diagonal(q, 0.0)
    return Instance(n=n, m=m, alpha=alpha, Q=q)


def random_clustering(n: int, m: int, rng) -> tuple:
    """Random surjective assignment as a plain tuple."""
    while True:
        a = rng.integers(0, m, size=n)
        if len(set(a.tolist())) == m:
            return tuple(int(v) for v in a)


@pytest.fixture
def t1() -> Instance:
    return t1_instance()
