import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_knn(points: np.ndarray, query: np.ndarray, k: int):
    """Reference k-NN: full scan, sort by (distance, index)."""
    d = np.linalg.norm(points - query, axis=1)
    order = np.lexsort((np.arange(len(points)), d))[:k]
    return d[order], order


def brute_radius(points: np.ndarray, query: np.ndarray, r: float):
    """Reference radius query: indices (ascending) with distance <= r."""
    d = np.linalg.norm(points - query, axis=1)
    return np.flatnonzero(d <= r)


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
