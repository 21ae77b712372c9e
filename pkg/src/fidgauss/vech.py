"""Upper-triangle vectorization used by every gradient matrix in the package.

Order is row-major over the upper triangle: (0,0), (0,1), ..., (0,d-1), (1,1), ...
which is exactly ``np.triu_indices(d)``.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def triu_index(d: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(d)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@lru_cache(maxsize=None)
def strict_triu_index(d: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(d, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def n_unique(d: int) -> int:
    return d * (d + 1) // 2


def vech(mat: np.ndarray) -> np.ndarray:
    """Upper-triangle entries of a square matrix (or a stack of them on axis 0)."""
    d = mat.shape[-1]
    rows, cols = triu_index(d)
    return mat[..., rows, cols]


def unvech(vec: np.ndarray, d: int) -> np.ndarray:
    """Symmetric matrix from its upper-triangle vector."""
    rows, cols = triu_index(d)
    out = np.zeros((d, d))
    out[rows, cols] = vec
    out[cols, rows] = vec
    return out
