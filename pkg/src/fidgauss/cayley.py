"""Cayley-transform algebra for covariance matrices.

A covariance matrix is factored as ``Sigma = S diag(lam)^2 S^T`` with ``S`` a
rotation.  For a signature matrix ``Z`` (diagonal, entries +-1, det +1) the
rotation ``S Z`` is written as ``C(A) = (I - A)(I + A)^{-1}`` for a
skew-symmetric ``A`` whenever ``S Z`` has no eigenvalue -1.

Signature matrices are stored as their diagonals: ``int8`` arrays of +-1.
A multiset of ``k`` of them is a ``(k, d)`` array.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateEigenvaluesWarning, NotPermissible, NotPositiveDefinite

#: Relative eigengap below which eigenvalues count as tied.
DEGENERATE_GAP = 1e-8


@dataclass(frozen=True)
class SpectralFactors:
    s: np.ndarray  # rotation, det +1
    lam: np.ndarray  # sqrt of eigenvalues, strictly decreasing
    degenerate: bool = False


@dataclass(frozen=True)
class CayleyFactors:
    a: np.ndarray
    lam: np.ndarray
    z: np.ndarray


def cayley_forward(a: np.ndarray) -> np.ndarray:
    """Return ``(I - A)(I + A)^{-1}``; orthogonal with det +1 for skew ``A``."""
    a = np.asarray(a, dtype=float)
    eye = np.eye(a.shape[0])
    # (I-A)(I+A)^{-1} = ((I+A)^{-T} (I-A)^T)^T and (I+A)^T = I-A
    return np.linalg.solve(eye - a, eye + a).T


def cayley_inverse(s: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Skew-symmetric ``A`` with ``cayley_forward(A) == s``.

    Raises
    ------
    NotPermissible
        If the smallest singular value of ``I + s`` is at or below ``tol``
        (default ``1e-8 * d``).
    """
    s = np.asarray(s, dtype=float)
    d = s.shape[0]
    if tol is None:
        tol = 1e-8 * d
    eye = np.eye(d)
    if _sigma_min(eye + s) <= tol:
        raise NotPermissible("matrix has -1 as a characteristic root")
    # (I-S) and (I+S)^{-1} commute for normal S, so A = (I+S)^{-1}(I-S).
    a = np.linalg.solve(eye + s, eye - s)
    return 0.5 * (a - a.T)


def _sigma_min(mat: np.ndarray) -> float:
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def spectral_decompose(sigma: np.ndarray) -> SpectralFactors:
    """Eigen-factor an SPD matrix with eigenvalues in decreasing order.

    The first column of the eigenvector matrix is negated when needed so that
    ``det(S) = +1``.  Nearly tied eigenvalues emit
    :class:`DegenerateEigenvaluesWarning` but still return a factorization.
    """
    sigma = np.asarray(sigma, dtype=float)
    evals, evecs = np.linalg.eigh(sigma)
    if not evals[0] > 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {evals[0]:.3g} is not positive")
    evals = evals[::-1]
    s = np.ascontiguousarray(evecs[:, ::-1])
    if np.linalg.det(s) < 0:
        s[:, 0] = -s[:, 0]
    degenerate = False
    if len(evals) > 1:
        gap = np.min(evals[:-1] - evals[1:])
        if gap < DEGENERATE_GAP * evals[0]:
            degenerate = True
            warnings.warn(
                f"eigenvalue gap {gap:.3g} below {DEGENERATE_GAP:g} * ||Sigma||",
                DegenerateEigenvaluesWarning,
                stacklevel=2,
            )
    return SpectralFactors(s=s, lam=np.sqrt(evals), degenerate=degenerate)


def reconstruct_sigma(a: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``C(A) diag(lam)^2 C(A)^T``: the covariance carried by a point ``(A, lam)``."""
    c = cayley_forward(a) * np.asarray(lam, dtype=float)
    out = c @ c.T
    return 0.5 * (out + out.T)


def signature_sample(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the ``2**(d-1)`` signature matrices with determinant +1."""
    return sample_signatures(d, 1, rng)[0]


def sample_signatures(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent uniform det-+1 signature diagonals, shape ``(n, d)``.

    The first ``d - 1`` signs are fair coin flips and the last one fixes even
    parity.
    """
    out = np.ones((n, d), dtype=np.int8)
    if d > 1 and n > 0:
        bits = rng.integers(0, 2, size=(n, d - 1), dtype=np.int8)
        out[:, :-1] = 1 - 2 * bits
        out[:, -1] = np.prod(out[:, :-1], axis=1)
    return out


@lru_cache(maxsize=16)
def _all_signatures(d: int) -> np.ndarray:
    head = np.array(list(itertools.product((1, -1), repeat=d - 1)), dtype=np.int8)
    head = head.reshape(2 ** (d - 1), d - 1)
    last = np.prod(head, axis=1, dtype=np.int8)[:, None]
    out = np.hstack([head, last]).astype(np.int8)
    out.setflags(write=False)
    return out


def all_signatures(d: int) -> np.ndarray:
    """All det-+1 signature diagonals, shape ``(2**(d-1), d)``; first row is all +1."""
    if d > 20:
        raise ValueError(f"refusing to enumerate 2**{d - 1} signature matrices")
    return _all_signatures(d)


def is_permissible(s: np.ndarray, z: np.ndarray, tol: float | None = None) -> bool:
    """True iff ``sigma_min(I + S Z) > tol`` (default ``1e-8 * d``)."""
    d = s.shape[0]
    if tol is None:
        tol = 1e-8 * d
    sz = s * np.asarray(z, dtype=float)
    return _sigma_min(np.eye(d) + sz) > tol


def cayley_factors(spec: SpectralFactors, z: np.ndarray, tol: float | None = None) -> CayleyFactors:
    """Skew coordinates of ``spec`` on the branch selected by ``z``."""
    z = np.asarray(z)
    a = cayley_inverse(spec.s * z.astype(float), tol=tol)
    return CayleyFactors(a=a, lam=spec.lam, z=z)
