"""Generalized constrained fiducial density terms in Cayley coordinates.

Coordinates of the overparameterized point are ``M = (A, lam)`` with the
``d(d-1)/2`` strictly-upper entries of the skew matrix ``A`` (row-major) first
and the ``d`` entries of ``lam`` after.  The data generating map is
``y = C(A) diag(lam) u`` with ``C(A) = (I - A)(I + A)^{-1}``; the mean is fixed
at zero.

For one signature matrix ``Z`` the log Jacobian is

    log D( grad_y  @  grad_h^{-1}  @  grad_g ),   D(X) = det(X^T X / n)^{-1/2},

and the unnormalized log target sums ``exp`` of these over permissible
signature matrices and adds the Gaussian log-likelihood.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import cayley
from .errors import (
    EnumerationTooLarge,
    NotPermissible,
    RankDeficientG,
    SingularCross,
    SingularGradH,
    DegenerateTermWarning,
)
from .model import Dataset, ModelSpec, build_sigma, grad_g
from .vech import n_unique, strict_triu_index, unvech, vech

logger = logging.getLogger(__name__)

EXCLUDED = -np.inf
#: Condition-number ceiling for grad_h.
GRAD_H_COND_MAX = 1e12
#: Relative singular-value floor for X in D(X).
CROSS_RCOND = 1e-12


@dataclass(frozen=True)
class GcfdTerm:
    z: np.ndarray
    permissible: bool
    log_j: float
    degenerate: bool = False  # permissible Z dropped because a Jacobian was singular


@dataclass(frozen=True)
class GcfdEvaluation:
    theta: np.ndarray
    log_like: float
    log_j_sum: float
    n_permissible: int
    n_degenerate: int = 0

    @property
    def log_target(self) -> float:
        return self.log_like + self.log_j_sum


# -- data generating map ----------------------------------------------------------


def apply_dga(a: np.ndarray, lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``C(A) diag(lam) u``; ``u`` may be a vector or an ``(m, d)`` stack of rows."""
    c = cayley.cayley_forward(a)
    return (np.atleast_2d(u) * lam) @ c.T if np.ndim(u) == 2 else c @ (lam * u)


def invert_dga(a: np.ndarray, lam: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``u = diag(lam)^{-1} (I + A)(I - A)^{-1} y``, the inputs that reproduce ``y``."""
    eye = np.eye(a.shape[0])
    y = np.asarray(y, dtype=float)
    yt = y.T if y.ndim == 2 else y
    w = (eye + a) @ np.linalg.solve(eye - a, yt)
    u = w / (lam[:, None] if y.ndim == 2 else lam)
    return u.T if y.ndim == 2 else u


# -- dense gradients (oracle / small d) ------------------------------------------


def _skew_basis(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d))
    e[i, j] = 1.0
    e[j, i] = -1.0
    return e


def grad_y(a: np.ndarray, lam: np.ndarray, data) -> np.ndarray:
    """Jacobian of the data generating map at the inputs that reproduce ``data``.

    One ``d``-row block per replicate, stacked in replicate order; columns are
    the strictly-upper entries of ``A`` (row-major) followed by ``lam``.
    """
    y = data.y if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    m, d = y.shape
    eye = np.eye(d)
    ip_inv = np.linalg.inv(eye + a)
    im_inv_y = np.linalg.solve(eye - a, y.T)  # (I - A)^{-1} y, d x m
    c = cayley.cayley_forward(a)
    u = (eye + a) @ im_inv_y / lam[:, None]  # d x m
    rows, cols = strict_triu_index(d)
    out = np.empty((m * d, n_unique(d)))
    for col, (i, j) in enumerate(zip(rows, cols)):
        blk = -2.0 * ip_inv @ _skew_basis(d, i, j) @ im_inv_y
        out[:, col] = blk.T.ravel()
    off = rows.size
    for s in range(d):
        blk = np.outer(c[:, s], u[s])
        out[:, off + s] = blk.T.ravel()
    return out


def grad_h(a: np.ndarray, lam: np.ndarray, check: bool = True) -> np.ndarray:
    """Jacobian of ``(A, lam) -> vech(C(A) diag(lam)^2 C(A)^T)``, square of size ``d(d+1)/2``.

    Raises :class:`SingularGradH` when ``check`` and the condition number exceeds
    ``GRAD_H_COND_MAX``.
    """
    d = a.shape[0]
    eye = np.eye(d)
    ip_inv = np.linalg.inv(eye + a)
    c = cayley.cayley_forward(a)
    l2 = lam * lam
    rows, cols = strict_triu_index(d)
    out = np.empty((n_unique(d), n_unique(d)))
    for col, (i, j) in enumerate(zip(rows, cols)):
        dc = -2.0 * ip_inv @ _skew_basis(d, i, j) @ ip_inv
        half = (dc * l2) @ c.T
        out[:, col] = vech(half + half.T)
    off = rows.size
    for s in range(d):
        out[:, off + s] = vech(2.0 * lam[s] * np.outer(c[:, s], c[:, s]))
    if check:
        cond = np.linalg.cond(out)
        if not cond <= GRAD_H_COND_MAX:
            raise SingularGradH(f"grad_h condition number {cond:.3g}")
    return out


# -- structured solve -------------------------------------------------------------


def _eigen_directions(c: np.ndarray, lam: np.ndarray, gg: np.ndarray):
    """Per-column (Omega_k, dlam_k) with dSigma along them equal to column k of gg.

    In the rotated frame ``C^T dSigma C = Omega Lam^2 - Lam^2 Omega + 2 Lam dLam``
    with ``Omega = C^T dC`` skew, so each column decouples entrywise.
    """
    d = lam.size
    l2 = lam * lam
    den = l2[None, :] - l2[:, None]
    off = ~np.eye(d, dtype=bool)
    if d > 1 and np.min(np.abs(den[off])) <= l2.max() / GRAD_H_COND_MAX:
        raise SingularGradH("tied eigenvalues: grad_h is singular")
    np.fill_diagonal(den, 1.0)
    omegas, dlams = [], []
    for k in range(gg.shape[1]):
        t = c.T @ unvech(gg[:, k], d) @ c
        om = t / den
        np.fill_diagonal(om, 0.0)
        omegas.append(0.5 * (om - om.T))
        dlams.append(np.diag(t) / (2.0 * lam))
    return omegas, dlams


def solve_grad_h(a: np.ndarray, lam: np.ndarray, gg: np.ndarray) -> np.ndarray:
    """``grad_h(a, lam)^{-1} @ gg`` without forming ``grad_h``."""
    d = a.shape[0]
    eye = np.eye(d)
    c = cayley.cayley_forward(a)
    omegas, dlams = _eigen_directions(c, lam, gg)
    rows, cols = strict_triu_index(d)
    out = np.empty((n_unique(d), gg.shape[1]))
    for k, (om, dl) in enumerate(zip(omegas, dlams)):
        da = -0.5 * (eye - a) @ om @ (eye + a)
        out[: rows.size, k] = da[rows, cols]
        out[rows.size:, k] = dl
    return out


def grad_y_times(a: np.ndarray, lam: np.ndarray, y: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``grad_y(a, lam, y) @ b`` evaluated column by column as directional derivatives."""
    d = a.shape[0]
    eye = np.eye(d)
    rows, cols = strict_triu_index(d)
    im_inv_y = np.linalg.solve(eye - a, y.T)
    c = cayley.cayley_forward(a)
    cty = c.T @ y.T
    out = np.empty((y.shape[0] * d, b.shape[1]))
    for k in range(b.shape[1]):
        da = np.zeros((d, d))
        da[rows, cols] = b[: rows.size, k]
        da -= da.T
        blk = -2.0 * np.linalg.solve(eye + a, da @ im_inv_y)
        blk += c @ ((b[rows.size:, k] / lam)[:, None] * cty)
        out[:, k] = blk.T.ravel()
    return out


# -- D functional and projection ----------------------------------------------------


def d_functional(x: np.ndarray, n: float | None = None) -> float:
    """``log D(X) = -1/2 logdet(X^T X / n)``; ``n`` defaults to the row count."""
    x = np.asarray(x, dtype=float)
    r, c = x.shape
    if n is None:
        n = r
    if r < c:
        raise SingularCross(f"{r} rows cannot span {c} columns")
    sv = np.linalg.svd(x, compute_uv=False)
    if not sv[-1] > CROSS_RCOND * sv[0]:
        raise SingularCross("X^T X is singular")
    return float(-np.sum(np.log(sv)) + 0.5 * c * np.log(n))


def projection_q(gh: np.ndarray, gg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Q, P)``: ``P`` projects onto the span of ``gh^{-1} gg`` and ``Q Q^T = P``."""
    p = gg.shape[1]
    if np.linalg.matrix_rank(gg) < p:
        raise RankDeficientG(f"grad_g has rank below {p}")
    try:
        b = np.linalg.solve(gh, gg)
    except np.linalg.LinAlgError as exc:
        raise SingularGradH(str(exc)) from exc
    btb = b.T @ b
    evals, evecs = np.linalg.eigh(btb)
    v = (evecs / np.sqrt(evals)) @ evecs.T  # symmetric (B^T B)^{-1/2}
    q = b @ v
    proj = b @ np.linalg.solve(btb, b.T)
    return q, 0.5 * (proj + proj.T)


# -- per-signature terms --------------------------------------------------------------


def _log_j(a, lam, y, gg, method):
    if method == "structured":
        b = solve_grad_h(a, lam, gg)
        x = grad_y_times(a, lam, y, b)
    elif method == "dense":
        b = np.linalg.solve(grad_h(a, lam), gg)
        x = grad_y(a, lam, y) @ b
    else:
        raise ValueError(f"unknown method {method!r}")
    return d_functional(x, n=y.size)


def _term(spec, z, y, gg, method, tol=None) -> GcfdTerm:
    if not cayley.is_permissible(spec.s, z, tol):
        return GcfdTerm(z=z, permissible=False, log_j=EXCLUDED)
    try:
        a = cayley.cayley_inverse(spec.s * z.astype(float), tol=tol)
        log_j = _log_j(a, spec.lam, y, gg, method)
    except (SingularGradH, SingularCross, NotPermissible) as exc:
        warnings.warn(f"dropping signature term: {exc}", DegenerateTermWarning, stacklevel=3)
        return GcfdTerm(z=z, permissible=False, log_j=EXCLUDED, degenerate=True)
    return GcfdTerm(z=z, permissible=True, log_j=log_j)


def _factor(model: ModelSpec, theta):
    sigma = build_sigma(model, theta)
    with warnings.catch_warnings():
        # degenerate spectra are handled as singular grad_h per term
        warnings.simplefilter("ignore", cayley.DegenerateEigenvaluesWarning)
        spec = cayley.spectral_decompose(sigma)
    return sigma, spec


def log_jacobian_term(theta, z, data: Dataset, model: ModelSpec, method: str = "structured") -> GcfdTerm:
    """Log of the D(.) factor for one signature matrix ``z`` at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    _, spec = _factor(model, theta)
    return _term(spec, np.asarray(z), data.y, grad_g(model, theta), method)


def log_jacobian_sum(theta, zset: np.ndarray, data: Dataset, model: ModelSpec,
                     method: str = "structured") -> GcfdEvaluation:
    """Log-sum-exp of the permissible terms of a signature multiset plus the log-likelihood."""
    from .estimate import loglik_from_sigma

    theta = np.asarray(theta, dtype=float)
    sigma, spec = _factor(model, theta)
    gg = grad_g(model, theta)
    terms = [_term(spec, z, data.y, gg, method) for z in np.asarray(zset)]
    return _evaluation(theta, loglik_from_sigma(sigma, data.y), terms)


def _evaluation(theta, log_like, terms) -> GcfdEvaluation:
    vals = np.array([t.log_j for t in terms if t.permissible])
    n_deg = sum(t.degenerate for t in terms)
    log_sum = float(logsumexp(vals)) if vals.size else EXCLUDED
    return GcfdEvaluation(theta=theta, log_like=float(log_like), log_j_sum=log_sum,
                          n_permissible=int(vals.size), n_degenerate=n_deg)


def log_gcfd_full(theta, data: Dataset, model: ModelSpec, method: str = "structured") -> float:
    """Exact unnormalized log target: likelihood times the sum over all det-+1 ``Z``."""
    if model.d > 12:
        raise EnumerationTooLarge(f"2**{model.d - 1} signature matrices")
    ev = log_jacobian_sum(theta, cayley.all_signatures(model.d), data, model, method)
    return ev.log_target
