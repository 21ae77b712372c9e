"""Likelihood, MLE, composite-likelihood windows and chain summaries."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg, optimize

from .errors import NoConvergenceWarning, NotPositiveDefinite, WindowTooLarge
from .model import Dataset, ModelSpec, build_sigma, validate_params

LOG_2PI = math.log(2.0 * math.pi)


def loglik_from_sigma(sigma: np.ndarray, y: np.ndarray) -> float:
    """Zero-mean Gaussian log-density of the rows of ``y``, summed."""
    y = np.atleast_2d(y)
    m, d = y.shape
    try:
        chol = linalg.cholesky(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if m == 0:
        return 0.0
    white = linalg.solve_triangular(chol, y.T, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * m * (d * LOG_2PI + logdet) - 0.5 * np.sum(white * white))


def gaussian_loglik(theta, data: Dataset, model: ModelSpec) -> float:
    return loglik_from_sigma(build_sigma(model, theta), data.y)


# -- MLE ----------------------------------------------------------------------------


@dataclass
class MLEResult:
    theta: np.ndarray
    log_like: float
    converged: bool
    n_evals: int


def mle_fit(data: Dataset, model: ModelSpec, theta0, restarts: int = 3, seed: int = 0,
            max_evals: int = 5000, xatol: float = 1e-6, fatol: float = 1e-8) -> MLEResult:
    """Maximize the Gaussian log-likelihood with Nelder-Mead.

    Runs from ``theta0`` and from ``restarts`` jittered copies of it, then
    polishes the best point once more.  Invalid parameters score ``-inf``.
    Ties are broken by restart index, so the result is deterministic.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if not validate_params(model, theta0):
        raise ValueError(f"theta0={theta0.tolist()} is outside the parameter space")

    def negll(th):
        if not validate_params(model, th):
            return np.inf
        try:
            return -gaussian_loglik(th, data, model)
        except NotPositiveDefinite:
            return np.inf

    rng = np.random.default_rng(seed)
    starts = [theta0]
    while len(starts) < restarts + 1:
        cand = theta0 * (1.0 + 0.1 * rng.standard_normal(theta0.size)) + 0.01 * rng.standard_normal(theta0.size)
        if validate_params(model, cand):
            starts.append(cand)

    opts = dict(xatol=xatol, fatol=fatol, maxfev=max_evals, maxiter=max_evals)
    best = None
    total = 0
    for idx, start in enumerate(starts):
        res = optimize.minimize(negll, start, method="Nelder-Mead", options=opts)
        total += res.nfev
        if best is None or res.fun < best[0].fun:
            best = (res, idx)
    res = optimize.minimize(negll, best[0].x, method="Nelder-Mead", options=opts)
    total += res.nfev
    if res.fun > best[0].fun:
        res = best[0]
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"Nelder-Mead did not converge: {res.message}", NoConvergenceWarning, stacklevel=2)
    return MLEResult(theta=np.asarray(res.x), log_like=float(-res.fun), converged=converged, n_evals=total)


# -- composite likelihood -----------------------------------------------------------


def composite_split(y: np.ndarray, w: int) -> np.ndarray:
    """All stride-1 windows of length ``w`` of every row, replicate-major.

    An ``(m, d)`` array becomes ``(m * (d - w + 1), w)``.
    """
    y = np.atleast_2d(np.asarray(y))
    d = y.shape[1]
    if w > d:
        raise WindowTooLarge(f"window {w} exceeds series length {d}")
    if w < 2:
        raise ValueError("window length must be at least 2")
    return sliding_window_view(y, w, axis=1).reshape(-1, w).copy()


# -- summaries ------------------------------------------------------------------------


@dataclass
class ChainSummary:
    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    acceptance_rate: float
    n_kept: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "q025": self.q025.tolist(),
            "q975": self.q975.tolist(),
            "acceptance_rate": float(self.acceptance_rate),
            "n_kept": int(self.n_kept),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ChainSummary":
        return cls(np.array(obj["mean"]), np.array(obj["q025"]), np.array(obj["q975"]),
                   float(obj["acceptance_rate"]), int(obj["n_kept"]))


@dataclass
class CoverageReport:
    per_param: np.ndarray
    joint: float
    n_runs: int

    def to_dict(self) -> dict:
        return {"per_param": self.per_param.tolist(), "joint": float(self.joint), "n_runs": self.n_runs}


def summarize_chain(record, burn_in: int) -> ChainSummary:
    """Mean, 2.5% and 97.5% quantiles (linear interpolation) after ``burn_in`` rows."""
    theta = np.asarray(record.theta)
    if not 0 <= burn_in < theta.shape[0]:
        raise ValueError("burn_in must be smaller than the chain length")
    kept = theta[burn_in:]
    acc = np.asarray(record.accepted)[burn_in:]
    return ChainSummary(
        mean=kept.mean(axis=0),
        q025=np.quantile(kept, 0.025, axis=0, method="linear"),
        q975=np.quantile(kept, 0.975, axis=0, method="linear"),
        acceptance_rate=float(acc.mean()),
        n_kept=kept.shape[0],
    )


def coverage(summaries: list[ChainSummary], theta_true) -> CoverageReport:
    if not summaries:
        raise ValueError("need at least one summary")
    theta_true = np.asarray(theta_true, dtype=float)
    lo = np.array([s.q025 for s in summaries])
    hi = np.array([s.q975 for s in summaries])
    hit = (lo <= theta_true) & (theta_true <= hi)
    return CoverageReport(per_param=hit.mean(axis=0), joint=float(hit.all(axis=1).mean()),
                          n_runs=len(summaries))
