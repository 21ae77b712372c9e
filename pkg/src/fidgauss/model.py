"""Zero-mean Gaussian model families.

A :class:`ModelSpec` carries three user functions: the covariance builder
``Sigma(theta)``, its gradient ``d vech(Sigma) / d theta`` and a validity
predicate.  Built-in families are MA(1), Matern and a one-parameter scale
model ``theta * Sigma0`` that is handy for exact checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DimensionMismatch, DomainError, MissingSites, NotPositiveDefinite
from .vech import triu_index, vech

TOY_SIGMA0 = np.array([[1.0, 0.3], [0.3, 1.0]])


@dataclass(frozen=True)
class ModelSpec:
    """A parametric covariance family on ``d`` coordinates.

    ``sigma_fn(theta) -> (d, d)``, ``grad_fn(theta) -> (d(d+1)/2, p)`` and
    ``valid_fn(theta) -> bool``.  Functions must be picklable (module-level
    or :func:`functools.partial`) so chains can run in worker processes.
    """

    name: str
    p: int
    d: int
    sigma_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    valid_fn: Callable[[np.ndarray], bool]
    param_names: tuple[str, ...] = ()
    sites: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.p > self.d * (self.d + 1) // 2:
            raise ValueError(f"p={self.p} exceeds the d(d+1)/2 unique covariance entries")
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"theta_{i + 1}" for i in range(self.p)))


@dataclass
class Dataset:
    """``y`` is ``(m, d)``: one row per independent replicate."""

    y: np.ndarray
    sites: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2:
            raise DimensionMismatch("data must be a 2-d array (replicates x coordinates)")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("data contain non-finite entries")

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.y.shape[1]


def _as_theta(model: ModelSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != model.p:
        raise DimensionMismatch(f"{model.name} expects {model.p} parameters, got {theta.shape[0]}")
    return theta


def validate_params(model: ModelSpec, theta) -> bool:
    theta = _as_theta(model, theta)
    if not np.all(np.isfinite(theta)):
        return False
    return bool(model.valid_fn(theta))


def build_sigma(model: ModelSpec, theta) -> np.ndarray:
    return model.sigma_fn(_as_theta(model, theta))


def grad_g(model: ModelSpec, theta) -> np.ndarray:
    return model.grad_fn(_as_theta(model, theta))


# -- MA(1): theta = (rho, sigma2) ------------------------------------------------


def _ma1_valid(theta):
    rho, s2 = theta
    return -1.0 <= rho <= 1.0 and s2 > 0.0


def _ma1_sigma(theta, d):
    rho, s2 = theta
    off = np.full(d - 1, s2 * rho)
    return np.diag(np.full(d, s2 * (1.0 + rho * rho))) + np.diag(off, 1) + np.diag(off, -1)


def _ma1_grad(theta, d):
    rho, s2 = theta
    rows, cols = triu_index(d)
    lag = cols - rows
    out = np.zeros((rows.size, 2))
    out[lag == 0, 0] = 2.0 * s2 * rho
    out[lag == 1, 0] = s2
    out[lag == 0, 1] = 1.0 + rho * rho
    out[lag == 1, 1] = rho
    return out


def ma1_model(d: int) -> ModelSpec:
    """Moving average of order one observed over ``d`` consecutive times."""
    return ModelSpec(
        name="ma1",
        p=2,
        d=d,
        sigma_fn=partial(_ma1_sigma, d=d),
        grad_fn=partial(_ma1_grad, d=d),
        valid_fn=_ma1_valid,
        param_names=("rho", "sigma2"),
    )


# -- toy scale model: Sigma = theta * Sigma0 --------------------------------------


def _toy_valid(theta):
    return theta[0] > 0.0


def _toy_sigma(theta, sigma0):
    return theta[0] * sigma0


def _toy_grad(theta, sigma0):
    return vech(sigma0)[:, None].copy()


def toy_model(sigma0: np.ndarray = TOY_SIGMA0) -> ModelSpec:
    sigma0 = np.array(sigma0, dtype=float)
    return ModelSpec(
        name="toy",
        p=1,
        d=sigma0.shape[0],
        sigma_fn=partial(_toy_sigma, sigma0=sigma0),
        grad_fn=partial(_toy_grad, sigma0=sigma0),
        valid_fn=_toy_valid,
        param_names=("theta",),
    )


# -- Matern: theta = (nu, sigma2, range) ------------------------------------------


def bessel_k(nu, x):
    """Modified Bessel function of the second kind ``K_nu(x)`` for real order.

    Negative orders use ``K_{-nu} = K_nu``.  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("bessel_k requires x > 0")
    out = special.kv(np.abs(np.asarray(nu, dtype=float)), x)
    return out if out.ndim else float(out)


def matern_cov(dist, nu: float, sigma2: float, rho: float) -> np.ndarray:
    """Matern covariance at distances ``dist``; ``C(0) = sigma2``."""
    dist = np.asarray(dist, dtype=float)
    out = np.full(dist.shape, float(sigma2))
    pos = dist >= 1e-12
    if np.any(pos):
        x = math.sqrt(2.0 * nu) * dist[pos] / rho
        # sigma2 * 2^{1-nu} / Gamma(nu) * x^nu * K_nu(x), in logs for large nu
        logc = (1.0 - nu) * math.log(2.0) - special.gammaln(nu) + nu * np.log(x)
        out[pos] = sigma2 * np.exp(logc) * special.kv(nu, x)
    return out


def pairwise_distances(sites: np.ndarray) -> np.ndarray:
    sites = np.asarray(sites, dtype=float)
    diff = sites[:, None, :] - sites[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _matern_valid(theta):
    nu, s2, rho = theta
    return nu > 0.0 and s2 > 0.0 and rho > 0.0


def _matern_sigma(theta, dist):
    nu, s2, rho = theta
    d = dist.shape[0]
    rows, cols = triu_index(d)
    vals = matern_cov(dist[rows, cols], nu, s2, rho)
    out = np.empty((d, d))
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


def _matern_grad(theta, dist):
    nu, s2, rho = theta
    rows, cols = triu_index(dist.shape[0])
    r = dist[rows, cols]
    out = np.empty((r.size, 3))
    for k in (0, 2):
        h = 1e-6 * (1.0 + abs(theta[k]))
        up = np.array(theta, dtype=float)
        dn = np.array(theta, dtype=float)
        up[k] += h
        dn[k] -= h
        out[:, k] = (matern_cov(r, *up) - matern_cov(r, *dn)) / (2.0 * h)
    out[:, 1] = matern_cov(r, nu, 1.0, rho)
    return out


def matern_model(sites: np.ndarray) -> ModelSpec:
    """Isotropic Matern field observed at planar ``sites`` (shape ``(d, 2)``)."""
    if sites is None:
        raise MissingSites("the Matern model needs site coordinates")
    sites = np.asarray(sites, dtype=float)
    dist = pairwise_distances(sites)
    return ModelSpec(
        name="matern",
        p=3,
        d=sites.shape[0],
        sigma_fn=partial(_matern_sigma, dist=dist),
        grad_fn=partial(_matern_grad, dist=dist),
        valid_fn=_matern_valid,
        param_names=("nu", "sigma2", "rho"),
        sites=sites,
    )


def make_model(name: str, d: Optional[int] = None, sites: Optional[np.ndarray] = None) -> ModelSpec:
    if name == "ma1":
        if d is None:
            raise ValueError("ma1 needs a dimension d")
        return ma1_model(d)
    if name == "matern":
        return matern_model(sites)
    if name == "toy":
        return toy_model()
    raise ValueError(f"unknown model {name!r}")


# -- data ---------------------------------------------------------------------------


def sqrtm_psd(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root of an SPD matrix."""
    evals, evecs = np.linalg.eigh(sigma)
    if not evals[0] > 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {evals[0]:.3g} is not positive")
    root = (evecs * np.sqrt(evals)) @ evecs.T
    return 0.5 * (root + root.T)


def simulate(model: ModelSpec, theta, m: int, rng: np.random.Generator) -> Dataset:
    """``m`` independent draws of ``Sigma(theta)^{1/2} U`` with ``U ~ N(0, I)``."""
    if not validate_params(model, theta):
        raise ValueError(f"invalid parameters {theta!r} for {model.name}")
    root = sqrtm_psd(build_sigma(model, theta))
    u = rng.standard_normal((m, model.d))
    return Dataset(y=u @ root, sites=model.sites)


def make_jittered_grid(rows: int, cols: int, jitter_halfwidth: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Unit grid ``(r + u, c + v)`` with ``u, v ~ U(-h, h)``; row-major site order."""
    if not 0.0 <= jitter_halfwidth < 0.5:
        raise ValueError("jitter half-width must lie in [0, 0.5)")
    rr, cc = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float), indexing="ij")
    base = np.column_stack([rr.ravel(), cc.ravel()])
    return base + rng.uniform(-jitter_halfwidth, jitter_halfwidth, size=base.shape)
