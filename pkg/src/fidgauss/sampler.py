"""Pseudo-marginal fiducial Metropolis-Hastings over (theta, signature multiset).

Each step draws random numbers in a fixed order from the chain's single
generator: the proposal increment; then, only if the proposal is valid, the
kept-subset permutation, the fresh signature bits and finally the uniform
acceptance coin (the coin is skipped when no sampled signature is
permissible).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import cayley
from .errors import ConfigError, InitFailed
from .gcfd import EXCLUDED, log_jacobian_sum
from .model import Dataset, ModelSpec, validate_params


@dataclass
class SamplerConfig:
    steps: int = 6000
    burn_in: int = 1000
    step_stds: tuple = (0.1,)
    k: int = 8
    q: Optional[int] = None  # kept signature count; defaults to k // 2
    mode: str = "joint"  # or "cyclic"
    seed: int = 0
    max_init_tries: int = 100
    method: str = "structured"

    def __post_init__(self):
        if self.q is None:
            self.q = self.k // 2
        self.step_stds = tuple(float(s) for s in np.atleast_1d(self.step_stds))
        if self.k < 1:
            raise ConfigError("sampler.k must be at least 1")
        if not 0 <= self.q < self.k:
            raise ConfigError(f"sampler.q={self.q} must satisfy 0 <= q < k={self.k}")
        if self.steps < 1:
            raise ConfigError("sampler.steps must be positive")
        if not 0 <= self.burn_in < self.steps:
            raise ConfigError(f"sampler.burn_in={self.burn_in} must be below sampler.steps={self.steps}")
        if not all(s > 0 for s in self.step_stds):
            raise ConfigError("sampler.step_stds must all be positive")
        if self.mode not in ("joint", "cyclic"):
            raise ConfigError(f"sampler.mode must be 'joint' or 'cyclic', got {self.mode!r}")
        if self.max_init_tries < 0:
            raise ConfigError("sampler.max_init_tries must be non-negative")

    def stds_for(self, p: int) -> np.ndarray:
        stds = np.asarray(self.step_stds, dtype=float)
        if stds.size == 1:
            return np.full(p, stds[0])
        if stds.size != p:
            raise ConfigError(f"sampler.step_stds has {stds.size} entries, model has {p} parameters")
        return stds


@dataclass
class ChainState:
    theta: np.ndarray
    zset: np.ndarray  # (k, d) int8 signature diagonals
    log_like: float
    log_j_sum: float
    n_permissible: int

    @property
    def log_target(self) -> float:
        return self.log_like + self.log_j_sum


class StepRow(NamedTuple):
    theta: np.ndarray
    log_like: float
    log_j_sum: float
    accepted: bool
    n_permissible: int
    n_degenerate: int = 0  # signature terms dropped for singular Jacobians


@dataclass
class ChainRecord:
    theta: np.ndarray
    log_like: np.ndarray
    log_j_sum: np.ndarray
    accepted: np.ndarray
    n_permissible: np.ndarray
    param_names: tuple = ()
    n_degenerate: int = field(default=0)

    def __len__(self):
        return self.theta.shape[0]


def propose(theta: np.ndarray, cfg: SamplerConfig, step_index: int,
            rng: np.random.Generator) -> np.ndarray:
    """Symmetric Gaussian random-walk proposal.

    Joint mode moves every coordinate; cyclic mode moves only coordinate
    ``step_index % p``.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    stds = cfg.stds_for(p)
    out = theta.copy()
    if cfg.mode == "joint":
        out += stds * rng.standard_normal(p)
    else:
        j = step_index % p
        out[j] += stds[j] * rng.standard_normal()
    return out


def refresh_signatures(zset: np.ndarray, cfg: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """Keep ``q`` members (without replacement) and draw ``k - q`` fresh ones (with replacement)."""
    zset = np.asarray(zset)
    k, d = zset.shape
    kept = zset[rng.permutation(k)[: cfg.q]]
    fresh = cayley.sample_signatures(d, k - cfg.q, rng)
    return np.concatenate([kept, fresh], axis=0)


def _evaluate(theta, zset, data, model, cfg):
    return log_jacobian_sum(theta, zset, data, model, method=cfg.method)


def mh_step(state: ChainState, data: Dataset, model: ModelSpec, cfg: SamplerConfig,
            step_index: int, rng: np.random.Generator) -> tuple[ChainState, StepRow]:
    """One Metropolis-Hastings update; every failure mode is a rejection."""
    prop = propose(state.theta, cfg, step_index, rng)
    accepted = False
    new = state
    degenerate = 0
    if validate_params(model, prop):
        zset = refresh_signatures(state.zset, cfg, rng)
        ev = _evaluate(prop, zset, data, model, cfg)
        degenerate = ev.n_degenerate
        if ev.n_permissible > 0 and np.isfinite(ev.log_like):
            log_ratio = ev.log_target - state.log_target
            if math.log(rng.random()) < log_ratio:
                accepted = True
                new = ChainState(theta=prop, zset=zset, log_like=ev.log_like,
                                 log_j_sum=ev.log_j_sum, n_permissible=ev.n_permissible)
    row = StepRow(new.theta, new.log_like, new.log_j_sum, accepted, new.n_permissible, degenerate)
    return new, row


def init_state(theta0, data: Dataset, model: ModelSpec, cfg: SamplerConfig,
               rng: np.random.Generator) -> ChainState:
    """Draw signature multisets until at least one member is permissible at ``theta0``."""
    theta0 = np.asarray(theta0, dtype=float)
    if not validate_params(model, theta0):
        raise ValueError(f"theta0={theta0.tolist()} is outside the parameter space")
    for _ in range(cfg.max_init_tries):
        zset = cayley.sample_signatures(model.d, cfg.k, rng)
        ev = _evaluate(theta0, zset, data, model, cfg)
        if ev.n_permissible > 0:
            return ChainState(theta=theta0, zset=zset, log_like=ev.log_like,
                              log_j_sum=ev.log_j_sum, n_permissible=ev.n_permissible)
    raise InitFailed(f"no permissible signature set at theta0={theta0.tolist()} "
                     f"after {cfg.max_init_tries} tries")


def run_chain(theta0, data: Dataset, model: ModelSpec, cfg: SamplerConfig) -> ChainRecord:
    """Run ``cfg.steps`` updates from ``theta0``; burn-in rows are kept in the record."""
    rng = np.random.default_rng(cfg.seed)
    state = init_state(theta0, data, model, cfg, rng)
    n = cfg.steps
    theta = np.empty((n, model.p))
    log_like = np.empty(n)
    log_j = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    n_perm = np.empty(n, dtype=np.int64)
    n_deg = 0
    for i in range(n):
        state, row = mh_step(state, data, model, cfg, i, rng)
        n_deg += row.n_degenerate
        theta[i] = row.theta
        log_like[i] = row.log_like
        log_j[i] = row.log_j_sum
        accepted[i] = row.accepted
        n_perm[i] = row.n_permissible
    return ChainRecord(theta=theta, log_like=log_like, log_j_sum=log_j, accepted=accepted,
                       n_permissible=n_perm, param_names=model.param_names, n_degenerate=n_deg)


# -- stationary law and transition density of the augmented chain -----------------


def log_stationary_density(theta, zset, data: Dataset, model: ModelSpec,
                           method: str = "structured") -> float:
    """Unnormalized ``log pi(theta, {Z_i})``: likelihood times the sum of signature
    Jacobians, scaled by ``(k 2^{(k-1)(d-1)})^{-1}``."""
    zset = np.asarray(zset)
    k, d = zset.shape
    if not validate_params(model, theta):
        return EXCLUDED
    ev = log_jacobian_sum(theta, zset, data, model, method)
    return ev.log_target - math.log(k) - (k - 1) * (d - 1) * math.log(2.0)


def multiset_overlap(z1: np.ndarray, z2: np.ndarray) -> int:
    """Size of the multiset intersection of two signature multisets."""
    from collections import Counter

    c1 = Counter(map(bytes, np.asarray(z1, dtype=np.int8)))
    c2 = Counter(map(bytes, np.asarray(z2, dtype=np.int8)))
    return sum((c1 & c2).values())


def log_transition_density(theta, zset, theta_new, zset_new, data: Dataset, model: ModelSpec,
                           cfg: SamplerConfig, method: str = "structured") -> float:
    """Log density of moving ``(theta, zset) -> (theta_new, zset_new)`` in joint mode:

    ``phi(theta, theta') C(w, q) C(k, q)^{-1} (2^{-(d-1)})^{k-q} min[1, ratio]``
    with ``w`` the number of shared signature matrices; ``-inf`` if ``w < q`` or
    no member of ``zset_new`` is permissible at ``theta_new``.
    """
    zset = np.asarray(zset)
    k, d = zset.shape
    q = cfg.q
    w = multiset_overlap(zset, zset_new)
    if w < q or not validate_params(model, theta_new):
        return EXCLUDED
    cur = log_jacobian_sum(theta, zset, data, model, method)
    new = log_jacobian_sum(theta_new, zset_new, data, model, method)
    if new.n_permissible == 0:
        return EXCLUDED
    stds = cfg.stds_for(model.p)
    diff = (np.asarray(theta_new, float) - np.asarray(theta, float)) / stds
    log_phi = float(-0.5 * diff @ diff - np.sum(np.log(stds)) - 0.5 * model.p * math.log(2 * math.pi))
    log_sel = (math.log(math.comb(w, q)) - math.log(math.comb(k, q))
               - (k - q) * (d - 1) * math.log(2.0))
    return log_phi + log_sel + min(0.0, new.log_target - cur.log_target)
