"""Generalized fiducial MCMC for parametric Gaussian covariance models."""

from .cayley import (
    all_signatures,
    cayley_forward,
    cayley_inverse,
    is_permissible,
    reconstruct_sigma,
    signature_sample,
    spectral_decompose,
)
from .estimate import (
    coverage,
    composite_split,
    gaussian_loglik,
    mle_fit,
    summarize_chain,
)
from .gcfd import log_gcfd_full, log_jacobian_sum, log_jacobian_term
from .model import (
    Dataset,
    ModelSpec,
    build_sigma,
    grad_g,
    ma1_model,
    make_jittered_grid,
    matern_model,
    simulate,
    toy_model,
    validate_params,
)
from .sampler import SamplerConfig, run_chain

__version__ = "0.1.0"

__all__ = [
    "all_signatures",
    "cayley_forward",
    "cayley_inverse",
    "is_permissible",
    "reconstruct_sigma",
    "signature_sample",
    "spectral_decompose",
    "coverage",
    "composite_split",
    "gaussian_loglik",
    "mle_fit",
    "summarize_chain",
    "Dataset",
    "ModelSpec",
    "build_sigma",
    "grad_g",
    "ma1_model",
    "make_jittered_grid",
    "matern_model",
    "simulate",
    "toy_model",
    "validate_params",
    "log_gcfd_full",
    "log_jacobian_sum",
    "log_jacobian_term",
    "SamplerConfig",
    "run_chain",
]
