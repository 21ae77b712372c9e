"""Compare a long toy-model chain with the exact inverse-gamma target.

For Sigma = theta * Sigma0 the fiducial target is inverse gamma with shape
m*d/2 - 2 and scale Q/2, where Q sums y' Sigma0^{-1} y over replicates.
"""

import argparse

import numpy as np
from scipy import stats

from fidgauss import SamplerConfig, run_chain, simulate, toy_model
from fidgauss.model import TOY_SIGMA0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--theta", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args()

    model = toy_model()
    data = simulate(model, [args.theta], args.m, np.random.default_rng(args.seed))
    quad = np.einsum("ri,ij,rj->", data.y, np.linalg.inv(TOY_SIGMA0), data.y)
    target = stats.invgamma(data.y.size / 2 - 2, scale=quad / 2)
    burn = args.steps // 10
    cfg = SamplerConfig(steps=args.steps, burn_in=burn, k=2, q=1, step_stds=(1.2,), seed=args.seed)
    rec = run_chain([args.theta], data, model, cfg)
    draws = rec.theta[burn:, 0]
    print(f"chain mean {draws.mean():.4f}, target mean {target.mean():.4f}")
    print(f"acceptance {rec.accepted[burn:].mean():.3f}, KS distance {stats.kstest(draws, target.cdf).statistic:.4f}")


if __name__ == "__main__":
    main()
