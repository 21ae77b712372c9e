"""``fidgauss`` command line: simulate | fit | mle | split | replicate.

Every command reads one JSON config (``--config``); any ``--a.b=value`` flag
overrides the config key ``a.b`` (values are parsed as JSON when possible).
Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import ConfigError, FidGaussError, InitFailed, MissingSites, WindowTooLarge
from .estimate import ChainSummary, composite_split, coverage, mle_fit, summarize_chain
from .model import Dataset, ModelSpec, make_jittered_grid, make_model, simulate, validate_params
from .sampler import SamplerConfig, run_chain

logger = logging.getLogger("fidgauss")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

DEFAULTS = {
    "model": {"name": "ma1", "d": None, "grid": {"rows": 5, "cols": 10, "jitter": 0.1, "seed": 0}},
    "theta_true": None,
    "theta0": None,
    "data_path": None,
    "sites_path": None,
    "output_dir": "out",
    "simulate": {"m": 20, "seed": 1},
    "sampler": {"k": 8, "q": None, "steps": 6000, "burn_in": 1000, "step_stds": None,
                "mode": "joint", "seed": 0, "max_init_tries": 100},
    "mle": {"restarts": 3, "seed": 0},
    "runs": 1,
    "threads": 1,
    "window": None,
    "histogram": {"bins": 20},
}

DEFAULT_STEPS = {"ma1": (0.05, 0.4), "matern": (0.05, 0.05, 0.05), "toy": (0.1,)}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"override {item!r} must look like --key.path=value")
        key, _, raw = item[2:].partition("=")
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(raw)
    return cfg


def load_config(path: Optional[str], overrides: list[str]) -> dict:
    cfg = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    return apply_overrides(_merge(DEFAULTS, cfg), overrides)


@dataclass
class RunConfig:
    raw: dict
    model_name: str
    output_dir: Path
    data_path: Optional[Path] = None
    sites_path: Optional[Path] = None
    theta_true: Optional[np.ndarray] = None
    theta0: Optional[np.ndarray] = None
    runs: int = 1
    threads: int = 1
    sampler: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        name = raw["model"].get("name")
        if name not in ("ma1", "matern", "toy"):
            raise ConfigError(f"model.name must be ma1, matern or toy, got {name!r}")
        runs, threads = raw.get("runs"), raw.get("threads")
        if not isinstance(runs, int) or runs < 1:
            raise ConfigError("runs must be an integer >= 1")
        if not isinstance(threads, int) or threads < 1:
            raise ConfigError("threads must be an integer >= 1")

        def path(key):
            val = raw.get(key)
            return Path(val) if val else None

        def vec(key):
            val = raw.get(key)
            return None if val is None else np.asarray(val, dtype=float).reshape(-1)

        samp = dict(raw["sampler"])
        if samp.get("step_stds") is None:
            samp["step_stds"] = DEFAULT_STEPS[name]
        try:
            SamplerConfig(**samp)  # validate early
        except TypeError as exc:
            raise ConfigError(f"bad sampler block: {exc}") from exc
        return cls(raw=raw, model_name=name, output_dir=Path(raw["output_dir"]),
                   data_path=path("data_path"), sites_path=path("sites_path"),
                   theta_true=vec("theta_true"), theta0=vec("theta0"),
                   runs=runs, threads=threads, sampler=samp)

    def sampler_config(self, seed_offset: int = 0) -> SamplerConfig:
        cfg = SamplerConfig(**self.sampler)
        cfg.seed = int(cfg.seed) + seed_offset
        return cfg

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"config key {name!r} is required for this command")
        for name in ("data_path", "sites_path"):
            if name in names and not getattr(self, name).is_file():
                raise ConfigError(f"{name} {getattr(self, name)} does not exist")


# -- model / data plumbing ------------------------------------------------------------


def _sites(rc: RunConfig, generate: bool) -> Optional[np.ndarray]:
    if rc.model_name != "matern":
        return None
    if rc.sites_path is not None:
        if not rc.sites_path.is_file():
            raise ConfigError(f"sites_path {rc.sites_path} does not exist")
        return io.read_sites(rc.sites_path)
    if not generate:
        raise MissingSites("the matern model needs sites_path")
    grid = rc.raw["model"]["grid"]
    rng = np.random.default_rng(int(grid.get("seed", 0)))
    return make_jittered_grid(int(grid["rows"]), int(grid["cols"]), float(grid["jitter"]), rng)


def _model(rc: RunConfig, d: Optional[int], sites) -> ModelSpec:
    if rc.model_name == "ma1":
        d_cfg = rc.raw["model"].get("d")
        if d is None:
            d = d_cfg
        elif d_cfg is not None and int(d_cfg) != d:
            raise ConfigError(f"model.d={d_cfg} disagrees with data width {d}")
        if d is None:
            raise ConfigError("model.d is required for ma1 without data")
        return make_model("ma1", d=int(d))
    spec = make_model(rc.model_name, sites=sites)
    if d is not None and spec.d != d:
        raise ConfigError(f"{rc.model_name} model has d={spec.d} but data have {d} columns")
    return spec


def _check_theta(model: ModelSpec, theta, key):
    if theta.size != model.p:
        raise ConfigError(f"{key} has {theta.size} entries, {model.name} needs {model.p}")
    if not validate_params(model, theta):
        raise ConfigError(f"{key}={theta.tolist()} is outside the parameter space")


def _load_data(rc: RunConfig) -> tuple[Dataset, ModelSpec]:
    rc.require("data_path")
    y = io.read_matrix_csv(rc.data_path)
    if y.ndim != 2 or y.shape[1] < 2:
        raise ConfigError(f"{rc.data_path}: need at least two columns")
    sites = _sites(rc, generate=False)
    model = _model(rc, y.shape[1], sites)
    return Dataset(y=y, sites=sites), model


# -- commands ---------------------------------------------------------------------------


def cmd_simulate(rc: RunConfig) -> dict:
    rc.require("theta_true")
    sites = _sites(rc, generate=True)
    model = _model(rc, None, sites)
    _check_theta(model, rc.theta_true, "theta_true")
    sim = rc.raw["simulate"]
    rng = np.random.default_rng(int(sim["seed"]))
    data = simulate(model, rc.theta_true, int(sim["m"]), rng)
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    io.write_matrix_csv(rc.output_dir / "data.csv", data.y)
    out = {"data": str(rc.output_dir / "data.csv")}
    if sites is not None and rc.sites_path is None:
        io.write_sites(rc.output_dir / "sites.csv", sites)
        out["sites"] = str(rc.output_dir / "sites.csv")
    return out


def _fit_one(model, data, theta0, cfg: SamplerConfig, burn_in):
    rec = run_chain(theta0, data, model, cfg)
    return rec, summarize_chain(rec, burn_in)


def cmd_fit(rc: RunConfig) -> dict:
    data, model = _load_data(rc)
    rc.require("theta0")
    _check_theta(model, rc.theta0, "theta0")
    cfg = rc.sampler_config()
    t0 = time.perf_counter()
    rec, summ = _fit_one(model, data, rc.theta0, cfg, cfg.burn_in)
    elapsed = time.perf_counter() - t0
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    io.write_chain_csv(rc.output_dir / "chain.csv", rec)
    summary = {
        "config": rc.raw,
        "seed": cfg.seed,
        "param_names": list(model.param_names),
        "summary": summ.to_dict(),
        "n_degenerate_terms": int(rec.n_degenerate),
    }
    if rc.theta_true is not None:
        summary["coverage"] = coverage([summ], rc.theta_true).to_dict()
    io.dump_json(rc.output_dir / "summary.json", summary)
    io.dump_json(rc.output_dir / "timing.json", {"wall_clock_seconds": elapsed})
    return summary


def cmd_mle(rc: RunConfig) -> dict:
    data, model = _load_data(rc)
    start = rc.theta0 if rc.theta0 is not None else rc.theta_true
    if start is None:
        raise ConfigError("config key 'theta0' is required for this command")
    _check_theta(model, start, "theta0")
    opts = rc.raw["mle"]
    res = mle_fit(data, model, start, restarts=int(opts["restarts"]), seed=int(opts["seed"]))
    out = {"config": rc.raw, "param_names": list(model.param_names), "theta": res.theta.tolist(),
           "log_like": res.log_like, "converged": res.converged, "n_evals": res.n_evals}
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    io.dump_json(rc.output_dir / "mle.json", out)
    return out


def cmd_split(rc: RunConfig) -> dict:
    rc.require("data_path")
    w = rc.raw.get("window")
    if not isinstance(w, int):
        raise ConfigError("window must be an integer")
    y = io.read_matrix_csv(rc.data_path)
    parts = composite_split(y, w)
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    io.write_matrix_csv(rc.output_dir / "split.csv", parts)
    return {"rows": int(parts.shape[0]), "cols": int(parts.shape[1])}


def _replicate_one(job):
    """Worker for one replicate run; must stay module-level for process pools."""
    rc, model, index, chain_path = job
    sim = rc.raw["simulate"]
    cfg = rc.sampler_config(seed_offset=index)
    try:
        data = simulate(model, rc.theta_true, int(sim["m"]), np.random.default_rng(int(sim["seed"]) + index))
        rec, summ = _fit_one(model, data, rc.theta0, cfg, cfg.burn_in)
        io.write_chain_csv(chain_path, rec)
        opts = rc.raw["mle"]
        mle = mle_fit(data, model, rc.theta_true, restarts=int(opts["restarts"]), seed=int(opts["seed"]) + index)
        return {"run": index, "seed": cfg.seed, "summary": summ.to_dict(), "mle": mle.theta.tolist(),
                "mle_converged": mle.converged, "n_degenerate_terms": int(rec.n_degenerate), "error": None}
    except FidGaussError as exc:
        return {"run": index, "seed": cfg.seed, "error": f"{type(exc).__name__}: {exc}"}


def layered_histogram(names, mcmc: np.ndarray, mle: np.ndarray, bins: int) -> list[list]:
    rows = []
    for j, name in enumerate(names):
        both = np.concatenate([mcmc[:, j], mle[:, j]])
        edges = np.histogram_bin_edges(both, bins=bins)
        c1, _ = np.histogram(mcmc[:, j], bins=edges)
        c2, _ = np.histogram(mle[:, j], bins=edges)
        for b in range(bins):
            rows.append([name, edges[b], edges[b + 1], int(c1[b]), int(c2[b])])
    return rows


def cmd_replicate(rc: RunConfig) -> dict:
    rc.require("theta_true", "theta0")
    sites = _sites(rc, generate=True)
    model = _model(rc, None, sites)
    _check_theta(model, rc.theta_true, "theta_true")
    _check_theta(model, rc.theta0, "theta0")
    run_dir = rc.output_dir / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    if sites is not None:
        io.write_sites(rc.output_dir / "sites.csv", sites)
    jobs = [(rc, model, i, run_dir / f"chain_{i:04d}.csv") for i in range(rc.runs)]
    t0 = time.perf_counter()
    if rc.threads > 1:
        with ProcessPoolExecutor(max_workers=rc.threads) as pool:
            results = list(pool.map(_replicate_one, jobs))
    else:
        results = [_replicate_one(job) for job in jobs]
    elapsed = time.perf_counter() - t0

    ok = [r for r in results if r["error"] is None]
    names = list(model.param_names)
    per_run_header = (["run", "seed"] + [f"mcmc_mean_{n}" for n in names] + [f"mle_{n}" for n in names]
                      + [f"q025_{n}" for n in names] + [f"q975_{n}" for n in names] + ["acceptance_rate"])
    with open(rc.output_dir / "per_run.csv", "w", newline="") as fh:
        fh.write(",".join(per_run_header) + "\n")
        for r in ok:
            s = r["summary"]
            vals = [str(r["run"]), str(r["seed"])]
            vals += [io.fmt(v) for v in (*s["mean"], *r["mle"], *s["q025"], *s["q975"], s["acceptance_rate"])]
            fh.write(",".join(vals) + "\n")
    out = {"config": rc.raw, "param_names": names, "runs": results}
    if ok:
        summaries = [ChainSummary.from_dict(r["summary"]) for r in ok]
        cov = coverage(summaries, rc.theta_true)
        out["coverage"] = cov.to_dict()
        io.dump_json(rc.output_dir / "coverage.json", cov.to_dict())
        bins = int(rc.raw["histogram"]["bins"])
        hist = layered_histogram(names, np.array([s.mean for s in summaries]),
                                 np.array([r["mle"] for r in ok]), bins)
        with open(rc.output_dir / "histogram.csv", "w", newline="") as fh:
            fh.write("param,bin_lo,bin_hi,mcmc_count,mle_count\n")
            for name, lo, hi, c1, c2 in hist:
                fh.write(f"{name},{io.fmt(lo)},{io.fmt(hi)},{c1},{c2}\n")
    io.dump_json(rc.output_dir / "summary.json", out)
    io.dump_json(rc.output_dir / "timing.json", {"wall_clock_seconds": elapsed})
    out["failed"] = len(results) - len(ok)
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "mle": cmd_mle,
    "split": cmd_split,
    "replicate": cmd_replicate,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="fidgauss", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig.from_dict(load_config(args.config, extra))
        result = COMMANDS[args.command](rc)
    except (ConfigError, MissingSites, WindowTooLarge, OSError, ValueError) as exc:
        print(f"fidgauss {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InitFailed, FidGaussError, np.linalg.LinAlgError) as exc:
        print(f"fidgauss {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.command == "replicate" and result.get("failed"):
        print(f"fidgauss replicate: {result['failed']} run(s) failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
