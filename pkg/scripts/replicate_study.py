"""Run a replicate study from a config and print a per-parameter table.

    python scripts/replicate_study.py configs/ma1_desk.json --runs=4 --threads=2

Extra ``--key=value`` flags are passed through as config overrides.
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

from fidgauss.cli import load_config, main


def print_table(out_dir: Path) -> None:
    summary = json.loads((out_dir / "summary.json").read_text())
    names = summary["param_names"]
    with open(out_dir / "per_run.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("no successful runs")
        return
    acc = np.array([float(r["acceptance_rate"]) for r in rows])
    print(f"{len(rows)} runs, acceptance {acc.mean():.3f} (min {acc.min():.3f}, max {acc.max():.3f})")
    print(f"{'param':>8} {'truth':>8} {'mcmc mean':>10} {'mle mean':>10} {'coverage':>9}")
    truth = summary["config"]["theta_true"]
    cov = summary["coverage"]["per_param"]
    for j, n in enumerate(names):
        mc = np.mean([float(r[f"mcmc_mean_{n}"]) for r in rows])
        ml = np.mean([float(r[f"mle_{n}"]) for r in rows])
        print(f"{n:>8} {truth[j]:>8.3f} {mc:>10.4f} {ml:>10.4f} {cov[j]:>9.3f}")
    print(f"joint coverage {summary['coverage']['joint']:.3f}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    config, overrides = sys.argv[1], sys.argv[2:]
    code = main(["replicate", "--config", config, "-v", *overrides])
    if code == 0:
        print_table(Path(load_config(config, overrides)["output_dir"]))
    sys.exit(code)
