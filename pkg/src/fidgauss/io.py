"""CSV/JSON readers and writers.

All floats are written with 17 significant digits so that files round-trip
exactly; CSVs use ',' separators and '\\n' line endings.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sampler import ChainRecord

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> np.ndarray:
    """Rows of numbers; a non-numeric first row is taken as a header and skipped."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not all(_is_number(t) for t in rows[0]):
        header, rows = rows[0], rows[1:]
        if not rows:
            return np.empty((0, len(header)))
    if not rows:
        return np.empty((0, 0))
    return np.array([[float(t) for t in r] for r in rows])


def write_matrix_csv(path, mat: np.ndarray, header: list[str] | None = None, prefix: str = "v") -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if header is None:
        header = [f"{prefix}{j + 1}" for j in range(mat.shape[1])]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in mat:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_sites(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: sites file needs an 'x,y' header")
        pts = [(float(r["x"]), float(r["y"])) for r in reader]
    return np.array(pts, dtype=float).reshape(-1, 2)


def write_sites(path, sites: np.ndarray) -> None:
    write_matrix_csv(path, sites, header=["x", "y"])


def chain_header(param_names) -> list[str]:
    return ["iter", *param_names, "log_like", "log_j_sum", "accepted", "n_permissible"]


def write_chain_csv(path, record: ChainRecord) -> None:
    """Columns are ``theta_1..theta_p``; model parameter names live in the summary JSON."""
    names = tuple(f"theta_{i + 1}" for i in range(record.theta.shape[1]))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(chain_header(names)) + "\n")
        for i in range(len(record)):
            vals = [str(i)]
            vals += [fmt(v) for v in record.theta[i]]
            vals += [fmt(record.log_like[i]), fmt(record.log_j_sum[i])]
            vals += [str(int(record.accepted[i])), str(int(record.n_permissible[i]))]
            fh.write(",".join(vals) + "\n")


def read_chain_csv(path) -> ChainRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    p = len(header) - 5
    arr = np.array([[float(t) for t in r] for r in rows]).reshape(-1, len(header))
    return ChainRecord(
        theta=arr[:, 1:1 + p],
        log_like=arr[:, 1 + p],
        log_j_sum=arr[:, 2 + p],
        accepted=arr[:, 3 + p].astype(bool),
        n_permissible=arr[:, 4 + p].astype(np.int64),
        param_names=tuple(header[1:1 + p]),
    )


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
