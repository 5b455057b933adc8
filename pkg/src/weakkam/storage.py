"""Deterministic file output and the kernel cache.

JSON summaries use sorted keys and CSV tables use shortest round-trip
float formatting, so identical runs produce byte-identical files.
Kernels cache as npz blobs keyed by a content hash of
(model, grid, class, quadrature); cache hits reproduce cold results
bit for bit because the stored arrays are the results.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .kernel import CostKernel, GridSpec, build_kernel
from .model import LagrangianModel

CACHE_ENV_VAR = "WEAKKAM_CACHE_DIR"


def float_str(v) -> str:
    return repr(float(v))


def _plain(obj):
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Row-major CSV; +inf entries appear as the literal 'inf'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(float_str(v) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    return np.array(rows)


def write_table_csv(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(x) if isinstance(x, str) else float_str(x) for x in row))
            fh.write("\n")


def resolve_cache_dir(out_dir, explicit: str | None = None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path(out_dir) / ".cache"


def kernel_cache_key(model: LagrangianModel, grid: GridSpec, c, quadrature: str) -> str:
    payload = json.dumps(
        {
            "model": model.to_spec(),
            "grid": {"n": grid.n, "tau": grid.tau, "v_max": grid.v_max},
            "c": [float(x) for x in np.atleast_1d(c)],
            "quadrature": quadrature,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:32]


def build_kernel_cached(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    quadrature: str = "left",
    cache_dir: Path | None = None,
) -> CostKernel:
    """build_kernel with an optional on-disk cache."""
    if cache_dir is None:
        return build_kernel(model, grid, c, quadrature=quadrature)
    key = kernel_cache_key(model, grid, c, quadrature)
    cache_dir = Path(cache_dir)
    blob = cache_dir / f"kernel_{key}.npz"
    if blob.exists():
        data = np.load(blob)
        return CostKernel(
            model=model, grid=grid, c=np.atleast_1d(np.asarray(c, dtype=float)),
            alpha_shift=0.0, cost=data["cost"], lift=data["lift"],
            saturated=bool(data["saturated"]), quadrature=quadrature,
        )
    kern = build_kernel(model, grid, c, quadrature=quadrature)
    cache_dir.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(blob, cost=kern.cost, lift=kern.lift, saturated=kern.saturated)
    return kern
