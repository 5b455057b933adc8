"""Run configuration: JSON ingestion with strict key validation.

Every section rejects unknown keys and reports the offending key by its
full path, so a typo in a config file fails before any computation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kernel import GridSpec, KernelError, default_v_max
from .model import LagrangianModel, ModelError


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


def _check_keys(section: dict, path: str, allowed: set[str], required: set[str] = frozenset()):
    if not isinstance(section, dict):
        raise ConfigError(f"config section '{path}' must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key '{path}.{sorted(unknown)[0]}'")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing key '{path}.{sorted(missing)[0]}'")


def _positive(value, path):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{path}' must be a number") from None
    if not (v > 0) or not np.isfinite(v):
        raise ConfigError(f"key '{path}' must be positive and finite")
    return v


_TOP_KEYS = {"model", "grid", "quadrature", "alpha", "barrier", "sets", "beta", "tiered", "check", "flow"}

_SECTION_KEYS = {
    "alpha": {"c", "tol", "max_iters", "bisection", "bisection_tol"},
    "barrier": {"c", "window", "tol", "max_doublings", "alpha_override", "solve_tol"},
    "sets": {"c", "set_tol", "shell_tol", "seeds", "stencil", "recur_horizon", "recur_dt",
             "recur_tol", "barrier_window", "barrier_tol", "solve_tol"},
    "beta": {"c_min", "c_max", "c_step", "h_min", "h_max", "h_step", "fenchel_tol",
             "corner_steps", "solve_tol"},
    "tiered": {"c_min", "c_max", "c_step", "p_max", "p_step", "cover_tol", "set_tol",
               "shell_tol", "seeds", "solve_tol", "max_iters", "stencil", "cover_slack"},
    "check": {"c", "tol", "set_tol", "shell_tol", "fenchel"},
    "flow": {"q0", "p0", "t", "dt", "method"},
}

_SECTION_DEFAULTS = {
    "alpha": {"c": [0.0], "tol": 1e-8, "max_iters": 20000, "bisection": False, "bisection_tol": 1e-3},
    "barrier": {"c": [0.0], "window": 32, "tol": 1e-6, "max_doublings": 16,
                "alpha_override": None, "solve_tol": 1e-9},
    "sets": {"c": [0.0], "set_tol": None, "shell_tol": 5e-3, "seeds": 3, "stencil": None,
             "recur_horizon": None, "recur_dt": 1e-3, "recur_tol": None,
             "barrier_window": 32, "barrier_tol": 1e-6, "solve_tol": 1e-9},
    "beta": {"c_min": -2.0, "c_max": 2.0, "c_step": 0.05, "h_min": -1.0, "h_max": 1.0,
             "h_step": 0.05, "fenchel_tol": 1e-6, "corner_steps": 3, "solve_tol": 1e-8},
    "tiered": {"c_min": None, "c_max": None, "c_step": 0.05, "p_max": 1.0, "p_step": None,
               "cover_tol": None, "set_tol": None, "shell_tol": 5e-3, "seeds": 1,
               "solve_tol": 1e-8, "max_iters": 20000, "stencil": None, "cover_slack": 0.0},
    "check": {"c": [0.0], "tol": 1e-2, "set_tol": 1e-2, "shell_tol": 5e-3, "fenchel": True},
    "flow": {"q0": [0.0], "p0": [0.5], "t": 10.0, "dt": 1e-3, "method": "yoshida4"},
}


class RunConfig:
    """Validated model + grid + per-command parameters."""

    def __init__(self, model: LagrangianModel, grid: GridSpec, quadrature: str, sections: dict):
        self.model = model
        self.grid = grid
        self.quadrature = quadrature
        self.sections = sections

    def section(self, name: str) -> dict:
        merged = dict(_SECTION_DEFAULTS[name])
        merged.update(self.sections.get(name, {}))
        return merged

    def classes(self, name: str) -> np.ndarray:
        raw = self.section(name)["c"]
        arr = np.atleast_2d(np.asarray(raw, dtype=float))
        if arr.shape[0] == 1 and self.model.dim == 1 and arr.shape[1] > 1:
            arr = arr.T
        if arr.shape[1] != self.model.dim:
            raise ConfigError(f"key '{name}.c' entries must have dimension {self.model.dim}")
        return arr


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in config: {exc}") from None
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    _check_keys(raw, "<root>", _TOP_KEYS, required={"model", "grid"})
    try:
        model = LagrangianModel.from_spec(raw["model"])
    except ModelError as exc:
        raise ConfigError(f"model: {exc}") from None

    gsec = raw["grid"]
    _check_keys(gsec, "grid", {"n", "tau", "v_max"}, required={"n", "tau"})
    n = gsec["n"]
    if not isinstance(n, int):
        raise ConfigError("key 'grid.n' must be an integer")
    tau = _positive(gsec["tau"], "grid.tau")
    v_max = gsec.get("v_max")
    if v_max is not None:
        v_max = _positive(v_max, "grid.v_max")

    quadrature = raw.get("quadrature", "left")
    if quadrature not in ("left", "midpoint"):
        raise ConfigError("key 'quadrature' must be 'left' or 'midpoint'")

    sections = {}
    for name in _SECTION_KEYS:
        if name in raw:
            _check_keys(raw[name], name, _SECTION_KEYS[name])
            sections[name] = raw[name]

    if v_max is None:
        c_hint = _widest_class_hint(sections, model.dim)
        v_max = default_v_max(model, c_hint, n, tau)
    try:
        grid = GridSpec(n=n, tau=tau, v_max=v_max)
    except KernelError as exc:
        raise ConfigError(f"grid: {exc}") from None
    return RunConfig(model=model, grid=grid, quadrature=quadrature, sections=sections)


def _widest_class_hint(sections: dict, dim: int) -> np.ndarray:
    """Largest class magnitude any configured command will touch."""
    biggest = 0.0
    for name in ("alpha", "barrier", "sets", "check"):
        for c in sections.get(name, {}).get("c", []) or []:
            biggest = max(biggest, float(np.linalg.norm(np.atleast_1d(c))))
    for name in ("beta", "tiered"):
        sec = sections.get(name, {})
        for key in ("c_min", "c_max"):
            if sec.get(key) is not None:
                biggest = max(biggest, abs(float(sec[key])))
    return np.full(dim, biggest / max(1.0, np.sqrt(dim)))
