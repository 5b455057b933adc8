"""Invariant suite over the barrier tables, set inclusions and duality.

Each check returns its measured value next to the bound it must satisfy,
so failures localize immediately.  The barrier checks are the standard
potential/barrier inequalities (subadditivity, symmetrized
nonnegativity, the Lipschitz bound through the small-speed action sup,
and barrier saturation against the projected Aubry nodes); the set
checks are the inclusion chain; the duality checks sample the
Fenchel-Young inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import GridSpec, build_kernel
from .mather import alpha_sweep, compute_beta
from .model import LagrangianModel, torus_delta
from .sets import extract_aubry, extract_mane, extract_mather
from .solver import conjugate_pair, solve_weak_kam, _sup_small_speed_cost, barrier_tables
from .tropical import mp_product


@dataclass
class CheckResult:
    name: str
    c: list
    passed: bool
    value: float
    bound: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name} (c={self.c}): value={self.value:.3e} bound={self.bound:.3e}"


def _pairwise_torus_distances(nodes: np.ndarray) -> np.ndarray:
    delta = torus_delta(nodes[None, :, :], nodes[:, None, :])
    return np.sqrt((delta ** 2).sum(axis=-1)).T


def barrier_inequality_checks(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    tol: float,
    set_tol: float,
    quadrature: str = "left",
) -> list[CheckResult]:
    """Potential/barrier inequalities for one class at tolerance tol."""
    kern = build_kernel(model, grid, c, quadrature=quadrature)
    closure, alpha, sol = barrier_tables(model, grid, c, kernel=kern)
    m, h = closure.mane, closure.barrier
    c_list = [float(x) for x in np.atleast_1d(c)]
    out = []

    def add(name, value, bound):
        out.append(CheckResult(name=name, c=c_list, passed=bool(value <= bound), value=float(value), bound=float(bound)))

    add("m_le_h", float((m - h).max()), 1e-9)
    add("m_triangle", float((m - mp_product(m, m)).max()), tol)
    add("h_triangle", float((h - mp_product(h, h)).max()), tol)
    add("m_symmetrized_nonneg", float(-(m + m.T).min()), tol)
    add("h_symmetrized_nonneg", float(-(h + h.T).min()), tol)
    add("h_diagonal_nonneg", float(-np.diag(h).min()), tol)

    m1 = _sup_small_speed_cost(model, c)
    dist = _pairwise_torus_distances(grid.nodes(model.dim))
    lip_excess = float((np.abs(m) - (m1 + alpha) * dist).max())
    add("m_lipschitz_bound", lip_excess, tol)

    aubry = extract_aubry(h, sol, model, grid, set_tol=set_tol)
    sat = float(np.abs(m[:, aubry.node_idx] - h[:, aubry.node_idx]).max())
    sat = max(sat, float(np.abs(m[aubry.node_idx, :] - h[aubry.node_idx, :]).max()))
    add("m_equals_h_on_aubry", sat, tol)
    return out


def inclusion_checks(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    tol: float,
    set_tol: float,
    shell_tol: float,
    quadrature: str = "midpoint",
    recur_horizon: float | None = None,
) -> list[CheckResult]:
    """Mather within Aubry within Mane, as node-set distances."""
    kern = build_kernel(model, grid, c, quadrature=quadrature)
    closure, alpha, sol = barrier_tables(model, grid, c, kernel=kern)
    pair = conjugate_pair(model, grid, sol, kernel=kern)
    aubry = extract_aubry(closure.barrier, sol, model, grid, set_tol=set_tol)
    mane = extract_mane([pair], model, grid, set_tol=set_tol, shell_tol=shell_tol)
    mather = extract_mather(mane, model, grid, horizon=recur_horizon)
    c_list = [float(x) for x in np.atleast_1d(c)]

    def set_distance(a_coords, b_coords):
        if a_coords.shape[0] == 0:
            return 0.0
        if b_coords.shape[0] == 0:
            return np.inf
        delta = torus_delta(b_coords[None, :, :], a_coords[:, None, :])
        return float(np.sqrt((delta ** 2).sum(axis=-1)).min(axis=1).max())

    gap = 2.0 / grid.n + 1e-12
    d_am = set_distance(aubry.coords, mane.coords)
    d_ma = set_distance(mather.coords, aubry.coords)
    return [
        CheckResult("aubry_nonempty", c_list, aubry.node_idx.size > 0, float(aubry.node_idx.size), 1.0),
        CheckResult("aubry_in_mane", c_list, d_am <= gap, d_am, gap),
        CheckResult("mather_in_aubry", c_list, d_ma <= gap, d_ma, gap),
        CheckResult("mane_on_shell", c_list, mane.shell_defect <= shell_tol + tol,
                    mane.shell_defect, shell_tol + tol),
    ]


def fenchel_checks(
    model: LagrangianModel,
    grid: GridSpec,
    c_grid: np.ndarray,
    h_grid: np.ndarray,
    tol: float,
    quadrature: str = "left",
) -> list[CheckResult]:
    """Fenchel-Young inequality on all sampled pairs, equality on duals."""
    alphas, _ = alpha_sweep(model, grid, c_grid, quadrature=quadrature)
    table = compute_beta(c_grid, alphas, h_grid)
    pairing = table.h_grid @ table.c_grid.T
    slack = table.alpha[None, :] + table.beta[:, None] - pairing
    worst = float(-slack.min())
    dual_defect = float(np.abs(slack[np.arange(len(table.h_grid)), table.dual_idx]).max())
    convex = _midpoint_convexity_defect(table.alpha)
    return [
        CheckResult("fenchel_young", [], worst <= tol, worst, tol),
        CheckResult("fenchel_equality_on_duals", [], dual_defect <= 2 * tol, dual_defect, 2 * tol),
        CheckResult("alpha_midpoint_convex", [], convex <= tol, convex, tol),
    ]


def _midpoint_convexity_defect(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return 0.0
    return float((v[1:-1] - 0.5 * (v[:-2] + v[2:])).max())


def run_invariant_suite(
    model: LagrangianModel,
    grid: GridSpec,
    c_values,
    tol: float = 1e-2,
    set_tol: float = 1e-2,
    shell_tol: float = 5e-3,
    quadrature: str = "left",
    fenchel: bool = True,
    fenchel_c: np.ndarray | None = None,
    fenchel_h: np.ndarray | None = None,
) -> list[CheckResult]:
    """Barrier, inclusion and duality checks over a list of classes."""
    results: list[CheckResult] = []
    for c in np.atleast_2d(np.asarray(c_values, dtype=float)).reshape(-1, model.dim):
        results += barrier_inequality_checks(model, grid, c, tol=tol, set_tol=set_tol, quadrature=quadrature)
        results += inclusion_checks(model, grid, c, tol=tol, set_tol=set_tol, shell_tol=shell_tol)
    if fenchel and model.dim == 1:
        if fenchel_c is None:
            fenchel_c = np.linspace(-1.5, 1.5, 31)[:, None]
        if fenchel_h is None:
            fenchel_h = np.linspace(-1.0, 1.0, 21)[:, None]
        results += fenchel_checks(model, grid, fenchel_c, fenchel_h, tol=tol, quadrature=quadrature)
    return results
