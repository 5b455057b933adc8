"""Average-action functions: alpha sampling, the conjugate beta function,
subderivative intervals, rotation vectors and the corner scan.

beta is obtained purely by discrete Legendre-Fenchel conjugation of the
sampled alpha values, beta(h) = max_c (c.h - alpha(c)); the recorded dual
class of each h is the argmax.  Corners of beta (rotation vectors with a
subderivative interval wider than a few grid steps) mark the breakdown of
differentiability.
"""

from __future__ import annotations

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .kernel import GridSpec, build_kernel
from .model import LagrangianModel, el_flow
from .solver import solve_weak_kam


class GridTooNarrowError(RuntimeError):
    """Raised when a conjugation argmax lands on the class-grid boundary."""


def alpha_sweep(
    model: LagrangianModel,
    grid: GridSpec,
    c_values: np.ndarray,
    quadrature: str = "left",
    tol: float = 1e-8,
    max_iters: int = 20000,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """alpha(c) over a class grid; returns (alphas, residuals)."""
    c_values = np.atleast_2d(np.asarray(c_values, dtype=float))
    if c_values.shape[0] == 1 and model.dim == 1 and c_values.shape[1] > 1:
        c_values = c_values.T

    def solve_one(c):
        kern = build_kernel(model, grid, c, quadrature=quadrature)
        sol = solve_weak_kam(model, grid, c, kernel=kern, tol=tol, max_iters=max_iters)
        return sol.alpha, sol.residual

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_one, c_values))
    else:
        results = [solve_one(c) for c in c_values]
    alphas = np.array([r[0] for r in results])
    residuals = np.array([r[1] for r in results])
    return alphas, residuals


@dataclass
class AlphaBetaTable:
    """Sampled alpha with its discrete Fenchel conjugate beta.

    c_grid has shape (C, d), h_grid (H, d); dual_idx[i] is the index into
    c_grid of the argmax realizing beta(h_grid[i]).
    """

    c_grid: np.ndarray
    alpha: np.ndarray
    h_grid: np.ndarray
    beta: np.ndarray
    dual_idx: np.ndarray

    def dual_class(self, i: int) -> np.ndarray:
        return self.c_grid[self.dual_idx[i]]


def compute_beta(c_grid, alpha_values, h_grid) -> AlphaBetaTable:
    """Discrete Legendre-Fenchel transform beta(h) = max_c (c.h - alpha(c)).

    Errors out when an argmax sits on the boundary of the class grid,
    since the conjugate is then truncated (widen the grid).
    """
    c_grid = np.atleast_2d(np.asarray(c_grid, dtype=float))
    h_grid = np.atleast_2d(np.asarray(h_grid, dtype=float))
    if c_grid.shape[0] == 1 and c_grid.shape[1] > 1:
        c_grid = c_grid.T
    if h_grid.shape[0] == 1 and h_grid.shape[1] > 1:
        h_grid = h_grid.T
    alpha_values = np.asarray(alpha_values, dtype=float)
    pairings = h_grid @ c_grid.T - alpha_values[None, :]       # (H, C)
    dual_idx = np.argmax(pairings, axis=1)
    beta = pairings[np.arange(len(h_grid)), dual_idx]

    boundary = _boundary_mask(c_grid)
    hit = boundary[dual_idx]
    if hit.any():
        bad = h_grid[np.argmax(hit)]
        raise GridTooNarrowError(
            f"conjugation argmax for h={bad} lies on the class-grid boundary; widen c_grid"
        )
    return AlphaBetaTable(c_grid=c_grid, alpha=alpha_values, h_grid=h_grid, beta=beta, dual_idx=dual_idx)


def _boundary_mask(c_grid: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(c_grid), dtype=bool)
    for d in range(c_grid.shape[1]):
        col = c_grid[:, d]
        mask |= np.isclose(col, col.min()) | np.isclose(col, col.max())
    return mask


def subderivative_interval(table: AlphaBetaTable, h, tol: float = 1e-6):
    """Classes where the Fenchel inequality is tight at rotation vector h.

    For d = 1 returns (c_lo, c_hi); for d = 2 the (k, d) array of tight
    grid classes.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    hi = _locate(table.h_grid, h)
    defect = np.abs(table.c_grid @ h - table.alpha - table.beta[hi])
    tight = table.c_grid[defect <= tol]
    if table.c_grid.shape[1] == 1:
        if tight.size == 0:
            j = int(np.argmin(defect))
            return float(table.c_grid[j, 0]), float(table.c_grid[j, 0])
        return float(tight.min()), float(tight.max())
    return tight


def _locate(grid: np.ndarray, point: np.ndarray) -> int:
    d2 = ((grid - point[None, :]) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    if d2[i] > 1e-16:
        raise KeyError(f"point {point} is not on the sampled rotation grid")
    return i


def beta_differentiability_scan(table: AlphaBetaTable, corner_tol: float, tol: float = 1e-6):
    """Interior rotation vectors whose subderivative interval is wide.

    Returns a list of (h, width) pairs with width > corner_tol; empty for
    a differentiable beta at the sampled resolution.
    """
    if table.c_grid.shape[1] != 1:
        raise NotImplementedError("corner scan is defined for d = 1 grids")
    h_bound = _boundary_mask(table.h_grid)
    corners = []
    for i, h in enumerate(table.h_grid):
        if h_bound[i]:
            continue
        lo, hi = subderivative_interval(table, h, tol=tol)
        width = hi - lo
        if width > corner_tol:
            corners.append((float(h[0]), float(width)))
    return corners


@dataclass
class RotationEstimate:
    q0: np.ndarray
    p0: np.ndarray
    horizon: float
    rho: np.ndarray


def rotation_vector(model: LagrangianModel, q0, p0, horizon: float, dt: float = 1e-3) -> RotationEstimate:
    """Time-average lifted displacement of one orbit."""
    if horizon < 100.0 * dt:
        raise ValueError("horizon must span at least 100 steps")
    flow = el_flow(model, q0, p0, t=horizon, dt=dt)
    rho = (flow.q_lift[-1] - flow.q_lift[0]) / float(flow.times[-1])
    return RotationEstimate(
        q0=np.atleast_1d(np.asarray(q0, dtype=float)),
        p0=np.atleast_1d(np.asarray(p0, dtype=float)),
        horizon=float(flow.times[-1]), rho=rho,
    )
