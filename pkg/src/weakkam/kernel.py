"""Torus discretization and one-step action cost kernels.

The configuration torus is sampled on a uniform grid of n points per
dimension (N = n^d nodes at coordinates i/n).  A kernel entry K_c[x][y]
is the minimal one-step discrete action

    tau * L(x, D/tau) - c.D    over lifts D = y - x (mod 1), |D| <= v_max*tau,

evaluated at the left endpoint with constant velocity (rectangle rule).
Winding lifts are enumerated so that long discrete paths can realize
every homology class; cost ties break on the lexicographically smallest
lift, which makes every table deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import LagrangianModel
from .tropical import INF, mp_product


class KernelError(ValueError):
    """Raised for invalid grids or unusable kernels."""


class UnreachableError(KeyError):
    """Raised when a path endpoint pair has infinite cost."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid: n nodes per dimension, time step tau, speed radius v_max."""

    n: int
    tau: float
    v_max: float

    def __post_init__(self):
        if self.n < 8:
            raise KernelError(f"grid needs n >= 8, got {self.n}")
        if not (self.tau > 0):
            raise KernelError(f"tau must be positive, got {self.tau}")
        if not (self.v_max > 0):
            raise KernelError(f"v_max must be positive, got {self.v_max}")
        if self.v_max * self.tau < 2.0 / self.n - 1e-12:
            raise KernelError(
                f"one step must reach beyond neighboring nodes: "
                f"v_max*tau = {self.v_max * self.tau:.4g} < 2/n = {2.0 / self.n:.4g}"
            )

    def nodes(self, dim: int) -> np.ndarray:
        """All N = n^dim node coordinates, shape (N, dim), C-ordered."""
        axis = np.arange(self.n) / self.n
        if dim == 1:
            return axis[:, None]
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, dim)

    def size(self, dim: int) -> int:
        return self.n ** dim


def default_v_max(model: LagrangianModel, c, grid_n: int, tau: float) -> float:
    """Speed radius heuristic: optimal steps must never touch the boundary.

    Chosen so the one-step cost at |v| = v_max exceeds anything a useful
    step can gain from the class term or the potential span; validated at
    run time by the saturation check.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    lam_min, _ = model.kinetic_eig_range()
    u_min, u_max = model.potential_bounds()
    du = u_max - u_min
    cn = float(np.linalg.norm(c))
    v = 2.0 * (cn / lam_min + np.sqrt(2.0 * (du + 1.0) / lam_min)) + 1.0
    return max(v, 2.5 / (grid_n * tau))


def displacement_candidates(grid: GridSpec, dim: int) -> np.ndarray:
    """Admissible integer node displacements, lexicographically sorted.

    Rows are j-vectors; the physical lift is j/n with |j/n| <= v_max*tau
    (a hair of slack absorbs float dust on the radius).
    """
    reach = int(np.floor(grid.v_max * grid.tau * grid.n + 1e-9))
    axis = range(-reach, reach + 1)
    cands = []
    for j in itertools.product(*([axis] * dim)):
        jv = np.array(j, dtype=float)
        if np.linalg.norm(jv / grid.n) <= grid.v_max * grid.tau + 1e-12:
            cands.append(j)
    cands.sort()
    if len(cands) <= 1:
        raise KernelError("no admissible displacement besides staying put")
    return np.array(cands, dtype=np.int64)


@dataclass
class CostKernel:
    """One-step min-plus cost matrix for a fixed cohomology class.

    cost[x, y] already carries the -c.D class term; the +alpha*tau
    normalization is applied by normalized().  lift[x, y] stores the
    chosen integer displacement (scaled by 1/n it is the physical lift);
    saturated marks kernels whose optimizer touched the speed radius.
    """

    model: LagrangianModel
    grid: GridSpec
    c: np.ndarray
    alpha_shift: float
    cost: np.ndarray
    lift: np.ndarray
    saturated: bool = False
    quadrature: str = "left"
    _norm: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.cost.shape[0]

    def normalized(self) -> np.ndarray:
        if self._norm is None:
            self._norm = self.cost + self.alpha_shift * self.grid.tau
        return self._norm

    def with_alpha(self, alpha: float) -> "CostKernel":
        return CostKernel(
            model=self.model, grid=self.grid, c=self.c, alpha_shift=alpha,
            cost=self.cost, lift=self.lift, saturated=self.saturated,
            quadrature=self.quadrature,
        )

    def step_velocity(self, x_idx: int, y_idx: int) -> np.ndarray:
        """Velocity of the chosen lift for the step x -> y."""
        j = self.lift[x_idx, y_idx].astype(float)
        return j / (self.grid.n * self.grid.tau)

    def content_key(self) -> str:
        import json

        return json.dumps(
            {
                "model": self.model.to_spec(),
                "grid": {"n": self.grid.n, "tau": self.grid.tau, "v_max": self.grid.v_max},
                "c": [float(x) for x in np.atleast_1d(self.c)],
                "quadrature": self.quadrature,
            },
            sort_keys=True,
        )


def build_kernel(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    alpha_shift: float = 0.0,
    quadrature: str = "left",
) -> CostKernel:
    """Assemble the N x N one-step cost table for cohomology class c.

    quadrature picks where the Lagrangian is sampled along the step:
    "left" (the tested default) or "midpoint", which suppresses the
    aliasing bias of long steps over short-wavelength potentials and is
    what the graph-coverage pipelines use.
    """
    if quadrature not in ("left", "midpoint"):
        raise KernelError(f"unknown quadrature {quadrature!r}")
    dim = model.dim
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (dim,):
        raise KernelError(f"class vector must have shape ({dim},)")
    nodes = grid.nodes(dim)
    n_nodes = nodes.shape[0]
    cands = displacement_candidates(grid, dim)
    max_norm = float(np.max(np.linalg.norm(cands, axis=1)))

    n = grid.n
    cost = np.full((n_nodes, n_nodes), INF)
    lift = np.zeros((n_nodes, n_nodes, dim), dtype=np.int16)
    chosen_extreme = False

    # group candidate lifts by residue (target node offset); lex-sorted
    # order within a group makes argmin pick the smallest lift on ties
    groups: dict[tuple, list] = {}
    for j in cands:
        res = tuple(int(v) % n for v in j)
        groups.setdefault(res, []).append(tuple(int(v) for v in j))

    rows = np.arange(n_nodes)
    if dim > 1:
        row_multi = np.stack(np.unravel_index(rows, (n,) * dim), axis=-1)

    for res, js in groups.items():
        disp = np.array(js, dtype=float) / n                      # (G, dim)
        vel = disp / grid.tau
        vals = np.empty((len(js), n_nodes))
        for g in range(len(js)):
            v = np.broadcast_to(vel[g], nodes.shape)
            pts = nodes if quadrature == "left" else nodes + 0.5 * disp[g]
            vals[g] = grid.tau * model.lagrangian(pts, v) - float(disp[g] @ c)
        best = np.argmin(vals, axis=0)
        best_vals = vals[best, rows]
        best_j = np.array(js, dtype=np.int16)[best]
        if np.linalg.norm(best_j.astype(float), axis=-1).max() >= max_norm - 0.5:
            chosen_extreme = True
        if dim == 1:
            cols = (rows + res[0]) % n
        else:
            tgt = (row_multi + np.array(res)) % n
            cols = np.ravel_multi_index((tgt[:, 0], tgt[:, 1]), (n, n))
        cost[rows, cols] = best_vals
        lift[rows, cols] = best_j

    return CostKernel(
        model=model, grid=grid, c=c, alpha_shift=alpha_shift,
        cost=cost, lift=lift, saturated=chosen_extreme, quadrature=quadrature,
    )


@dataclass
class FiniteHorizonAction:
    """Minimal m-step normalized action table, with argmin links."""

    kernel: CostKernel
    steps: int
    table: np.ndarray
    backpointers: list[np.ndarray] | None

    @property
    def t(self) -> float:
        return self.steps * self.kernel.grid.tau


def _argmin_product(table: np.ndarray, a: np.ndarray, rows_per_block: int = 256):
    """Left product with argmin tracking; values match mp_product exactly."""
    n = table.shape[0]
    out = np.empty_like(table)
    arg = np.empty((n, a.shape[1]), dtype=np.int32)
    for start in range(0, n, rows_per_block):
        stop = min(n, start + rows_per_block)
        stacked = table[start:stop, :, None] + a[None, :, :]
        blk_arg = np.argmin(stacked, axis=1)
        arg[start:stop] = blk_arg
        out[start:stop] = np.take_along_axis(stacked, blk_arg[:, None, :], axis=1)[:, 0, :]
    return out, arg


def finite_horizon(kernel: CostKernel, steps: int, track_paths: bool = True) -> FiniteHorizonAction:
    """m-fold min-plus power of the normalized kernel.

    Products associate left-to-right, so the float result matches an
    exhaustive path enumeration that sums step costs in path order.
    """
    if steps < 1:
        raise KernelError("need at least one step")
    a = kernel.normalized()
    table = a.copy()
    backs: list[np.ndarray] | None = [] if track_paths else None
    for _ in range(steps - 1):
        if track_paths:
            table, arg = _argmin_product(table, a)
            backs.append(arg)
        else:
            table = mp_product(table, a)
    return FiniteHorizonAction(kernel=kernel, steps=steps, table=table, backpointers=backs)


def recover_path(fha: FiniteHorizonAction, x_idx: int, y_idx: int):
    """Discrete minimizing path realizing table[x][y].

    Returns (node indices of length m+1, per-step velocities (m, dim)).
    """
    if not np.isfinite(fha.table[x_idx, y_idx]):
        raise UnreachableError(f"no {fha.steps}-step path from node {x_idx} to {y_idx}")
    if fha.backpointers is None:
        raise KernelError("finite_horizon was run with track_paths=False")
    nodes = [y_idx]
    cur = y_idx
    for arg in reversed(fha.backpointers):
        cur = int(arg[x_idx, cur])
        nodes.append(cur)
    nodes.append(x_idx)
    nodes = nodes[::-1]
    vels = np.array(
        [fha.kernel.step_velocity(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)]
    ).reshape(len(nodes) - 1, fha.kernel.model.dim)
    return np.array(nodes, dtype=int), vels


def path_cost(kernel: CostKernel, node_indices) -> float:
    """Re-sum the one-step normalized costs along a node sequence."""
    a = kernel.normalized()
    total = 0.0
    for i in range(len(node_indices) - 1):
        total = total + a[node_indices[i], node_indices[i + 1]]
    return float(total)
