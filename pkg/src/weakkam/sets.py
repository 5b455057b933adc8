"""Aubry, Mane and Mather set extraction with graph diagnostics.

The projected Aubry set consists of the grid nodes whose diagonal barrier
h(x, x) vanishes (up to a membership threshold); coincidence sets of
conjugate solution pairs project the Mane set; the Mather set is the
recurrent part of the Mane set under the reference flow.  Every set is
lifted to the cotangent bundle through p = c + Du with a symmetric
centered difference of configurable half-width: width 1 is the plain
stencil, wider stencils average out the facet structure that value
iteration imprints on rotational solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import CostKernel, GridSpec
from .model import LagrangianModel, el_flow, torus_delta
from .solver import WeakKamSolution


class SetExtractionError(RuntimeError):
    """Raised when a set extraction hits an inconsistent input."""


def grid_gradient(u: np.ndarray, n: int, dim: int, width: int = 1) -> np.ndarray:
    """Periodic symmetric difference of a grid function, shape (N, dim)."""
    if width < 1:
        raise ValueError("stencil half-width must be >= 1")
    scale = n / (2.0 * width)
    if dim == 1:
        return ((np.roll(u, -width) - np.roll(u, width)) * scale)[:, None]
    grid = u.reshape((n, n))
    gx = (np.roll(grid, -width, axis=0) - np.roll(grid, width, axis=0)) * scale
    gy = (np.roll(grid, -width, axis=1) - np.roll(grid, width, axis=1)) * scale
    return np.stack([gx.reshape(-1), gy.reshape(-1)], axis=-1)


def adaptive_stencil_width(model: LagrangianModel, grid: GridSpec, alpha: float) -> int:
    """Half-width matched to the one-step displacement of fast orbits.

    Solutions of rotational classes are piecewise linear over facets of
    roughly one step length; differencing across half a facet suppresses
    the sawtooth.
    """
    u_min, _ = model.potential_bounds()
    lam_min, _ = model.kinetic_eig_range()
    v_char = np.sqrt(2.0 * max(alpha - u_min, 0.0) / lam_min)
    w = int(round(0.5 * v_char * grid.tau * grid.n))
    return int(np.clip(w, 1, max(1, grid.n // 8)))


def lipschitz_seminorm(values: np.ndarray, coords: np.ndarray, present: np.ndarray, n: int, dim: int) -> float:
    """Max slope of a momentum field over adjacent present nodes."""
    if present.sum() < 2:
        return 0.0
    h = 1.0 / n
    worst = 0.0
    if dim == 1:
        idx = np.nonzero(present)[0]
        nxt = (idx + 1) % n
        pair = present[nxt]
        if pair.any():
            dv = np.abs(values[nxt[pair]] - values[idx[pair]]).max()
            worst = float(dv) / h
    else:
        pres = present.reshape(n, n)
        vals = values.reshape(n, n, dim)
        for axis in (0, 1):
            neighbor = np.roll(pres, -1, axis=axis)
            both = pres & neighbor
            if both.any():
                dv = np.abs(np.roll(vals, -1, axis=axis) - vals)[both].max()
                worst = max(worst, float(dv) / h)
    return worst


@dataclass
class AubrySet:
    """Projected Aubry nodes with their cotangent lift."""

    c: np.ndarray
    set_tol: float
    node_idx: np.ndarray
    coords: np.ndarray
    momenta: np.ndarray
    diagonal: np.ndarray


def extract_aubry(
    barrier: np.ndarray,
    u_minus: WeakKamSolution,
    model: LagrangianModel,
    grid: GridSpec,
    set_tol: float,
    stencil: int = 1,
    sanity_bound: float = 10.0,
) -> AubrySet:
    """Nodes with vanishing diagonal barrier, lifted by p = c + Du-.

    The argmin of the diagonal is always included.  A diagonal minimum
    above the sanity bound signals a mis-normalized barrier table.
    """
    diag = np.diag(barrier).copy()
    dmin = float(diag.min())
    if dmin > sanity_bound:
        raise SetExtractionError(
            f"diagonal barrier min {dmin:.3g} exceeds {sanity_bound:.3g}: wrong normalization?"
        )
    keep = diag <= max(set_tol, dmin)
    idx = np.nonzero(keep)[0]
    nodes = grid.nodes(model.dim)
    du = grid_gradient(u_minus.u, grid.n, model.dim, width=stencil)
    momenta = u_minus.c[None, :] + du[idx]
    return AubrySet(
        c=u_minus.c, set_tol=set_tol, node_idx=idx,
        coords=nodes[idx], momenta=momenta, diagonal=diag,
    )


@dataclass
class ManeGraph:
    """Coincidence-set lift of one or more conjugate pairs.

    momenta holds the primary (first-pair) lift per present node; nodes
    whose lift violates the energy-shell tolerance are recorded in
    excluded_idx and dropped from the graph, which keeps the shell
    containment property true by construction.  violations counts nodes
    where distinct pairs produced distinct momenta.
    """

    c: np.ndarray
    alpha: float
    set_tol: float
    shell_tol: float
    node_idx: np.ndarray
    coords: np.ndarray
    momenta: np.ndarray
    gap: np.ndarray
    is_full_graph: bool
    violations: int
    excluded_idx: np.ndarray
    lipschitz: float = 0.0
    shell_defect: float = 0.0
    multiplicity: np.ndarray = field(default=None, repr=False)


def coincidence_lift(
    minus: WeakKamSolution,
    plus: WeakKamSolution,
    model: LagrangianModel,
    grid: GridSpec,
    set_tol: float,
    stencil: int = 1,
    symmetrize: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """(mask, momenta) for one conjugate pair.

    The default lift differentiates the minus solution.  symmetrize
    averages in the plus gradient: on the true coincidence set the pair
    shares its differential, so the average only cancels discretization
    noise of opposite time orientation (useful on rotational graphs, wrong
    for hyperbolic points whose two branches differ).
    """
    gap = minus.u - plus.u
    mask = gap <= set_tol
    gm = grid_gradient(minus.u, grid.n, model.dim, width=stencil)
    if symmetrize:
        gp = grid_gradient(plus.u, grid.n, model.dim, width=stencil)
        gm = 0.5 * (gm + gp)
    momenta = minus.c[None, :] + gm
    return mask, momenta


def extract_mane(
    pairs: list[tuple[WeakKamSolution, WeakKamSolution]],
    model: LagrangianModel,
    grid: GridSpec,
    set_tol: float,
    shell_tol: float,
    stencil: int = 1,
    symmetrize: bool = False,
    momentum_tol: float | None = None,
) -> ManeGraph:
    """Union of coincidence-set lifts over conjugate pairs."""
    if not pairs:
        raise SetExtractionError("need at least one conjugate pair")
    dim = model.dim
    n_nodes = grid.size(dim)
    if momentum_tol is None:
        momentum_tol = 2.0 / grid.n
    union = np.zeros(n_nodes, dtype=bool)
    primary = np.zeros((n_nodes, dim))
    have_primary = np.zeros(n_nodes, dtype=bool)
    multiplicity = np.zeros(n_nodes, dtype=int)
    gap_best = np.full(n_nodes, np.inf)

    for minus, plus in pairs:
        mask, momenta = coincidence_lift(minus, plus, model, grid, set_tol, stencil=stencil, symmetrize=symmetrize)
        gap_best = np.minimum(gap_best, minus.u - plus.u)
        fresh = mask & ~have_primary
        primary[fresh] = momenta[fresh]
        have_primary |= mask
        seen = mask & union
        if seen.any():
            far = np.linalg.norm(momenta[seen] - primary[seen], axis=-1) > momentum_tol
            multiplicity[np.nonzero(seen)[0][far]] += 1
        union |= mask

    alpha = pairs[0][0].alpha
    nodes = grid.nodes(dim)
    energies = model.hamiltonian(nodes, primary)
    on_shell = np.abs(energies - alpha) <= shell_tol
    keep = union & on_shell
    excluded = np.nonzero(union & ~on_shell)[0]
    idx = np.nonzero(keep)[0]

    graph = ManeGraph(
        c=pairs[0][0].c, alpha=alpha, set_tol=set_tol, shell_tol=shell_tol,
        node_idx=idx, coords=nodes[idx], momenta=primary[idx],
        gap=gap_best, is_full_graph=bool(union.all()),
        violations=int((multiplicity > 0).sum()), excluded_idx=excluded,
        multiplicity=multiplicity,
    )
    graph.lipschitz = lipschitz_seminorm(primary, nodes, keep, grid.n, dim)
    graph.shell_defect = float(np.abs(energies[idx] - alpha).max()) if idx.size else 0.0
    return graph


@dataclass
class MatherSet:
    """Recurrent part of a Mane graph under the reference flow."""

    c: np.ndarray
    node_idx: np.ndarray
    coords: np.ndarray
    momenta: np.ndarray
    rotation: np.ndarray
    recur_tol: float


def extract_mather(
    mane: ManeGraph,
    model: LagrangianModel,
    grid: GridSpec,
    horizon: float | None = None,
    dt: float = 1e-3,
    recur_tol: float | None = None,
) -> MatherSet:
    """Flow every lifted Mane point and keep those that come back.

    A point is recurrent when its orbit either never leaves the recur_tol
    ball in phase space or returns into it after leaving; the lifted
    displacement over the horizon estimates its rotation vector.
    """
    if mane.node_idx.size == 0:
        raise SetExtractionError("cannot flow an empty Mane graph")
    if horizon is None:
        horizon = 200.0 * grid.tau
    if recur_tol is None:
        recur_tol = 2.0 / grid.n
    q0 = mane.coords
    p0 = mane.momenta
    flow = el_flow(model, q0, p0, t=horizon, dt=dt)
    dq = torus_delta(q0[None, :, :], flow.q)
    dp = flow.p - p0[None, :, :]
    dist = np.sqrt((dq ** 2).sum(axis=-1) + (dp ** 2).sum(axis=-1))
    outside = dist > recur_tol
    left = np.maximum.accumulate(outside, axis=0)
    returned = (~outside & left).any(axis=0)
    recurrent = returned | ~outside.any(axis=0)
    rho = (flow.q_lift[-1] - flow.q_lift[0]) / float(flow.times[-1])
    sel = np.nonzero(recurrent)[0]
    return MatherSet(
        c=mane.c, node_idx=mane.node_idx[sel], coords=q0[sel],
        momenta=p0[sel], rotation=rho[sel], recur_tol=recur_tol,
    )


def graph_diagnostics(mane: ManeGraph, model: LagrangianModel, grid: GridSpec) -> dict:
    """Graph-quality report: slope, shell defect, multi-valued nodes."""
    if mane.node_idx.size == 0:
        return {"lipschitz_seminorm": 0.0, "shell_defect": 0.0, "violations": mane.violations,
                "nodes": 0, "excluded": int(mane.excluded_idx.size)}
    return {
        "lipschitz_seminorm": mane.lipschitz,
        "shell_defect": mane.shell_defect,
        "violations": mane.violations,
        "nodes": int(mane.node_idx.size),
        "excluded": int(mane.excluded_idx.size),
    }
