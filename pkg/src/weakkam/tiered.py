"""Cohomology-class sweeps, phase-space coverage and the partition verdict.

The scan runs the full per-class pipeline (critical value, conjugate
pair, Mane graph) over a grid of classes, then rasterizes a phase-space
window into cells and checks which cells lie within cover_tol of some
class's lifted graph.  Full coverage by mutually disjoint full graphs is
the integrable-like verdict; gaps localize where minimizing orbits fail
to fill the window.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernel import GridSpec, build_kernel
from .model import LagrangianModel, el_flow, torus_delta
from .sets import ManeGraph, adaptive_stencil_width, extract_mane
from .solver import conjugate_pair, solve_weak_kam


class TieredScanError(RuntimeError):
    """Per-class pipeline failure, tagged with the offending class."""

    def __init__(self, c, message):
        super().__init__(f"class c={np.atleast_1d(c)}: {message}")
        self.c = c


@dataclass
class ClassSummary:
    c: np.ndarray
    alpha: float
    residual: float
    iters: int
    coincidence_count: int
    is_full_graph: bool
    violations: int
    excluded: int
    lipschitz: float
    shell_defect: float
    saturated: bool


@dataclass
class TieredReport:
    """Coverage of a phase-space window by the swept Mane graphs."""

    p_max: float
    p_step: float
    cover_tol: float
    c_grid: np.ndarray
    summaries: list[ClassSummary]
    q_nodes: np.ndarray
    p_axis: np.ndarray
    covered: np.ndarray
    coverage_fraction: float
    disjointness_violations: list[tuple[int, int, int]]
    graphs: list[ManeGraph] = field(repr=False, default=None)

    def uncovered_cells(self) -> np.ndarray:
        """(q, p) coordinates of uncovered window cells, one row per cell."""
        idx = np.nonzero(~self.covered)
        qs = self.q_nodes[idx[0]]
        if self.q_nodes.shape[1] == 1:
            ps = self.p_axis[idx[1]][:, None]
        else:
            ps = np.stack([self.p_axis[idx[1]], self.p_axis[idx[2]]], axis=-1)
        return np.hstack([qs, ps])


def class_pipeline(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    set_tol: float,
    shell_tol: float,
    quadrature: str = "midpoint",
    solve_tol: float = 1e-8,
    max_iters: int = 20000,
    stencil: int | None = None,
    seeds: int = 1,
    rng_seed: int = 0,
) -> tuple[ManeGraph, ClassSummary]:
    """Solve one class end to end and extract its Mane graph.

    seeds > 1 adds conjugate pairs grown from random initial grid
    functions, approximating the union over all pairs.
    """
    kern = build_kernel(model, grid, c, quadrature=quadrature)
    minus = solve_weak_kam(model, grid, c, kernel=kern, tol=solve_tol, max_iters=max_iters)
    if not minus.converged:
        raise TieredScanError(c, f"weak KAM residual {minus.residual:.3e} after {minus.iters} sweeps")
    pairs = [conjugate_pair(model, grid, minus, kernel=kern)]
    if seeds > 1:
        rng = np.random.default_rng(rng_seed)
        for _ in range(seeds - 1):
            u0 = rng.random(kern.n_nodes)
            seeded = solve_weak_kam(
                model, grid, c, kernel=kern, tol=solve_tol, max_iters=max_iters, u0=u0
            )
            if seeded.converged:
                pairs.append(conjugate_pair(model, grid, seeded, kernel=kern))
    if stencil is None:
        stencil = adaptive_stencil_width(model, grid, minus.alpha)
    mane = extract_mane(pairs, model, grid, set_tol=set_tol, shell_tol=shell_tol,
                        stencil=stencil, symmetrize=True)
    summary = ClassSummary(
        c=np.atleast_1d(np.asarray(c, dtype=float)), alpha=minus.alpha,
        residual=minus.residual, iters=minus.iters,
        coincidence_count=int(mane.node_idx.size) + int(mane.excluded_idx.size),
        is_full_graph=mane.is_full_graph, violations=mane.violations,
        excluded=int(mane.excluded_idx.size), lipschitz=mane.lipschitz,
        shell_defect=mane.shell_defect, saturated=minus.saturated,
    )
    return mane, summary


def tiered_scan(
    model: LagrangianModel,
    grid: GridSpec,
    c_values,
    p_max: float,
    p_step: float,
    cover_tol: float,
    set_tol: float,
    shell_tol: float,
    quadrature: str = "midpoint",
    solve_tol: float = 1e-8,
    max_iters: int = 20000,
    stencil: int | None = None,
    seeds: int = 1,
    rng_seed: int = 0,
    threads: int = 1,
    keep_graphs: bool = True,
) -> TieredReport:
    """Sweep the class grid and rasterize window coverage."""
    c_values = np.atleast_2d(np.asarray(c_values, dtype=float))
    if c_values.shape[0] == 1 and model.dim == 1 and c_values.shape[1] > 1:
        c_values = c_values.T
    if c_values.size == 0:
        raise TieredScanError(np.zeros(model.dim), "empty class grid")

    def run_one(c):
        return class_pipeline(
            model, grid, c, set_tol=set_tol, shell_tol=shell_tol,
            quadrature=quadrature, solve_tol=solve_tol, max_iters=max_iters,
            stencil=stencil, seeds=seeds, rng_seed=rng_seed,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, c_values))
    else:
        results = [run_one(c) for c in c_values]
    graphs = [r[0] for r in results]
    summaries = [r[1] for r in results]

    dim = model.dim
    q_nodes = grid.nodes(dim)
    n_p = int(round(2.0 * p_max / p_step)) + 1
    p_axis = -p_max + p_step * np.arange(n_p)
    slack = cover_tol + 1e-9          # float dust on aligned grids

    shape = (q_nodes.shape[0],) + (n_p,) * dim
    covered = np.zeros(shape, dtype=bool)
    for graph in graphs:
        for node, p in zip(graph.node_idx, graph.momenta):
            if dim == 1:
                lo = np.searchsorted(p_axis, p[0] - slack, side="left")
                hi = np.searchsorted(p_axis, p[0] + slack, side="right")
                covered[node, lo:hi] = True
            else:
                lo0 = np.searchsorted(p_axis, p[0] - slack, side="left")
                hi0 = np.searchsorted(p_axis, p[0] + slack, side="right")
                lo1 = np.searchsorted(p_axis, p[1] - slack, side="left")
                hi1 = np.searchsorted(p_axis, p[1] + slack, side="right")
                covered[node, lo0:hi0, lo1:hi1] = True

    coverage = float(covered.sum()) / covered.size
    violations = _disjointness_violations(graphs, cover_tol)
    return TieredReport(
        p_max=p_max, p_step=p_step, cover_tol=cover_tol, c_grid=c_values,
        summaries=summaries, q_nodes=q_nodes, p_axis=p_axis, covered=covered,
        coverage_fraction=coverage, disjointness_violations=violations,
        graphs=graphs if keep_graphs else None,
    )


def _disjointness_violations(graphs: list[ManeGraph], cover_tol: float, min_steps: int = 2):
    """(class i, class j, node) triples where distant classes' graphs meet.

    Classes fewer than min_steps grid steps apart are skipped: adjacent
    graphs sit closer than cover_tol by continuity.
    """
    per_node: dict[int, list[tuple[int, np.ndarray]]] = {}
    for gi, graph in enumerate(graphs):
        for node, p in zip(graph.node_idx, graph.momenta):
            per_node.setdefault(int(node), []).append((gi, p))
    hits = []
    for node, entries in per_node.items():
        entries.sort(key=lambda e: tuple(e[1]))
        for a in range(len(entries)):
            for b in range(a + 1, len(entries)):
                gi, pi = entries[a]
                gj, pj = entries[b]
                if float(np.linalg.norm(pj - pi)) > cover_tol:
                    break
                if abs(gi - gj) >= min_steps:
                    hits.append((min(gi, gj), max(gi, gj), node))
    return sorted(set(hits))


def partition_check(report: TieredReport, cover_slack: float = 0.0) -> dict:
    """Integrability-style verdict from a tiered report.

    covers is one-sided: failure to cover the window is conclusive, while
    success only certifies coverage at the sampled classes and tolerance.
    """
    covers = report.coverage_fraction >= 1.0 - cover_slack
    disjoint = len(report.disjointness_violations) == 0
    all_graphs = all(s.is_full_graph for s in report.summaries) and all(
        s.violations == 0 for s in report.summaries
    )
    verdict = {
        "covers": bool(covers),
        "disjoint": bool(disjoint),
        "all_graphs": bool(all_graphs),
        "coverage_fraction": report.coverage_fraction,
        "interpretation": (
            "integrable-like: the sampled window is filled by disjoint invariant graphs"
            if covers and disjoint and all_graphs
            else "not integrable-like on this window: minimizing graphs leave gaps"
        ),
    }
    return verdict


def invariance_check(
    model: LagrangianModel,
    graph_q: np.ndarray,
    graph_p: np.ndarray,
    horizon: float,
    dt: float = 1e-3,
    samples: int = 64,
) -> float:
    """Max drift of flowed graph points away from the graph.

    The graph is a momentum field sampled on grid columns; drift of a
    flowed point is the distance between its momentum and the field
    linearly interpolated (periodically) at its landed position.
    """
    graph_q = np.asarray(graph_q, dtype=float)
    graph_p = np.asarray(graph_p, dtype=float)
    dim = graph_q.shape[1]
    if dim != 1:
        raise NotImplementedError("invariance check interpolates d = 1 graphs")
    order = np.argsort(graph_q[:, 0])
    qs = graph_q[order, 0]
    ps = graph_p[order, 0]
    step = max(1, len(qs) // samples)
    seeds = slice(0, len(qs), step)
    flow = el_flow(model, graph_q[order][seeds], graph_p[order][seeds], t=horizon, dt=dt)
    q_end = flow.q[-1][:, 0]
    p_end = flow.p[-1][:, 0]
    p_interp = np.interp(q_end, np.concatenate([qs, [qs[0] + 1.0]]),
                         np.concatenate([ps, [ps[0]]]), period=1.0)
    return float(np.abs(p_end - p_interp).max())
