"""Command-line front end: config ingestion, pipelines, reports, figures.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
Every command reads one JSON config (--config), writes delimited output
and JSON summaries under --out, and renders matplotlib figures next to
them unless --no-plot is given.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .checks import run_invariant_suite
from .config import ConfigError, RunConfig, load_config
from .kernel import KernelError
from .mather import (GridTooNarrowError, alpha_sweep, beta_differentiability_scan,
                     compute_beta, subderivative_interval)
from .model import el_flow
from .sets import SetExtractionError, extract_aubry, extract_mane, extract_mather
from .solver import (BracketError, ConvergenceError, barrier_tables, conjugate_pair,
                     critical_value_bisection, solve_weak_kam)
from .storage import build_kernel_cached, resolve_cache_dir, write_json, write_matrix_csv, write_table_csv
from .tiered import TieredScanError, partition_check, tiered_scan

_NUMERICAL_ERRORS = (ConvergenceError, BracketError, TieredScanError,
                     SetExtractionError, GridTooNarrowError, KernelError)


def _common(func):
    func = click.option("--config", "config_path", required=True,
                        type=click.Path(exists=False), help="JSON run configuration.")(func)
    func = click.option("--out", "out_dir", default="out", show_default=True,
                        help="Output directory.")(func)
    func = click.option("--threads", default=1, show_default=True, type=int)(func)
    func = click.option("--no-cache", "no_cache", is_flag=True, default=False,
                        help="Disable the kernel cache.")(func)
    func = click.option("--seed", default=0, show_default=True, type=int,
                        help="Seed for randomized conjugate-pair sweeps.")(func)
    func = click.option("--plot/--no-plot", "do_plot", default=True, show_default=True,
                        help="Render figures next to the delimited output.")(func)
    return func


def _setup(config_path, out_dir, no_cache):
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = None if no_cache else resolve_cache_dir(out)
    return cfg, out, cache


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    try:
        fn()
    except ConfigError as exc:
        _fail(1, str(exc))
    except _NUMERICAL_ERRORS as exc:
        _fail(2, str(exc))


def _coord_header(dim, name="q"):
    return [name] if dim == 1 else [f"{name}1", f"{name}2"]


@click.group()
def main():
    """Weak KAM and minimizing-set numerics on the flat torus."""


@main.command()
@_common
def alpha(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Critical values and weak KAM solutions for listed classes."""

    def run():
        cfg, out, cache = _setup(config_path, out_dir, no_cache)
        sec = cfg.section("alpha")
        records = []
        nodes = cfg.grid.nodes(cfg.model.dim)
        for i, c in enumerate(cfg.classes("alpha")):
            kern = build_kernel_cached(cfg.model, cfg.grid, c, cfg.quadrature, cache)
            sol = solve_weak_kam(cfg.model, cfg.grid, c, kernel=kern,
                                 tol=sec["tol"], max_iters=sec["max_iters"])
            if not sol.converged:
                raise ConvergenceError(
                    f"class {list(c)}: residual {sol.residual:.3e} after {sol.iters} sweeps"
                )
            rec = {"c": list(c), "alpha": sol.alpha, "residual": sol.residual,
                   "iters": sol.iters, "saturated": sol.saturated}
            if sec["bisection"]:
                rec["alpha_bisection"] = critical_value_bisection(
                    cfg.model, cfg.grid, c, tol=sec["bisection_tol"], kernel=kern)
            records.append(rec)
            write_table_csv(out / f"u_{i:03d}.csv", _coord_header(cfg.model.dim) + ["u"],
                            (tuple(q) + (v,) for q, v in zip(nodes, sol.u)))
            if do_plot:
                from . import plots
                plots.plot_grid_function(out / f"u_{i:03d}.png", nodes, sol.u,
                                         title=f"weak KAM solution, c={list(c)}")
        write_json(out / "alpha.json", {"grid": {"n": cfg.grid.n, "tau": cfg.grid.tau},
                                        "solutions": records})
        click.echo(f"alpha: wrote {len(records)} classes to {out}")

    _guard(run)


@main.command()
@_common
def barrier(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Mane potential and Peierls barrier tables."""

    def run():
        cfg, out, cache = _setup(config_path, out_dir, no_cache)
        sec = cfg.section("barrier")
        meta = []
        for i, c in enumerate(cfg.classes("barrier")):
            kern = build_kernel_cached(cfg.model, cfg.grid, c, cfg.quadrature, cache)
            closure, alpha_val, _sol = barrier_tables(
                cfg.model, cfg.grid, c, alpha=sec["alpha_override"], kernel=kern,
                window=sec["window"], tol=sec["tol"], max_doublings=sec["max_doublings"],
                solve_tol=sec["solve_tol"],
            )
            if closure.diverged:
                raise ConvergenceError(
                    f"class {list(c)}: subcritical normalization, closure diverges to -inf"
                )
            write_matrix_csv(out / f"barrier_m_{i:03d}.csv", closure.mane)
            write_matrix_csv(out / f"barrier_h_{i:03d}.csv", closure.barrier)
            diag = np.diag(closure.barrier)
            meta.append({
                "c": list(c), "alpha": alpha_val, "m_star": closure.m_star,
                "converged": closure.converged, "oscillation": closure.oscillation,
                "diagonal_min": float(diag.min()), "diagonal_argmin": int(diag.argmin()),
            })
            if do_plot:
                from . import plots
                plots.plot_matrix(out / f"barrier_h_{i:03d}.png", closure.barrier,
                                  title=f"Peierls barrier, c={list(c)}", label="h(x, y)")
                plots.plot_grid_function(out / f"barrier_diag_{i:03d}.png",
                                         cfg.grid.nodes(cfg.model.dim), diag,
                                         ylabel="h(x, x)", title="diagonal barrier")
        write_json(out / "barrier.json", {"tables": meta})
        click.echo(f"barrier: wrote {len(meta)} classes to {out}")

    _guard(run)


@main.command()
@_common
def sets(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Aubry / Mane / Mather sets with lifts and diagnostics."""

    def run():
        cfg, out, cache = _setup(config_path, out_dir, no_cache)
        sec = cfg.section("sets")
        dim = cfg.model.dim
        rows = []
        summaries = []
        for i, c in enumerate(cfg.classes("sets")):
            kern = build_kernel_cached(cfg.model, cfg.grid, c, cfg.quadrature, cache)
            closure, alpha_val, minus = barrier_tables(
                cfg.model, cfg.grid, c, kernel=kern, window=sec["barrier_window"],
                tol=sec["barrier_tol"], solve_tol=sec["solve_tol"],
            )
            set_tol = sec["set_tol"]
            if set_tol is None:
                set_tol = 10.0 * minus.residual + 1.0 / cfg.grid.n
            pair = conjugate_pair(cfg.model, cfg.grid, minus, kernel=kern)
            pairs = [pair]
            rng = np.random.default_rng(seed)
            for _ in range(max(0, sec["seeds"] - 1)):
                seeded = solve_weak_kam(cfg.model, cfg.grid, c, kernel=kern,
                                        tol=sec["solve_tol"], u0=rng.random(kern.n_nodes))
                if seeded.converged:
                    pairs.append(conjugate_pair(cfg.model, cfg.grid, seeded, kernel=kern))
            aubry_set = extract_aubry(closure.barrier, minus, cfg.model, cfg.grid, set_tol=set_tol)
            mane = extract_mane(pairs, cfg.model, cfg.grid, set_tol=set_tol,
                                shell_tol=sec["shell_tol"], stencil=sec["stencil"] or 1)
            mather = extract_mather(mane, cfg.model, cfg.grid, horizon=sec["recur_horizon"],
                                    dt=sec["recur_dt"], recur_tol=sec["recur_tol"])
            for tag, coords, moms in (("mane", mane.coords, mane.momenta),
                                      ("aubry", aubry_set.coords, aubry_set.momenta),
                                      ("mather", mather.coords, mather.momenta)):
                for q, p in zip(coords, moms):
                    rows.append(tuple(c) + tuple(q) + tuple(p) + (tag,))
            summaries.append({
                "c": list(c), "alpha": alpha_val, "set_tol": set_tol,
                "aubry_nodes": int(aubry_set.node_idx.size),
                "mane_nodes": int(mane.node_idx.size),
                "mather_nodes": int(mather.node_idx.size),
                "is_full_graph": mane.is_full_graph,
                "lipschitz_seminorm": mane.lipschitz,
                "shell_defect": mane.shell_defect,
                "violations": mane.violations,
                "excluded": int(mane.excluded_idx.size),
            })
            if do_plot and dim == 1:
                from . import plots
                plots.plot_phase_sets(
                    out / f"sets_{i:03d}.png",
                    [("mane", mane.coords, mane.momenta),
                     ("aubry", aubry_set.coords, aubry_set.momenta),
                     ("mather", mather.coords, mather.momenta)],
                    title=f"minimizing sets, c={list(c)}")
        header = _coord_header(dim, "c") + _coord_header(dim) + _coord_header(dim, "p") + ["tag"]
        write_table_csv(out / "sets.csv", header, rows)
        write_json(out / "sets.json", {"classes": summaries})
        click.echo(f"sets: wrote {len(summaries)} classes to {out}")

    _guard(run)


@main.command()
@_common
def beta(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Mather alpha/beta tables, subderivative intervals, corner scan."""

    def run():
        cfg, out, cache = _setup(config_path, out_dir, no_cache)
        if cfg.model.dim != 1:
            raise ConfigError("beta command is defined for dimension 1")
        sec = cfg.section("beta")
        c_grid = _axis(sec["c_min"], sec["c_max"], sec["c_step"])[:, None]
        h_grid = _axis(sec["h_min"], sec["h_max"], sec["h_step"])[:, None]
        alphas, residuals = alpha_sweep(cfg.model, cfg.grid, c_grid,
                                        quadrature=cfg.quadrature, tol=sec["solve_tol"],
                                        threads=threads)
        table = compute_beta(c_grid, alphas, h_grid)
        intervals = [subderivative_interval(table, h, tol=sec["fenchel_tol"]) for h in h_grid]
        corner_tol = sec["corner_steps"] * sec["c_step"]
        corners = beta_differentiability_scan(table, corner_tol=corner_tol,
                                              tol=sec["fenchel_tol"])
        write_table_csv(out / "alpha_of_c.csv", ["c", "alpha"],
                        zip(c_grid[:, 0], alphas))
        write_table_csv(out / "beta_of_h.csv", ["h", "beta", "dual_c_lo", "dual_c_hi"],
                        ((h[0], b, lo, hi) for h, b, (lo, hi) in zip(h_grid, table.beta, intervals)))
        write_json(out / "beta.json", {
            "corner_tol": corner_tol,
            "corners": [{"h": h, "width": w} for h, w in corners],
            "max_residual": float(residuals.max()),
        })
        if do_plot:
            from . import plots
            plots.plot_curve(out / "alpha_of_c.png", c_grid[:, 0], alphas, "c", "alpha(c)")
            plots.plot_curve(out / "beta_of_h.png", h_grid[:, 0], table.beta, "h", "beta(h)",
                             marks=[h for h, _ in corners])
        click.echo(f"beta: {len(c_grid)} classes, {len(corners)} corners, wrote {out}")

    _guard(run)


@main.command()
@_common
def tiered(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Class sweep, phase-space coverage and the partition verdict."""

    def run():
        cfg, out, cache = _setup(config_path, out_dir, no_cache)
        if cfg.model.dim != 1:
            raise ConfigError("tiered command is defined for dimension 1")
        sec = cfg.section("tiered")
        p_max = float(sec["p_max"])
        c_max = sec["c_max"] if sec["c_max"] is not None else p_max + 1.0
        c_min = sec["c_min"] if sec["c_min"] is not None else -c_max
        c_grid = _axis(c_min, c_max, sec["c_step"])[:, None]
        cover_tol = sec["cover_tol"]
        if cover_tol is None:
            cover_tol = max(sec["c_step"], 2.0 / cfg.grid.n)
        p_step = sec["p_step"] if sec["p_step"] is not None else cover_tol
        set_tol = sec["set_tol"]
        if set_tol is None:
            set_tol = 10.0 * sec["solve_tol"] * cfg.grid.tau + 1.0 / cfg.grid.n
        report = tiered_scan(
            cfg.model, cfg.grid, c_grid, p_max=p_max, p_step=p_step,
            cover_tol=cover_tol, set_tol=set_tol, shell_tol=sec["shell_tol"],
            quadrature=cfg.quadrature, solve_tol=sec["solve_tol"],
            max_iters=sec["max_iters"], stencil=sec["stencil"],
            seeds=sec["seeds"], rng_seed=seed, threads=threads,
        )
        verdict = partition_check(report, cover_slack=sec["cover_slack"])
        write_json(out / "tiered.json", {
            "window": {"p_max": p_max, "p_step": p_step},
            "cover_tol": cover_tol, "set_tol": set_tol, "shell_tol": sec["shell_tol"],
            "c_grid": {"min": c_min, "max": c_max, "step": sec["c_step"]},
            "coverage_fraction": report.coverage_fraction,
            "uncovered_fraction": 1.0 - report.coverage_fraction,
            "disjointness_violations": len(report.disjointness_violations),
            "verdict": verdict,
            "classes": [{
                "c": list(s.c), "alpha": s.alpha, "residual": s.residual,
                "full_graph": s.is_full_graph, "nodes": s.coincidence_count,
                "excluded": s.excluded, "violations": s.violations,
            } for s in report.summaries],
        })
        dim = cfg.model.dim
        write_table_csv(out / "uncovered.csv", _coord_header(dim) + _coord_header(dim, "p"),
                        map(tuple, report.uncovered_cells()))
        rows = []
        for gi, graph in enumerate(report.graphs):
            for q, p in zip(graph.coords, graph.momenta):
                rows.append(tuple(q) + tuple(p) + (gi,))
        write_table_csv(out / "graphs.csv", _coord_header(dim) + _coord_header(dim, "p") + ["class_index"], rows)
        if do_plot:
            from . import plots
            plots.plot_coverage(out / "coverage_map.png", report,
                                title=f"coverage {report.coverage_fraction:.4f}")
        click.echo(
            f"tiered: coverage={report.coverage_fraction:.4f} covers={verdict['covers']} "
            f"disjoint={verdict['disjoint']} all_graphs={verdict['all_graphs']}"
        )

    _guard(run)


@main.command()
@_common
def check(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Invariant suite: barrier inequalities, inclusions, duality."""

    def run():
        cfg, out, _cache = _setup(config_path, out_dir, no_cache)
        sec = cfg.section("check")
        results = run_invariant_suite(
            cfg.model, cfg.grid, cfg.classes("check"), tol=sec["tol"],
            set_tol=sec["set_tol"], shell_tol=sec["shell_tol"],
            quadrature=cfg.quadrature, fenchel=sec["fenchel"],
        )
        for res in results:
            click.echo(res.line())
        write_json(out / "check.json", {
            "results": [{"name": r.name, "c": r.c, "passed": r.passed,
                         "value": r.value, "bound": r.bound} for r in results],
            "all_passed": all(r.passed for r in results),
        })
        if not all(r.passed for r in results):
            raise ConvergenceError("invariant suite reported failures")

    _guard(run)


@main.command()
@_common
def flow(config_path, out_dir, threads, no_cache, seed, do_plot):
    """Reference trajectory of the Hamiltonian flow with energy audit."""

    def run():
        cfg, out, _cache = _setup(config_path, out_dir, no_cache)
        sec = cfg.section("flow")
        q0 = np.asarray(sec["q0"], dtype=float)
        p0 = np.asarray(sec["p0"], dtype=float)
        if q0.shape != (cfg.model.dim,) or p0.shape != (cfg.model.dim,):
            raise ConfigError(f"keys 'flow.q0'/'flow.p0' must have dimension {cfg.model.dim}")
        try:
            result = el_flow(cfg.model, q0, p0, t=sec["t"], dt=sec["dt"], method=sec["method"])
        except ValueError as exc:
            raise ConfigError(f"flow: {exc}") from None
        energies = cfg.model.hamiltonian(result.q, result.p)
        dim = cfg.model.dim
        write_table_csv(out / "trajectory.csv",
                        ["t"] + _coord_header(dim) + _coord_header(dim, "p") + ["H"],
                        ((t,) + tuple(q) + tuple(p) + (e,)
                         for t, q, p, e in zip(result.times, result.q, result.p, energies)))
        drift = float(np.abs(energies - energies[0]).max())
        write_json(out / "flow.json", {"t": sec["t"], "dt": sec["dt"], "method": sec["method"],
                                       "energy_drift_max": drift})
        if do_plot:
            from . import plots
            plots.plot_flow(out / "flow.png", result, energies, title="reference flow")
        click.echo(f"flow: energy drift {drift:.3e}")

    _guard(run)


def _axis(lo, hi, step):
    if lo is None or hi is None or step is None:
        raise ConfigError("axis bounds and step must be set")
    lo, hi, step = float(lo), float(hi), float(step)
    if step <= 0 or hi < lo:
        raise ConfigError("need step > 0 and max >= min")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


if __name__ == "__main__":
    main()
