"""Discrete Lax-Oleinik operators, weak KAM fixed points and critical values.

The negative operator propagates values along incoming one-step costs,
(T- u)(q) = min_x [u(x) + K[x, q]]; the positive one along outgoing
steps, (T+ u)(q) = max_x [u(x) - K[q, x]].  Both are sup-norm
non-expansive, so iterating from u = 0 and subtracting the minimum each
sweep converges to a fixed point up to an additive drift per step; the
drift divided by tau is the critical value alpha(c) of the class carried
by the kernel.  The iteration is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import CostKernel, GridSpec, build_kernel, default_v_max
from .model import LagrangianModel
from .tropical import mp_closure, mp_product


class ConvergenceError(RuntimeError):
    """Raised when an iteration fails to meet its tolerance."""


class BracketError(RuntimeError):
    """Raised when the bisection cannot bracket the critical value."""


@dataclass
class WeakKamSolution:
    """A weak KAM fixed point on the grid.

    u is normalized to min u = 0 (solutions are defined up to constants);
    residual is the sup norm of T u - u + alpha*tau (minus direction) or
    T u - u - alpha*tau (plus direction).
    """

    u: np.ndarray
    direction: str
    c: np.ndarray
    alpha: float
    residual: float
    iters: int
    converged: bool
    tau: float
    saturated: bool = False


def lax_oleinik_minus(kernel: CostKernel, u: np.ndarray) -> np.ndarray:
    """(T- u)(q) = min over predecessors x of u(x) + K[x, q]."""
    return (u[:, None] + kernel.cost).min(axis=0)


def lax_oleinik_plus(kernel: CostKernel, u: np.ndarray) -> np.ndarray:
    """(T+ u)(q) = max over successors x of u(x) - K[q, x]."""
    return (u[None, :] - kernel.cost).max(axis=1)


def _ensure_kernel(model, grid, c, kernel):
    return kernel if kernel is not None else build_kernel(model, grid, c)


def make_grid(model: LagrangianModel, n: int, tau: float, v_max: float | None = None, c=0.0) -> GridSpec:
    """GridSpec helper that fills in the default speed radius."""
    if v_max is None:
        v_max = default_v_max(model, np.broadcast_to(np.atleast_1d(c), (model.dim,)), n, tau)
    return GridSpec(n=n, tau=tau, v_max=v_max)


def solve_weak_kam(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    direction: str = "minus",
    tol: float = 1e-8,
    max_iters: int = 20000,
    kernel: CostKernel | None = None,
    u0: np.ndarray | None = None,
    period_window: int = 512,
) -> WeakKamSolution:
    """Value iteration for the weak KAM fixed point of one class.

    Each sweep applies the operator, re-normalizes to min u = 0 and reads
    the critical value off the midrange of the per-node drift (u - Tu)/tau;
    the midrange cancels the symmetric part of the pre-asymptotic error.
    The stopping rule is on the oscillation (max - min) of the drift, not
    on successive iterates, since u is only defined up to constants.

    When the optimal cycles are rotational the iterates never settle: they
    become exactly periodic with the cycle length, and the drift keeps
    oscillating.  That regime is detected by profile recurrence over a
    trailing window; the per-step drift averaged over one period is then
    the exact critical drift, and the entrywise minimum of one period of
    drift-corrected iterates is a fixed point (Cesaro combination).
    """
    if direction not in ("minus", "plus"):
        raise ValueError(f"direction must be 'minus' or 'plus', got {direction!r}")
    kernel = _ensure_kernel(model, grid, c, kernel)
    op = lax_oleinik_minus if direction == "minus" else lax_oleinik_plus
    sign = 1.0 if direction == "minus" else -1.0
    combine = np.minimum if direction == "minus" else np.maximum
    tau = grid.tau
    u = np.zeros(kernel.n_nodes) if u0 is None else np.asarray(u0, dtype=float).copy()
    c_arr = np.atleast_1d(np.asarray(c, dtype=float))

    hist_u: list[np.ndarray] = []
    hist_r: list[float] = []
    hist_max = np.empty(period_window)

    alpha = 0.0
    osc = np.inf
    iters = 0
    period = 0
    lam = 0.0
    for iters in range(1, max_iters + 1):
        tu = op(kernel, u)
        defect = sign * (u - tu)
        lo, hi = float(defect.min()), float(defect.max())
        alpha = (hi + lo) / (2.0 * tau)
        osc = hi - lo
        r = float(tu.min())
        u = tu - r
        if osc < tol * tau:
            break
        # recurrence scan: a repeated profile means the iteration went
        # periodic; the drift summed over one period is then exact
        m = len(hist_u)
        if m:
            umax = float(u.max())
            for j in np.nonzero(np.abs(hist_max[:m] - umax) < 1e-11)[0]:
                if float(np.abs(hist_u[j] - u).max()) < 1e-11:
                    period = m - int(j)
                    lam = (sum(hist_r[j + 1:]) + r) / period
                    break
        if period:
            break
        if m == period_window:
            hist_u.pop(0)
            hist_r.pop(0)
            hist_max[: period_window - 1] = hist_max[1:]
            m -= 1
        hist_u.append(u.copy())
        hist_r.append(r)
        hist_max[m] = float(u.max())

    if period:
        alpha = -sign * lam / tau
        best = u.copy()
        w = u
        for _ in range(period - 1):
            w = op(kernel, w) - lam
            combine(best, w, out=best)
            iters += 1
        u = best - best.min()

    tu = op(kernel, u)
    residual = float(np.abs(tu - u + sign * alpha * tau).max())
    converged = residual <= tol * tau
    return WeakKamSolution(
        u=u, direction=direction, c=c_arr,
        alpha=alpha, residual=residual, iters=iters, converged=converged,
        tau=tau, saturated=kernel.saturated,
    )


def conjugate_pair(
    model: LagrangianModel,
    grid: GridSpec,
    minus: WeakKamSolution,
    kernel: CostKernel | None = None,
    tol: float = 1e-9,
    max_iters: int = 20000,
) -> tuple[WeakKamSolution, WeakKamSolution]:
    """Conjugate positive solution of a converged negative one.

    Iterates w <- T+ w - alpha*tau from w = u_minus without renormalizing,
    which anchors the additive constant so the pair agrees on the set of
    calibrated recurrent points; the iterates decrease monotonically to
    the conjugate, hence u_plus <= u_minus with equality somewhere.
    """
    if not minus.converged:
        raise ConvergenceError("conjugate_pair needs a converged minus solution")
    kernel = _ensure_kernel(model, grid, minus.c, kernel)
    shift = minus.alpha * grid.tau
    w = minus.u.copy()
    iters = 0
    delta = np.inf
    for iters in range(1, max_iters + 1):
        nw = lax_oleinik_plus(kernel, w) - shift
        delta = float(np.abs(nw - w).max())
        w = nw
        if delta < tol:
            break
    converged = delta < tol
    residual = float(np.abs(lax_oleinik_plus(kernel, w) - w - shift).max())
    plus = WeakKamSolution(
        u=w, direction="plus", c=minus.c, alpha=minus.alpha, residual=residual,
        iters=iters, converged=converged, tau=grid.tau, saturated=kernel.saturated,
    )
    if not converged:
        raise ConvergenceError(
            f"positive iteration stalled at decrement {delta:.3e} after {iters} sweeps"
        )
    return minus, plus


def critical_value_bisection(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    tol: float = 1e-3,
    max_doublings: int = 13,
    kernel: CostKernel | None = None,
) -> float:
    """Critical value via bisection on closure divergence.

    A trial normalization below the critical value sends the iterated
    powers of K + a*tau to -inf; above it the diagonal drifts up.  The
    bracket comes from catalog bounds (the critical value of a mechanical
    system is at least max U and at most max U plus the conjugate of the
    kinetic form at c), widened by doubling if the predicates disagree.
    Entirely independent of the value-iteration estimate.
    """
    kernel = _ensure_kernel(model, grid, c, kernel)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    u_min, u_max = model.potential_bounds()
    lam_min, _ = model.kinetic_eig_range()
    cn = float(np.linalg.norm(c))
    lo = u_max - 1.0
    hi = u_max + cn ** 2 / (2.0 * lam_min) + 1.0

    finite = kernel.cost[np.isfinite(kernel.cost)]
    eps = 1e-9 * max(1.0, float(np.abs(finite).max()))

    def diverges(alpha: float) -> bool:
        # a normalization below critical leaves a negative cycle, and a
        # negative-mean cycle implies a negative-mean simple cycle, so the
        # diagonal of the running minimum dips below zero within N factors
        b = kernel.cost + alpha * grid.tau
        m = 1
        while True:
            if float(np.diag(b).min()) < -eps:
                return True
            if m >= b.shape[0]:
                return False
            b = np.minimum(b, mp_product(b, b))
            m *= 2

    for _ in range(60):
        if diverges(lo):
            break
        lo -= max(1.0, hi - lo)
    else:
        raise BracketError("no subcritical normalization found")
    for _ in range(60):
        if not diverges(hi):
            break
        hi += max(1.0, hi - lo)
    else:
        raise BracketError("no supercritical normalization found")

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if diverges(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sup_small_speed_cost(model: LagrangianModel, c, samples: int = 512) -> float:
    """sup of L(x, v) - c.v over the unit speed ball, by sampling."""
    d = model.dim
    rng = np.random.default_rng(0)
    qs = rng.random((samples, d))
    vs = rng.standard_normal((samples, d))
    norms = np.linalg.norm(vs, axis=1, keepdims=True)
    vs = vs / np.maximum(norms, 1e-12) * rng.random((samples, 1))
    vals = model.lagrangian(qs, vs) - vs @ np.atleast_1d(np.asarray(c, dtype=float))
    return float(vals.max())


def barrier_tables(
    model: LagrangianModel,
    grid: GridSpec,
    c,
    alpha: float | None = None,
    kernel: CostKernel | None = None,
    window: int = 32,
    tol: float = 1e-6,
    max_doublings: int = 16,
    solve_tol: float = 1e-9,
    solve_max_iters: int = 20000,
):
    """Mane potential and Peierls barrier for one class.

    Solves for alpha(c) first unless an explicit normalization is given,
    then runs the min-plus closure of the normalized kernel.  Returns
    (closure result, alpha, solution-or-None).
    """
    kernel = _ensure_kernel(model, grid, c, kernel)
    sol = None
    if alpha is None:
        sol = solve_weak_kam(model, grid, c, tol=solve_tol, max_iters=solve_max_iters, kernel=kernel)
        if not sol.converged:
            raise ConvergenceError(
                f"weak KAM iteration for c={np.atleast_1d(c)} stalled: residual {sol.residual:.3e}"
            )
        alpha = sol.alpha
    m1 = _sup_small_speed_cost(model, c)
    floor = -(4.0 * (m1 + abs(alpha) + 1.0) + 1.0)
    closure = mp_closure(
        kernel.cost + alpha * grid.tau,
        window=window, tol=tol, max_doublings=max_doublings,
        divergence_floor=floor, growth_ceiling=-floor,
    )
    return closure, float(alpha), sol
