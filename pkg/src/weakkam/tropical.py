"""Min-plus (tropical) linear algebra over dense cost tables.

Matrix entries are float64 with +inf as the absorbing "no path" sentinel.
The m-th min-plus power of a one-step cost matrix is the m-step minimal
path cost; the closure below realizes the all-time minimum (discrete Mane
potential) and the trailing-window liminf (discrete Peierls barrier).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INF = np.inf

# cap on broadcast temporaries, in float64 entries
_BLOCK_ENTRIES = 8_000_000


def mp_identity(n: int) -> np.ndarray:
    """Min-plus identity: 0 on the diagonal, +inf elsewhere."""
    eye = np.full((n, n), INF)
    np.fill_diagonal(eye, 0.0)
    return eye


def mp_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """C[i, j] = min_k (A[i, k] + B[k, j]); +inf absorbs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
    n, k = a.shape
    m = b.shape[1]
    rows_per_block = max(1, _BLOCK_ENTRIES // max(1, k * m))
    if rows_per_block >= n:
        return (a[:, :, None] + b[None, :, :]).min(axis=1)
    out = np.empty((n, m))
    for start in range(0, n, rows_per_block):
        stop = min(n, start + rows_per_block)
        out[start:stop] = (a[start:stop, :, None] + b[None, :, :]).min(axis=1)
    return out


def mp_vec_product(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Row-vector product: out[j] = min_i (u[i] + A[i, j])."""
    return (u[:, None] + a).min(axis=0)


def mp_power(a: np.ndarray, m: int) -> np.ndarray:
    """A^(x)m by repeated squaring; m >= 1."""
    if m < 1:
        raise ValueError("power must be >= 1")
    a = np.asarray(a, dtype=float)
    result = None
    base = a
    k = m
    while k:
        if k & 1:
            result = base.copy() if result is None else mp_product(result, base)
        k >>= 1
        if k:
            base = mp_product(base, base)
    return result


@dataclass
class ClosureResult:
    """Outcome of the iterated-power closure of a normalized kernel.

    mane          running entrywise minimum over powers 1..m_star
    barrier       entrywise minimum over the trailing window of powers
    barrier_last  the last power alone (recorded next to the window min)
    converged     successive trailing windows moved less than tol
    diverged      entries drifted to -inf (normalization below critical)
    m_star        number of one-step factors reached
    oscillation   last measured window-to-window movement
    """

    mane: np.ndarray
    barrier: np.ndarray
    barrier_last: np.ndarray
    converged: bool
    diverged: bool
    m_star: int
    oscillation: float


def mp_closure(
    a: np.ndarray,
    window: int = 32,
    tol: float = 1e-6,
    max_doublings: int = 16,
    max_window_passes: int = 4,
    divergence_floor: float | None = None,
    growth_ceiling: float | None = None,
) -> ClosureResult:
    """Iterate powers of a normalized kernel up to their stable regime.

    The horizon doubles (P <- P (x) P, with the running minimum folded in
    via B <- min(B, B (x) B)) until successive powers move by less than
    tol, then trailing windows of sequential products are compared; the
    entrywise window minimum is the barrier estimate.  A drift of the
    minimal entry below the divergence floor reports divergence (the
    normalization is subcritical); a diagonal drift above the growth
    ceiling exits early (supercritical).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError("closure needs a square matrix")
    finite = a[np.isfinite(a)]
    span = float(finite.max() - finite.min()) if finite.size else 1.0
    scale = max(1.0, float(np.abs(finite).max()) if finite.size else 1.0)
    if divergence_floor is None:
        divergence_floor = -(4.0 * span + 4.0 * scale + 1.0)
    if growth_ceiling is None:
        growth_ceiling = 4.0 * span + 4.0 * scale + 1.0

    running = a.copy()
    power = a.copy()
    m = 1
    for _ in range(max_doublings):
        new_power = mp_product(power, power)
        running = np.minimum(running, mp_product(running, running))
        m *= 2
        if float(running.min()) < divergence_floor:
            return ClosureResult(
                mane=running, barrier=new_power, barrier_last=new_power,
                converged=False, diverged=True, m_star=m, oscillation=INF,
            )
        with np.errstate(invalid="ignore"):
            diff = np.abs(new_power - power)
        diff[np.isinf(new_power) & np.isinf(power)] = 0.0   # unreachable stays unreachable
        move = float(diff.max())
        power = new_power
        if float(np.diag(power).min()) > growth_ceiling:
            return ClosureResult(
                mane=running, barrier=power, barrier_last=power,
                converged=False, diverged=False, m_star=m, oscillation=INF,
            )
        if move < tol:
            break

    prev_window = None
    osc = INF
    converged = False
    for _ in range(max_window_passes):
        wmin = power.copy()
        for _ in range(window):
            power = mp_product(power, a)
            m += 1
            np.minimum(wmin, power, out=wmin)
        running = np.minimum(running, wmin)
        if float(running.min()) < divergence_floor:
            return ClosureResult(
                mane=running, barrier=wmin, barrier_last=power,
                converged=False, diverged=True, m_star=m, oscillation=INF,
            )
        if prev_window is not None:
            with np.errstate(invalid="ignore"):
                wdiff = np.abs(wmin - prev_window)
            wdiff[np.isinf(wmin) & np.isinf(prev_window)] = 0.0
            osc = float(wdiff.max())
            prev_window = wmin
            if osc < tol:
                converged = True
                break
        else:
            prev_window = wmin

    return ClosureResult(
        mane=running, barrier=prev_window, barrier_last=power,
        converged=converged, diverged=False, m_star=m, oscillation=osc,
    )
