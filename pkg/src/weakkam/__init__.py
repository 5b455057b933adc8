"""Weak KAM and Aubry-Mather numerics on the flat torus.

Computes critical values, weak KAM solutions, Mane potentials, Peierls
barriers, projected minimizing sets with their cotangent lifts, Mather's
alpha/beta pair, and phase-space coverage diagnostics for invariant
Lagrangian graphs.
"""

from .kernel import CostKernel, FiniteHorizonAction, GridSpec, build_kernel, finite_horizon, recover_path
from .mather import AlphaBetaTable, alpha_sweep, beta_differentiability_scan, compute_beta, rotation_vector, subderivative_interval
from .model import FlowResult, LagrangianModel, el_flow, torus_delta, torus_distance, wrap
from .sets import AubrySet, ManeGraph, MatherSet, extract_aubry, extract_mane, extract_mather, graph_diagnostics
from .solver import WeakKamSolution, barrier_tables, conjugate_pair, critical_value_bisection, lax_oleinik_minus, lax_oleinik_plus, solve_weak_kam
from .tiered import TieredReport, invariance_check, partition_check, tiered_scan
from .tropical import ClosureResult, mp_closure, mp_identity, mp_power, mp_product

__all__ = [
    "AlphaBetaTable", "AubrySet", "ClosureResult", "CostKernel", "FiniteHorizonAction",
    "FlowResult", "GridSpec", "LagrangianModel", "ManeGraph", "MatherSet", "TieredReport",
    "WeakKamSolution", "alpha_sweep", "barrier_tables", "beta_differentiability_scan",
    "build_kernel", "compute_beta", "conjugate_pair", "critical_value_bisection",
    "el_flow", "extract_aubry", "extract_mane", "extract_mather", "finite_horizon",
    "graph_diagnostics", "invariance_check", "lax_oleinik_minus", "lax_oleinik_plus",
    "mp_closure", "mp_identity", "mp_power", "mp_product", "partition_check",
    "recover_path", "rotation_vector", "solve_weak_kam", "subderivative_interval",
    "tiered_scan", "torus_delta", "torus_distance", "wrap",
]

__version__ = "0.1.0"
