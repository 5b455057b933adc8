"""Configuration torus, Lagrangian catalog, Legendre transform and reference flow.

Points on the flat torus T^d (d = 1 or 2) are plain numpy arrays of shape
(d,) with coordinates taken modulo 1.  Velocities live in the tangent
fiber, momenta in the cotangent fiber; the two are identified through the
Legendre map of the active Lagrangian.  Cohomology classes are represented
by constant 1-forms c.dq, i.e. by vectors c of shape (d,).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

_CATALOG_IDS = ("free", "mechanical", "two-harmonic-mechanical", "anisotropic-kinetic")


class ModelError(ValueError):
    """Raised for invalid model specifications."""


def wrap(q):
    """Canonical torus representative with each coordinate in [0, 1)."""
    q = np.asarray(q, dtype=float)
    return q - np.floor(q)


def torus_delta(a, b):
    """Signed minimal displacement from a to b, per coordinate in [-1/2, 1/2)."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.round(d)


def torus_distance(a, b):
    """Torus metric: Euclidean length of the minimal displacement."""
    return float(np.linalg.norm(torus_delta(a, b), axis=-1))


@dataclass(frozen=True)
class PotentialTerm:
    """One cosine harmonic a * cos(2*pi * k.q) with integer wave vector k."""

    k: tuple[int, ...]
    a: float


@dataclass
class LagrangianModel:
    """A Tonelli Lagrangian from the catalog.

    Catalog entries:
      free                      L(q, v) = |v|^2 / 2
      mechanical                L(q, v) = |v|^2 / 2 - U(q)
      two-harmonic-mechanical   mechanical with exactly two harmonics
      anisotropic-kinetic       L(q, v) = v.A v / 2 - U(q), A constant SPD

    with U(q) = sum_k a_k cos(2*pi * k.q).  Every entry has an analytic
    Legendre inverse and Hamiltonian, so the Tonelli conditions (fiberwise
    strict convexity, superlinearity) hold by construction.
    """

    catalog: str
    dim: int
    terms: tuple[PotentialTerm, ...] = ()
    kinetic: tuple[tuple[float, ...], ...] | None = None

    _A: np.ndarray = field(init=False, repr=False)
    _A_inv: np.ndarray = field(init=False, repr=False)
    _kvecs: np.ndarray = field(init=False, repr=False)
    _amps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.catalog not in _CATALOG_IDS:
            raise ModelError(f"unknown catalog id {self.catalog!r}")
        if self.dim not in (1, 2):
            raise ModelError(f"dimension must be 1 or 2, got {self.dim}")
        if self.catalog == "free" and self.terms:
            raise ModelError("free model takes no potential terms")
        if self.catalog == "two-harmonic-mechanical" and len(self.terms) != 2:
            raise ModelError("two-harmonic-mechanical needs exactly 2 potential terms")
        if self.catalog == "anisotropic-kinetic":
            if self.kinetic is None:
                raise ModelError("anisotropic-kinetic requires a kinetic matrix")
        elif self.kinetic is not None:
            raise ModelError(f"catalog {self.catalog!r} does not take a kinetic matrix")

        for t in self.terms:
            if len(t.k) != self.dim:
                raise ModelError(f"wave vector {t.k} has wrong dimension")
            if not all(float(c).is_integer() for c in t.k):
                raise ModelError(f"wave vector {t.k} must be integer")
            if not np.isfinite(t.a):
                raise ModelError("potential amplitude must be finite")

        if self.kinetic is not None:
            A = np.asarray(self.kinetic, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise ModelError(f"kinetic matrix must be {self.dim}x{self.dim}")
            if not np.allclose(A, A.T):
                raise ModelError("kinetic matrix must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise ModelError("kinetic matrix must be positive definite")
        else:
            A = np.eye(self.dim)

        self._A = A
        self._A_inv = np.linalg.inv(A)
        if self.terms:
            self._kvecs = np.array([t.k for t in self.terms], dtype=float)
            self._amps = np.array([t.a for t in self.terms], dtype=float)
        else:
            self._kvecs = np.zeros((0, self.dim))
            self._amps = np.zeros(0)

    # -- JSON specification -------------------------------------------------

    @classmethod
    def from_spec(cls, spec: dict) -> "LagrangianModel":
        """Build a model from its JSON document; unknown keys are rejected."""
        if not isinstance(spec, dict):
            raise ModelError("model spec must be a JSON object")
        allowed = {"catalog", "dimension", "potential", "kinetic"}
        unknown = set(spec) - allowed
        if unknown:
            raise ModelError(f"unknown model key {sorted(unknown)[0]!r}")
        if "catalog" not in spec or "dimension" not in spec:
            raise ModelError("model spec requires 'catalog' and 'dimension'")
        catalog = spec["catalog"]
        dim = spec["dimension"]
        if not isinstance(dim, int):
            raise ModelError("'dimension' must be an integer")
        raw_terms = spec.get("potential") or []
        if not isinstance(raw_terms, list):
            raise ModelError("'potential' must be a list of {k, a} terms")
        terms = []
        for entry in raw_terms:
            if not isinstance(entry, dict) or set(entry) - {"k", "a"}:
                raise ModelError(f"bad potential term {entry!r}: only keys 'k' and 'a'")
            if "k" not in entry or "a" not in entry:
                raise ModelError(f"potential term {entry!r} requires 'k' and 'a'")
            terms.append(PotentialTerm(k=tuple(int(c) for c in entry["k"]), a=float(entry["a"])))
        kinetic = spec.get("kinetic")
        if kinetic is not None:
            kinetic = tuple(tuple(float(x) for x in row) for row in kinetic)
        return cls(catalog=catalog, dim=dim, terms=tuple(terms), kinetic=kinetic)

    def to_spec(self) -> dict:
        return {
            "catalog": self.catalog,
            "dimension": self.dim,
            "potential": [{"k": list(t.k), "a": t.a} for t in self.terms],
            "kinetic": None if self.kinetic is None else [list(r) for r in self.kinetic],
        }

    # -- evaluation ---------------------------------------------------------

    @property
    def kinetic_matrix(self) -> np.ndarray:
        return self._A

    def potential(self, q):
        """U(q), vectorized over leading axes of q (shape (..., d))."""
        q = np.asarray(q, dtype=float)
        if not self.terms:
            return np.zeros(q.shape[:-1])
        phases = TWO_PI * (q @ self._kvecs.T)
        return np.cos(phases) @ self._amps

    def potential_grad(self, q):
        """grad U(q), shape (..., d)."""
        q = np.asarray(q, dtype=float)
        if not self.terms:
            return np.zeros_like(q)
        phases = TWO_PI * (q @ self._kvecs.T)
        coeff = -TWO_PI * self._amps * np.sin(phases)
        return coeff @ self._kvecs

    def lagrangian(self, q, v):
        v = np.asarray(v, dtype=float)
        kin = 0.5 * np.einsum("...i,ij,...j->...", v, self._A, v)
        return kin - self.potential(q)

    def legendre(self, q, v):
        """Fiber Legendre map p = dL/dv = A v (potential does not enter)."""
        return np.asarray(v, dtype=float) @ self._A

    def legendre_inverse(self, q, p):
        """Inverse fiber map v = A^-1 p."""
        return np.asarray(p, dtype=float) @ self._A_inv

    def hamiltonian(self, q, p):
        """H(q, p) = p.v - L(q, v) at v = legendre_inverse(q, p)."""
        p = np.asarray(p, dtype=float)
        kin = 0.5 * np.einsum("...i,ij,...j->...", p, self._A_inv, p)
        return kin + self.potential(q)

    def fiber_hessian(self, q=None, v=None):
        """d^2 L / dv^2, constant over the catalog."""
        return self._A.copy()

    def kinetic_eig_range(self) -> tuple[float, float]:
        w = np.linalg.eigvalsh(self._A)
        return float(w[0]), float(w[-1])

    def potential_bounds(self, samples: int = 2048) -> tuple[float, float]:
        """(min U, max U), by dense sampling of the torus."""
        if not self.terms:
            return 0.0, 0.0
        if self.dim == 1:
            qs = np.linspace(0.0, 1.0, samples, endpoint=False)[:, None]
        else:
            side = max(64, int(np.sqrt(samples)))
            g = np.linspace(0.0, 1.0, side, endpoint=False)
            qs = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        u = self.potential(qs)
        return float(u.min()), float(u.max())

    def content_key(self) -> str:
        """Canonical string identifying this model, used for cache keys."""
        import json

        return json.dumps(self.to_spec(), sort_keys=True)


# -- reference Euler-Lagrange / Hamiltonian flow -----------------------------

_Y4_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y4_W0 = 1.0 - 2.0 * _Y4_W1


@dataclass
class FlowResult:
    """Sampled Hamiltonian trajectory.

    q holds canonical torus representatives; q_lift the unwrapped lift used
    for winding counts and rotation vectors.  Arrays have shape
    (n_steps + 1, d) for a single seed and (n_steps + 1, B, d) for a batch.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q_lift: np.ndarray


def _leapfrog(model, q, p, dt):
    half = 0.5 * dt
    p = p - half * model.potential_grad(wrap(q))
    q = q + dt * (p @ model._A_inv)
    p = p - half * model.potential_grad(wrap(q))
    return q, p


def _step(model, q, p, dt, method):
    if method == "leapfrog":
        return _leapfrog(model, q, p, dt)
    if method == "yoshida4":
        q, p = _leapfrog(model, q, p, _Y4_W1 * dt)
        q, p = _leapfrog(model, q, p, _Y4_W0 * dt)
        q, p = _leapfrog(model, q, p, _Y4_W1 * dt)
        return q, p
    raise ModelError(f"unknown integrator {method!r}")


def el_flow(model: LagrangianModel, q0, p0, t: float, dt: float, method: str = "yoshida4") -> FlowResult:
    """Integrate the Hamiltonian flow with an explicit symplectic splitting.

    The default composition is 4th order; both schemes are exact for the
    free model.  Rejects non-positive t or dt.
    """
    if not (t > 0):
        raise ValueError(f"flow duration must be positive, got {t}")
    if not (0 < dt <= t):
        raise ValueError(f"need 0 < dt <= t, got dt={dt}, t={t}")
    q = np.atleast_1d(np.asarray(q0, dtype=float)).copy()
    p = np.atleast_1d(np.asarray(p0, dtype=float)).copy()
    if q.shape != p.shape:
        raise ValueError("q0 and p0 must have matching shapes")
    n_steps = int(round(t / dt))
    times = dt * np.arange(n_steps + 1)
    qs = np.empty((n_steps + 1,) + q.shape)
    ps = np.empty_like(qs)
    qs[0], ps[0] = q, p
    for k in range(n_steps):
        q, p = _step(model, q, p, dt, method)
        qs[k + 1], ps[k + 1] = q, p
    return FlowResult(times=times, q=wrap(qs), p=ps, q_lift=qs)
