"""State, difference calculus, and energy diagnostics for the mass-in-mass ring.

The lattice is a periodic ring of ``num_sites`` unit-mass carriers, each
coupled to its neighbors through a smooth quartic spring potential and to an
internal resonator of mass ``mu`` through a linear spring of stiffness
``kappa``.  A snapshot of the system is the quadruple of per-site sequences

* ``R`` -- relative displacement between adjacent carriers,
* ``P`` -- carrier velocity,
* ``r`` -- resonator displacement relative to its carrier,
* ``p`` -- resonator velocity.

This module defines those value types plus the forward/backward difference
operators on the ring, the mu-weighted norm used by every error diagnostic,
the mechanical energy, and the shifted ("modified") energy of an error state
taken around a reference displacement profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional

import numpy as np

from .errors import (
    ConfigurationError,
    InvalidLatticeError,
    SingularLimitError,
    ValidationError,
)

Direction = Literal["plus", "minus"]


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Quartic interaction potential V(h) = (k/2)h^2 + (a/3)h^3 + (b/4)h^4.

    ``k`` is the linear stiffness at the origin and must be positive; ``a``
    and ``b`` are the cubic and quartic coefficients.  Every member of this
    family satisfies V(0) = V'(0) = 0 and V''(0) = k by construction.
    """

    k: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not (self.k > 0):
            raise ValidationError("potential stiffness k must be > 0")

    def v(self, h):
        """Potential value."""
        h = np.asarray(h, dtype=float)
        return 0.5 * self.k * h * h + (self.a / 3.0) * h ** 3 + 0.25 * self.b * h ** 4

    def dv(self, h):
        """First derivative V'(h) = k h + a h^2 + b h^3 (the spring force law)."""
        h = np.asarray(h, dtype=float)
        return self.k * h + self.a * h * h + self.b * h ** 3

    def d2v(self, h):
        """Second derivative V''(h) = k + 2 a h + 3 b h^2."""
        h = np.asarray(h, dtype=float)
        return self.k + 2.0 * self.a * h + 3.0 * self.b * h * h

    def d3v(self, h):
        """Third derivative V'''(h) = 2 a + 6 b h."""
        h = np.asarray(h, dtype=float)
        return 2.0 * self.a + 6.0 * self.b * h

    def d2v_range(self, alpha: float) -> tuple[float, float]:
        """Exact range of V'' over the symmetric interval [-alpha, alpha].

        V'' is a quadratic in h, so its extrema on an interval sit at the
        endpoints or at the interior vertex.
        """
        if alpha < 0:
            raise ValidationError("alpha must be >= 0")
        candidates = [float(self.d2v(-alpha)), float(self.d2v(alpha))]
        if self.b != 0.0:
            vertex = -self.a / (3.0 * self.b)
            if -alpha <= vertex <= alpha:
                candidates.append(float(self.d2v(vertex)))
        return min(candidates), max(candidates)

    def curvature_window_alpha(self) -> float:
        """Largest alpha with V''([-alpha, alpha]) contained in [k/2, 2k].

        Returns ``math.inf`` for the purely quadratic potential.  For the
        defaults k=1, a=1, b=0 the answer is 1/4 (the lower bound
        V''(-alpha) >= k/2 is the binding constraint).
        """
        if self.a == 0.0 and self.b == 0.0:
            return math.inf

        def ok(alpha: float) -> bool:
            lo, hi = self.d2v_range(alpha)
            return lo >= 0.5 * self.k and hi <= 2.0 * self.k

        hi = 1.0
        while ok(hi):
            hi *= 2.0
            if hi > 1e12:
                return math.inf
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        return lo


@dataclass(frozen=True)
class LatticeParams:
    """Physical constants and geometry of one lattice configuration."""

    kappa: float
    mu: float
    potential: Potential
    num_sites: int

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValidationError("kappa must be > 0")
        if not (self.mu >= 0):
            raise ValidationError("mu must be >= 0")
        if self.num_sites < 2:
            raise ValidationError("num_sites must be >= 2")

    def fast_frequency(self) -> float:
        """Internal resonator frequency sqrt(kappa/mu); undefined at mu = 0."""
        if self.mu == 0:
            raise SingularLimitError(
                "mu = 0 has no internal resonator frequency; "
                "the lattice degenerates to plain FPUT"
            )
        return math.sqrt(self.kappa / self.mu)

    def fast_period(self) -> float:
        """Period 2*pi/sqrt(kappa/mu) of the internal resonator."""
        return 2.0 * math.pi / self.fast_frequency()


# ---------------------------------------------------------------------------
# State and trajectory containers
# ---------------------------------------------------------------------------

def _as_site_array(q, name: str) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise InvalidLatticeError(f"{name} must be a 1-d sequence of length >= 2")
    return arr


@dataclass
class LatticeState:
    """One snapshot (R, P, r, p) of the four per-site sequences."""

    R: np.ndarray
    P: np.ndarray
    r: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.R = _as_site_array(self.R, "R")
        self.P = _as_site_array(self.P, "P")
        self.r = _as_site_array(self.r, "r")
        self.p = _as_site_array(self.p, "p")
        n = self.R.shape[0]
        if not (self.P.shape[0] == self.r.shape[0] == self.p.shape[0] == n):
            raise InvalidLatticeError("R, P, r, p must all have the same length")
        if not (
            np.isfinite(self.R).all()
            and np.isfinite(self.P).all()
            and np.isfinite(self.r).all()
            and np.isfinite(self.p).all()
        ):
            raise InvalidLatticeError("state entries must all be finite")

    @property
    def num_sites(self) -> int:
        return self.R.shape[0]

    @classmethod
    def zeros(cls, num_sites: int) -> "LatticeState":
        z = np.zeros(num_sites)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def from_array(cls, data: np.ndarray) -> "LatticeState":
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] != 4:
            raise InvalidLatticeError("expected an array of shape (4, num_sites)")
        return cls(data[0].copy(), data[1].copy(), data[2].copy(), data[3].copy())

    def as_array(self) -> np.ndarray:
        """Stack the four components into a (4, num_sites) array (copy)."""
        return np.stack([self.R, self.P, self.r, self.p])

    def copy(self) -> "LatticeState":
        return LatticeState(self.R.copy(), self.P.copy(), self.r.copy(), self.p.copy())

    def __sub__(self, other: "LatticeState") -> "LatticeState":
        return LatticeState(
            self.R - other.R, self.P - other.P, self.r - other.r, self.p - other.p
        )


@dataclass
class IntegratorMeta:
    """Record of how a trajectory was produced."""

    scheme: str
    dt_effective: float
    substeps_per_sample: int
    derivative_mode: str = "ode"
    energy_rel_drift: Optional[float] = None
    norm_ratio_max: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "dt_effective": self.dt_effective,
            "substeps_per_sample": self.substeps_per_sample,
            "derivative_mode": self.derivative_mode,
            "energy_rel_drift": self.energy_rel_drift,
            "norm_ratio_max": self.norm_ratio_max,
        }


@dataclass
class Trajectory:
    """Time-sampled states plus the metadata needed to differentiate them.

    ``system`` names the generating right-hand side (``"mim"``, ``"fput"``,
    ``"fput-modified"``, ``"fput-sho"``, ``"fput-modified-sho"``) so that time
    derivatives at the samples can be evaluated exactly from the defining
    equations.  ``system=None`` marks an externally supplied trajectory whose
    derivatives must fall back to centered differences.
    """

    params: LatticeParams
    times: np.ndarray
    states: List[LatticeState]
    system: Optional[str]
    meta: IntegratorMeta

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.states) != self.times.shape[0]:
            raise ValidationError("times and states must have matching lengths")
        if self.times.shape[0] >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValidationError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.shape[0]

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the sample at time ``t`` (within ``tol``)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise ConfigurationError(
                f"t={t!r} does not lie on the trajectory sample grid"
            )
        return i

    def component_matrix(self, name: str) -> np.ndarray:
        """All samples of one component as an array of shape (n_samples, num_sites)."""
        return np.stack([getattr(s, name) for s in self.states])


# ---------------------------------------------------------------------------
# Difference operators and diagnostics
# ---------------------------------------------------------------------------

def difference(q, direction: Direction) -> np.ndarray:
    """Forward or backward difference on the periodic ring.

    ``plus`` gives (q_{j+1} - q_j), ``minus`` gives (q_j - q_{j-1}), with the
    site index taken modulo the ring length.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.shape[0] < 2:
        raise InvalidLatticeError("difference needs a 1-d sequence of length >= 2")
    if direction == "plus":
        return np.roll(q, -1) - q
    if direction == "minus":
        return q - np.roll(q, 1)
    raise ValidationError(f"unknown difference direction {direction!r}")


def _dplus(q: np.ndarray) -> np.ndarray:
    # hot-path variant without validation; q may be (J,) or (n, J)
    return np.roll(q, -1, axis=-1) - q


def _dminus(q: np.ndarray) -> np.ndarray:
    return q - np.roll(q, 1, axis=-1)


def mu_norm(state: LatticeState, params: LatticeParams) -> float:
    """Weighted l2 norm sqrt(k/2 |R|^2 + 1/2 |P|^2 + kappa/2 |r|^2 + mu/2 |p|^2).

    This is the square root of the mechanical energy of the linearized
    lattice and the yardstick for all shadowing-error measurements.
    """
    k = params.potential.k
    total = (
        0.5 * k * float(state.R @ state.R)
        + 0.5 * float(state.P @ state.P)
        + 0.5 * params.kappa * float(state.r @ state.r)
        + 0.5 * params.mu * float(state.p @ state.p)
    )
    return math.sqrt(total)


def mechanical_energy(state: LatticeState, params: LatticeParams) -> float:
    """Total lattice energy: sum of V(R_j) + P_j^2/2 + kappa r_j^2/2 + mu p_j^2/2.

    Conserved exactly along the mass-in-mass flow; its numerical drift is the
    primary integrator audit.
    """
    return float(
        np.sum(params.potential.v(state.R))
        + 0.5 * float(state.P @ state.P)
        + 0.5 * params.kappa * float(state.r @ state.r)
        + 0.5 * params.mu * float(state.p @ state.p)
    )


def modified_energy(psi: LatticeState, base_R, params: LatticeParams) -> float:
    """Energy of an error state ``psi`` with the potential shifted to ``base_R``.

    The first component uses W(z) = V(base + z) - V(base) - V'(base) z, the
    second-order remainder of V around the reference displacement, so the
    result is comparable to mu_norm(psi)^2 whenever the displacements stay in
    the curvature window of the potential.  With ``base_R = 0`` it reduces to
    ``mechanical_energy(psi)``.
    """
    base = np.asarray(base_R, dtype=float)
    if base.shape != psi.R.shape:
        raise InvalidLatticeError("base_R must match the error state's site count")
    pot = params.potential
    w = pot.v(base + psi.R) - pot.v(base) - pot.dv(base) * psi.R
    return float(
        np.sum(w)
        + 0.5 * float(psi.P @ psi.P)
        + 0.5 * params.kappa * float(psi.r @ psi.r)
        + 0.5 * params.mu * float(psi.p @ psi.p)
    )
