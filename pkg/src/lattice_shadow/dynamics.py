"""Right-hand sides and time integrators for the lattice systems.

Five first-order systems share the state layout (R, P, r, p):

* ``mim``               -- the full mass-in-mass lattice,
* ``fput``              -- plain FPUT on (R, P) with the resonators pinned
                           to their carriers (r = 0, p = P),
* ``fput-modified``     -- FPUT with the carrier force scaled by 1/(1+mu),
                           same pinned embedding,
* ``fput-sho``          -- plain FPUT driving free internal resonators,
* ``fput-modified-sho`` -- scaled FPUT driving free internal resonators.

All systems with live resonators are stiff for small mu: the resonators
rotate at frequency sqrt(kappa/mu).  Two interchangeable schemes are
provided.  ``rk4-fixed`` is the classical fourth-order Runge-Kutta method
with the step clamped to resolve the fast period.  ``strang-split``
alternates the exact rotation of the fast (r, p - P) pair (with the carrier
state frozen) with an explicit-midpoint step of the slow (R, P) subsystem;
it is second order but preserves the fast quadratic invariant exactly per
rotation, which makes it a useful cross-check on the first scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np

from .core import (
    IntegratorMeta,
    LatticeParams,
    LatticeState,
    Trajectory,
    _dminus,
    _dplus,
    mechanical_energy,
    mu_norm,
)
from .errors import (
    BlowUpError,
    ConfigurationError,
    SingularLimitError,
    ValidationError,
)

SYSTEMS = ("mim", "fput", "fput-modified", "fput-sho", "fput-modified-sho")

# systems whose (r, p) components carry the fast resonator motion
FAST_SYSTEMS = frozenset({"mim", "fput-sho", "fput-modified-sho"})

# largest angle omega*dt the RK4 stability region tolerates on the
# imaginary axis is 2*sqrt(2); stay well inside it
_MAX_FAST_ANGLE = 2.5

SCHEMES = ("rk4-fixed", "strang-split")


@dataclass(frozen=True)
class StepPolicy:
    """Step-size policy for the fixed-step integrators.

    ``dt`` is the requested step.  Whenever the integrated system has live
    resonators the effective step is additionally clamped to at most
    (fast period) / ``fast_resolution``, and then rounded down so that an
    integer number of steps lands exactly on each sample instant.
    """

    scheme: str = "rk4-fixed"
    dt: float = 1e-3
    fast_resolution: float = 20.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if not (self.dt > 0):
            raise ValidationError("dt must be > 0")
        if not (self.fast_resolution >= 3):
            raise ValidationError("fast_resolution must be >= 3")


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def _system_rhs(system: str, y: np.ndarray, params: LatticeParams) -> np.ndarray:
    """Time derivative of the stacked state array (4, num_sites)."""
    R, P, r, p = y
    pot = params.potential
    out = np.empty_like(y)
    out[0] = _dplus(P)
    if system == "mim":
        out[1] = _dminus(pot.dv(R)) + params.kappa * r
        out[2] = p - P
        out[3] = (-params.kappa / params.mu) * r
    elif system == "fput":
        out[1] = _dminus(pot.dv(R))
        out[2] = 0.0
        out[3] = out[1]
    elif system == "fput-modified":
        out[1] = _dminus(pot.dv(R)) / (1.0 + params.mu)
        out[2] = 0.0
        out[3] = out[1]
    elif system == "fput-sho":
        out[1] = _dminus(pot.dv(R))
        out[2] = p - P
        out[3] = (-params.kappa / params.mu) * r
    elif system == "fput-modified-sho":
        out[1] = _dminus(pot.dv(R)) / (1.0 + params.mu)
        out[2] = p - P
        out[3] = (-params.kappa / params.mu) * r
    else:
        raise ValidationError(f"unknown system {system!r}")
    return out


def _check_system(system: str, params: LatticeParams) -> None:
    if system not in SYSTEMS:
        raise ValidationError(f"system must be one of {SYSTEMS}")
    if system in FAST_SYSTEMS and params.mu == 0:
        raise SingularLimitError(
            f"system {system!r} divides by mu; at mu = 0 use the plain "
            "'fput' limit instead"
        )


def mim_rhs(state: LatticeState, params: LatticeParams) -> LatticeState:
    """Time derivative of the mass-in-mass lattice at one state.

    Requires mu > 0: the resonator-velocity equation carries a 1/mu factor.
    """
    _check_system("mim", params)
    return LatticeState.from_array(_system_rhs("mim", state.as_array(), params))


def fput_rhs(
    R, P, params: LatticeParams, modified: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """FPUT derivative (dR, dP) on the ring; ``modified`` scales dP by 1/(1+mu)."""
    R = np.asarray(R, dtype=float)
    P = np.asarray(P, dtype=float)
    dR = _dplus(P)
    dP = _dminus(params.potential.dv(R))
    if modified:
        dP = dP / (1.0 + params.mu)
    return dR, dP


def system_derivative(
    system: str, state: LatticeState, params: LatticeParams
) -> np.ndarray:
    """Exact state derivative (4, num_sites) of ``state`` under ``system``."""
    _check_system(system, params)
    return _system_rhs(system, state.as_array(), params)


# ---------------------------------------------------------------------------
# Steppers
# ---------------------------------------------------------------------------

def _rk4_step(y: np.ndarray, h: float, rhs) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + (0.5 * h) * k1)
    k3 = rhs(y + (0.5 * h) * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fast_rotation(y: np.ndarray, h: float, params: LatticeParams) -> np.ndarray:
    """Advance the resonator pair (r, p - P) by its exact rotation.

    With the carrier state frozen, (r, p - P) rotates at frequency
    sqrt(kappa/mu); the map conserves kappa r^2 + mu (p - P)^2 exactly.
    """
    omega = params.fast_frequency()
    c = math.cos(omega * h)
    s = math.sin(omega * h)
    out = y.copy()
    r = y[2]
    u = y[3] - y[1]
    out[2] = c * r + (s / omega) * u
    out[3] = y[1] + (c * u - omega * s * r)
    return out


def _slow_midpoint(
    y: np.ndarray, h: float, system: str, params: LatticeParams
) -> np.ndarray:
    """Explicit-midpoint step of the (R, P) subsystem with (r, p) frozen."""
    pot = params.potential
    kappa_r = params.kappa * y[2] if system == "mim" else 0.0
    scale = 1.0 / (1.0 + params.mu) if system == "fput-modified-sho" else 1.0

    def force(R):
        return scale * _dminus(pot.dv(R)) + kappa_r

    R, P = y[0], y[1]
    R_mid = R + (0.5 * h) * _dplus(P)
    P_mid = P + (0.5 * h) * force(R)
    out = y.copy()
    out[0] = R + h * _dplus(P_mid)
    out[1] = P + h * force(R_mid)
    return out


def _make_stepper(
    scheme: str, system: str, params: LatticeParams
) -> Callable[[np.ndarray, float], np.ndarray]:
    if scheme == "rk4-fixed":
        rhs = lambda y: _system_rhs(system, y, params)
        return lambda y, h: _rk4_step(y, h, rhs)
    if scheme == "strang-split":
        if system in FAST_SYSTEMS:
            def step(y, h):
                y = fast_rotation(y, 0.5 * h, params)
                y = _slow_midpoint(y, h, system, params)
                return fast_rotation(y, 0.5 * h, params)
            return step
        # no fast subsystem: degrade to a plain explicit-midpoint step
        rhs = lambda y: _system_rhs(system, y, params)

        def step(y, h):
            return y + h * rhs(y + (0.5 * h) * rhs(y))

        return step
    raise ValidationError(f"scheme must be one of {SCHEMES}")


def scheme_order(scheme: str) -> int:
    """Formal convergence order of a scheme (used for Richardson estimates)."""
    return 4 if scheme == "rk4-fixed" else 2


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def effective_dt(
    policy: StepPolicy, params: LatticeParams, system: str, sample_dt: float
) -> Tuple[float, int]:
    """Resolve the policy to a concrete step dividing ``sample_dt`` exactly."""
    dt_target = policy.dt
    if system in FAST_SYSTEMS:
        dt_target = min(dt_target, params.fast_period() / policy.fast_resolution)
    substeps = max(1, math.ceil(sample_dt / dt_target - 1e-12))
    dt = sample_dt / substeps
    if system in FAST_SYSTEMS and params.fast_frequency() * dt > _MAX_FAST_ANGLE:
        raise ConfigurationError(
            "fast frequency unresolved: omega*dt = "
            f"{params.fast_frequency() * dt:.3f} exceeds {_MAX_FAST_ANGLE}"
        )
    return dt, substeps


def integrate(
    state0: LatticeState,
    params: LatticeParams,
    policy: StepPolicy,
    system: str,
    t_final: float,
    sample_dt: float,
) -> Trajectory:
    """Integrate ``system`` over [-t_final, t_final], sampled every ``sample_dt``.

    The run starts from ``state0`` at t = 0 and marches forward and backward
    so the trajectory covers the symmetric interval.  Samples land on the
    uniform grid k * sample_dt.  Raises ``BlowUpError`` (with the failure
    time) if the state leaves the finite range, and ``ConfigurationError``
    if the policy cannot resolve the resonator frequency.
    """
    _check_system(system, params)
    if not (t_final > 0) or not (sample_dt > 0):
        raise ValidationError("t_final and sample_dt must be > 0")
    if state0.num_sites != params.num_sites:
        raise ValidationError("state0 does not match params.num_sites")

    dt, substeps = effective_dt(policy, params, system, sample_dt)
    step = _make_stepper(policy.scheme, system, params)
    n_half = max(1, math.ceil(t_final / sample_dt - 1e-9))

    def march(y0: np.ndarray, h: float):
        out = []
        y = y0
        for i in range(n_half):
            for _ in range(substeps):
                y = step(y, h)
            if not np.isfinite(y).all():
                t_fail = (i + 1) * substeps * h
                raise BlowUpError(
                    f"state blew up near t = {t_fail:.6g} (system {system!r})",
                    time=t_fail,
                )
            out.append(y)
        return out

    y0 = state0.as_array()
    forward = march(y0, dt)
    backward = march(y0, -dt)

    times = sample_dt * np.arange(-n_half, n_half + 1)
    arrays = list(reversed(backward)) + [y0] + forward
    states = [LatticeState.from_array(y) for y in arrays]

    meta = IntegratorMeta(
        scheme=policy.scheme,
        dt_effective=dt,
        substeps_per_sample=substeps,
        derivative_mode="ode",
    )
    if system == "mim":
        energies = np.array([mechanical_energy(s, params) for s in states])
        ref = max(abs(energies[n_half]), np.finfo(float).tiny)
        meta.energy_rel_drift = float(np.max(np.abs(energies - energies[n_half])) / ref)
    norm0 = mu_norm(states[n_half], params)
    if norm0 > 0:
        meta.norm_ratio_max = float(
            max(mu_norm(s, params) for s in states) / norm0
        )
    return Trajectory(params=params, times=times, states=states, system=system, meta=meta)


def self_convergence_error(
    state0: LatticeState,
    params: LatticeParams,
    policy: StepPolicy,
    system: str,
    t_final: float,
) -> float:
    """Richardson self-convergence estimate at |t| = t_final.

    Runs the scheme at its effective step and at half that step and returns
    the larger mu-norm difference of the endpoint states.  For a scheme of
    order q the error of the half-step run is about this value / (2^q - 1).
    """
    traj1 = integrate(state0, params, policy, system, t_final, sample_dt=t_final)
    half = replace(policy, dt=traj1.meta.dt_effective / 2.0)
    traj2 = integrate(state0, params, half, system, t_final, sample_dt=t_final)
    d_fwd = mu_norm(traj1.states[-1] - traj2.states[-1], params)
    d_bwd = mu_norm(traj1.states[0] - traj2.states[0], params)
    return max(d_fwd, d_bwd)


# ---------------------------------------------------------------------------
# Driven resonator closed form
# ---------------------------------------------------------------------------

def _oriented_trapezoid(values: np.ndarray, h: float) -> np.ndarray:
    # composite trapezoid along axis 0 of (n_nodes, num_sites)
    return h * (np.sum(values, axis=0) - 0.5 * (values[0] + values[-1]))


def driven_sho_solve(
    r0,
    p0,
    driver: Trajectory,
    params: LatticeParams,
    t: float,
    extrapolate: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form resonator state at time ``t`` under a stored carrier history.

    Uses the variation-of-parameters solution of the driven resonator pair:
    a rotation of the initial offset (r0, p0 - P(0)) plus sine/cosine
    convolutions of the carrier acceleration dP/dt against the resonator
    frequency.  dP/dt is reconstructed exactly from the driver's own FPUT
    equations at the stored samples (no numerical differentiation), and the
    convolutions are evaluated by composite trapezoid on the stored grid,
    with one step of Romberg extrapolation when the node count allows it.

    The driver trajectory must sample finely enough to resolve the fast
    period, and both 0 and ``t`` must lie on its grid.
    """
    r0 = np.asarray(r0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    omega = params.fast_frequency()

    i0 = driver.index_of(0.0)
    it = driver.index_of(t)
    lo, hi = min(i0, it), max(i0, it)
    times = driver.times[lo : hi + 1]
    if times.shape[0] < 2:
        raise ConfigurationError("driver trajectory does not cover [0, t]")
    steps = np.diff(times)
    h = float(steps[0])
    if not np.allclose(steps, h, rtol=1e-8, atol=0.0):
        raise ConfigurationError("driver sample grid must be uniform")
    if h > params.fast_period():
        raise ConfigurationError(
            "quadrature grid coarser than the fast period "
            f"({h:.3g} > {params.fast_period():.3g})"
        )

    modified = driver.system in ("fput-modified", "fput-modified-sho")
    R_nodes = driver.component_matrix("R")[lo : hi + 1]
    P_nodes = driver.component_matrix("P")[lo : hi + 1]
    pdot = _dminus(params.potential.dv(R_nodes))
    if modified:
        pdot = pdot / (1.0 + params.mu)

    phase = omega * (t - times)  # (n_nodes,)
    sin_vals = np.sin(phase)[:, None] * pdot
    cos_vals = np.cos(phase)[:, None] * pdot
    sign = 1.0 if t >= 0 else -1.0

    def convolve(vals: np.ndarray) -> np.ndarray:
        fine = _oriented_trapezoid(vals, h)
        n = vals.shape[0] - 1
        if extrapolate and n % 2 == 0 and n >= 2:
            coarse = _oriented_trapezoid(vals[::2], 2.0 * h)
            return (4.0 * fine - coarse) / 3.0
        return fine

    int_sin = sign * convolve(sin_vals)
    int_cos = sign * convolve(cos_vals)

    P_start = driver.states[i0].P
    P_end = driver.states[it].P
    u0 = p0 - P_start
    c = math.cos(omega * t)
    s = math.sin(omega * t)
    r_t = r0 * c + (u0 / omega) * s - int_sin / omega
    p_t = P_end - omega * r0 * s + u0 * c - int_cos
    return r_t, p_t
