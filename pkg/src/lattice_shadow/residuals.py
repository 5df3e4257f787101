"""Defect diagnostics for candidate approximations of the mass-in-mass flow.

Substituting any time-dependent lattice state into the four mass-in-mass
equations of motion leaves four per-site defects ("residuals"); they vanish
identically exactly when the candidate solves the system.  The weighted
combination

    sqrt(|res1|^2 + |res2|^2 + |res3|^2 + (1/mu)|res4|^2)

is the quantity whose smallness (uniformly in time) makes a family of
candidates a good approximator of a given order in mu, and its sup over the
sample grid is what the convergence experiments track.

Time derivatives of a stored trajectory are taken from its own generating
equations whenever the system tag is known (exact, no differencing noise);
otherwise centered differences are used and flagged in the metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LatticeParams, Trajectory, _dminus, _dplus, mu_norm
from .dynamics import _system_rhs
from .errors import ConfigurationError, SingularLimitError, ValidationError


@dataclass
class ResidualSample:
    """Residuals of one trajectory sample against the mass-in-mass equations."""

    t: float
    res1: np.ndarray
    res2: np.ndarray
    res3: np.ndarray
    res4: np.ndarray
    weighted_norm: float


@dataclass
class GoodApproximatorReport:
    """Observed size bounds of a candidate trajectory.

    ``alpha_observed``/``beta_observed`` are the sup over samples of the
    max-norms of the relative displacement and its time derivative;
    ``d3_satisfied`` records whether the potential's curvature V'' stays in
    [k/2, 2k] on [-alpha_observed, alpha_observed].
    """

    alpha_observed: float
    beta_observed: float
    d3_satisfied: bool


def _derivative_at(traj: Trajectory, index: int) -> np.ndarray:
    """State derivative (4, num_sites) at a sample, exact or differenced."""
    if traj.system is not None:
        return _system_rhs(traj.system, traj.states[index].as_array(), traj.params)
    if index == 0 or index == len(traj) - 1:
        raise ConfigurationError(
            "derivative unavailable at trajectory endpoints with the "
            "finite-difference fallback"
        )
    span = traj.times[index + 1] - traj.times[index - 1]
    return (
        traj.states[index + 1].as_array() - traj.states[index - 1].as_array()
    ) / span


def residuals(traj: Trajectory, params: LatticeParams, index: int) -> ResidualSample:
    """Evaluate the four residuals of sample ``index`` against ``params``.

    The residual formulas use the target parameters (kappa, mu, potential)
    while the time derivatives come from the trajectory's own generating
    system, so a trajectory produced by one system can be judged as a
    candidate approximation of another.
    """
    if params.mu <= 0:
        raise SingularLimitError("residual weighting requires mu > 0")
    state = traj.states[index]
    dR, dP, dr, dp = _derivative_at(traj, index)
    pot = params.potential
    res1 = _dplus(state.P) - dR
    res2 = _dminus(pot.dv(state.R)) + params.kappa * state.r - dP
    res3 = state.p - state.P - dr
    res4 = -params.kappa * state.r - params.mu * dp
    weighted = math.sqrt(
        float(res1 @ res1)
        + float(res2 @ res2)
        + float(res3 @ res3)
        + float(res4 @ res4) / params.mu
    )
    return ResidualSample(
        t=float(traj.times[index]),
        res1=res1,
        res2=res2,
        res3=res3,
        res4=res4,
        weighted_norm=weighted,
    )


def _sample_range(traj: Trajectory) -> range:
    # finite-difference fallback cannot differentiate the endpoints
    if traj.system is None:
        if len(traj) < 3:
            raise ConfigurationError(
                "finite-difference derivatives need at least 3 samples"
            )
        return range(1, len(traj) - 1)
    return range(len(traj))


def weighted_residual_sup(traj: Trajectory, params: LatticeParams) -> float:
    """Sup over the sample grid of the weighted residual norm.

    For trajectories without a generating system the endpoints are skipped
    (centered differences are unavailable there).
    """
    return max(residuals(traj, params, i).weighted_norm for i in _sample_range(traj))


def good_approximator_check(
    traj: Trajectory, params: LatticeParams
) -> GoodApproximatorReport:
    """Measure the boundedness conditions of a candidate trajectory."""
    alpha = 0.0
    beta = 0.0
    for i in _sample_range(traj):
        alpha = max(alpha, float(np.max(np.abs(traj.states[i].R))))
        dR = _derivative_at(traj, i)[0]
        beta = max(beta, float(np.max(np.abs(dR))))
    # endpoints still constrain alpha even when their derivative is unavailable
    for i in (0, len(traj) - 1):
        alpha = max(alpha, float(np.max(np.abs(traj.states[i].R))))
    k = params.potential.k
    lo, hi = params.potential.d2v_range(alpha)
    tol = 1e-12 * k
    d3 = (lo >= 0.5 * k - tol) and (hi <= 2.0 * k + tol)
    return GoodApproximatorReport(
        alpha_observed=alpha, beta_observed=beta, d3_satisfied=d3
    )
