"""High-frequency convolution integrals and their boundary-term expansions.

The resonator response to a slowly varying drive is a convolution

    integral_0^t exp(i omega (t - s)) f(s) ds

with omega large.  Repeated integration by parts trades the integral for
boundary sums in powers of 1/omega plus a remainder that shrinks one power
faster per round.  This module evaluates the integral accurately (composite
Gauss-Legendre resolving the oscillation), evaluates the boundary-sum
expansion of a given order, specializes it to the real sine-projected form
used by the resonator force (even/odd derivative sums with cos/sin
boundary factors), and fits the observed remainder order over a frequency
sweep.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, FitError, ValidationError
from .experiments import fit_loglog_slope


@dataclass(frozen=True)
class ExpansionInput:
    """Derivative data of the integrand at the endpoint times.

    ``derivs_at_t[j]`` and ``derivs_at_0[j]`` hold the j-th derivative of
    the integrand at the evaluation time and at 0.
    """

    derivs_at_t: Tuple[float, ...]
    derivs_at_0: Tuple[float, ...]
    omega: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "derivs_at_t", tuple(self.derivs_at_t))
        object.__setattr__(self, "derivs_at_0", tuple(self.derivs_at_0))
        if not (self.omega > 0):
            raise ValidationError("omega must be > 0")


@dataclass
class QuadratureResult:
    value: complex
    error_estimate: float
    panels: int


@dataclass
class ExpansionOrderFit:
    """Observed remainder order of the boundary-sum expansion."""

    order: int
    omegas: List[float]
    errors: List[float]
    slope: Optional[float]
    r2: Optional[float]
    closed: bool = False
    note: str = ""


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gauss_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _gauss_kernel_integral(
    f: Callable, omega: float, t: float, n_panels: int, nodes: int
) -> complex:
    gx, gw = _gauss_nodes(nodes)
    edges = np.linspace(0.0, t, n_panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * (edges[1:] - edges[:-1])
    xs = (mids[:, None] + halves[:, None] * gx[None, :]).ravel()
    ws = (halves[:, None] * gw[None, :]).ravel()
    kernel = np.exp(1j * omega * (t - xs))
    return complex(np.sum(ws * kernel * np.asarray(f(xs), dtype=complex)))


def osc_integral_exact(
    f,
    omega: float,
    t: float,
    panels_per_period: float = 8.0,
    nodes: int = 5,
) -> QuadratureResult:
    """Evaluate integral_0^t exp(i omega (t-s)) f(s) ds with an error estimate.

    ``f`` is either a vectorized callable or a pair (times, values) of dense
    samples starting at 0 and ending at t.  Callables are integrated by
    composite Gauss-Legendre with ``panels_per_period`` panels of ``nodes``
    points per oscillation period (40 evaluation points per period at the
    defaults); samples by composite trapezoid on their own grid.  The error
    estimate is the magnitude of the grid-halving difference, and the
    returned value is the finer result.
    """
    if not (omega > 0):
        raise ValidationError("omega must be > 0")
    if isinstance(f, tuple):
        return _sampled_kernel_integral(f, omega, t)
    if t == 0:
        return QuadratureResult(value=0.0 + 0.0j, error_estimate=0.0, panels=0)
    if panels_per_period * nodes < 20:
        raise ConfigurationError(
            "quadrature resolves fewer than 20 points per oscillation period"
        )
    n_periods = abs(t) * omega / (2.0 * math.pi)
    n_panels = max(4, math.ceil(n_periods * panels_per_period))
    coarse = _gauss_kernel_integral(f, omega, t, n_panels, nodes)
    fine = _gauss_kernel_integral(f, omega, t, 2 * n_panels, nodes)
    return QuadratureResult(
        value=fine, error_estimate=abs(fine - coarse), panels=2 * n_panels
    )


def _sampled_kernel_integral(samples, omega: float, t: float) -> QuadratureResult:
    times, values = samples
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    if times.ndim != 1 or times.shape != values.shape or times.shape[0] < 3:
        raise ValidationError("need matching 1-d sample arrays of length >= 3")
    if abs(times[0]) > 1e-12 or abs(times[-1] - t) > 1e-9:
        raise ConfigurationError("samples must cover exactly [0, t]")
    steps = np.diff(times)
    h = float(steps[0])
    if not np.allclose(steps, h, rtol=1e-8, atol=0.0):
        raise ConfigurationError("sample grid must be uniform")
    if abs(h) > (2.0 * math.pi / omega) / 20.0:
        raise ConfigurationError(
            "sample grid coarser than a twentieth of the oscillation period"
        )
    kernel = np.exp(1j * omega * (t - times)) * values

    def trap(vals, step):
        return step * (np.sum(vals) - 0.5 * (vals[0] + vals[-1]))

    fine = trap(kernel, h)
    if (times.shape[0] - 1) % 2 == 0:
        coarse = trap(kernel[::2], 2.0 * h)
        est = abs(fine - coarse)
    else:
        est = abs(h) ** 2 * omega * float(np.max(np.abs(values)))
    return QuadratureResult(value=complex(fine), error_estimate=float(est),
                            panels=times.shape[0] - 1)


# ---------------------------------------------------------------------------
# Boundary-sum expansions
# ---------------------------------------------------------------------------

def osc_expansion(inp: ExpansionInput, n: int) -> complex:
    """Boundary sums of the integration-by-parts expansion through order ``n``.

    Returns (i/w) sum_{j<=n} (-i/w)^j f^(j)(t)
          - (i e^{iwt}/w) sum_{j<=n} (-i/w)^j f^(j)(0),
    i.e. the expansion with the remainder integral dropped.  Exact for
    polynomial integrands of degree <= n.
    """
    if n < 0:
        raise ValidationError("expansion order n must be >= 0")
    if len(inp.derivs_at_t) < n + 1 or len(inp.derivs_at_0) < n + 1:
        raise ValidationError(
            f"order-{n} expansion needs {n + 1} derivatives at both endpoints"
        )
    w = inp.omega
    coef = -1j / w
    sum_t = sum((coef ** j) * inp.derivs_at_t[j] for j in range(n + 1))
    sum_0 = sum((coef ** j) * inp.derivs_at_0[j] for j in range(n + 1))
    return (1j / w) * sum_t - (1j * cmath.exp(1j * w * inp.t) / w) * sum_0


def parity_factor(j: int, omega: float, t: float) -> float:
    """Closed form of Im(i e^{i omega t} (-i)^j).

    Even j give (-1)^(j/2) cos(omega t); odd j give (-1)^((j-1)/2)
    sin(omega t).  This is what turns the complex boundary sums into the
    real cos/sin form below.
    """
    if j % 2 == 0:
        return (-1.0) ** (j // 2) * math.cos(omega * t)
    return (-1.0) ** ((j - 1) // 2) * math.sin(omega * t)


def i_mu_expansion(inp: ExpansionInput, m: int) -> float:
    """Real sine-projected expansion of the resonator convolution, half-order m.

    Evaluates the truncation (remainder dropped) of

        -(1/w) Im integral_0^t e^{i w (t-s)} Q(s) ds

    for real Q through the first m even-derivative rounds:

        -(1/w^2) sum_{k<m} (-1)^k w^{-2k} Q^(2k)(t)
        +(1/w^2) [sum_{k<m} (-1)^k w^{-2k} Q^(2k)(0)] cos(w t)
        +(1/w^3) [sum_{k<m} (-1)^k w^{-2k} Q^(2k+1)(0)] sin(w t)

    With m = 0 every sum is empty and the value is 0.
    """
    if m < 0:
        raise ValidationError("half-order m must be >= 0")
    if m > 0:
        if len(inp.derivs_at_t) < 2 * m - 1 or len(inp.derivs_at_0) < 2 * m:
            raise ValidationError(
                f"half-order {m} needs derivatives through order {2 * m - 2} "
                f"at t and {2 * m - 1} at 0"
            )
    for vals in (inp.derivs_at_t, inp.derivs_at_0):
        if any(isinstance(v, complex) and abs(v.imag) > 0 for v in vals):
            raise ValidationError("sine-projected expansion requires real data")
    w = inp.omega
    t = inp.t
    sum_t = sum(
        (-1.0) ** k * w ** (-2 * k) * inp.derivs_at_t[2 * k] for k in range(m)
    )
    sum_cos = sum(
        (-1.0) ** k * w ** (-2 * k) * inp.derivs_at_0[2 * k] for k in range(m)
    )
    sum_sin = sum(
        (-1.0) ** k * w ** (-2 * k) * inp.derivs_at_0[2 * k + 1] for k in range(m)
    )
    return (
        -sum_t / w ** 2
        + (sum_cos / w ** 2) * math.cos(w * t)
        + (sum_sin / w ** 3) * math.sin(w * t)
    )


# ---------------------------------------------------------------------------
# Test integrands and remainder-order fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Integrand:
    """Smooth scalar integrand with analytic derivatives of every order."""

    name: str
    deriv: Callable

    def __call__(self, x):
        return self.deriv(0, x)

    def derivative_list(self, upto: int, x: float) -> Tuple[float, ...]:
        return tuple(float(self.deriv(j, x)) for j in range(upto + 1))


def sin_integrand() -> Integrand:
    return Integrand("sin", lambda j, x: np.sin(np.asarray(x) + j * math.pi / 2.0))


def exp_integrand() -> Integrand:
    return Integrand("exp", lambda j, x: np.exp(np.asarray(x)))


def polynomial_integrand(coeffs: Sequence[float]) -> Integrand:
    base = np.polynomial.Polynomial(list(coeffs))

    def deriv(j, x):
        return base.deriv(j)(np.asarray(x)) if j > 0 else base(np.asarray(x))

    return Integrand("poly", deriv)


INTEGRANDS = {"sin": sin_integrand, "exp": exp_integrand}


def expansion_error(f: Integrand, n: int, omega: float, t: float) -> float:
    """|quadrature - boundary sums through order n-1| at one frequency.

    For n = 0 the comparison value is 0 (empty sums), so the error is the
    magnitude of the integral itself.
    """
    exact = osc_integral_exact(f, omega, t).value
    if n == 0:
        approx = 0.0 + 0.0j
    else:
        inp = ExpansionInput(
            derivs_at_t=f.derivative_list(n - 1, t),
            derivs_at_0=f.derivative_list(n - 1, 0.0),
            omega=omega,
            t=t,
        )
        approx = osc_expansion(inp, n - 1)
    return abs(exact - approx)


def error_order_fit(
    f: Integrand,
    n: int,
    omega_grid: Sequence[float],
    t: float = 1.0,
    closure_tol: float = 1e-12,
) -> ExpansionOrderFit:
    """Fit the decay order of the expansion remainder over a frequency sweep.

    The expected log-log slope is -(n+1): after dropping the boundary terms
    of order n and beyond, those terms dominate the remainder.  When the
    expansion closes exactly (polynomial integrands of low degree) the
    remainder sits at rounding level and the fit is skipped with a note.
    """
    omegas = sorted(float(w) for w in omega_grid)
    if len(omegas) < 4:
        raise ValidationError("need at least 4 frequencies")
    if len(set(omegas)) < 2:
        raise FitError("need at least 2 distinct frequencies")
    if any(w <= 0 for w in omegas):
        raise ValidationError("frequencies must be > 0")
    if omegas[-1] / omegas[0] < 8.0 - 1e-9:
        raise ValidationError("frequency grid must span at least a factor of 8")
    if n < 0:
        raise ValidationError("order n must be >= 0")

    errors = [expansion_error(f, n, w, t) for w in omegas]
    scale = max(abs(osc_integral_exact(f, w, t).value) for w in omegas)
    if max(errors) <= closure_tol * max(1.0, scale):
        return ExpansionOrderFit(
            order=n,
            omegas=omegas,
            errors=errors,
            slope=None,
            r2=None,
            closed=True,
            note="exact closure: remainder at rounding level, fit skipped",
        )
    slope, r2 = fit_loglog_slope(omegas, errors)
    return ExpansionOrderFit(
        order=n, omegas=omegas, errors=errors, slope=slope, r2=r2
    )
