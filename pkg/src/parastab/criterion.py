"""Sufficient conditions for stabilization to zero.

Three improper integrals decide the question:

* ``int_1^inf r q(r) dr`` must diverge,
* ``int_1^inf (g_theta(z) z)**(-1/2) dz`` must converge,
* ``int_1^inf dz / h_theta(z)`` must converge.

Each integral is classified either in closed form from the tail exponents
of a power-log function, or numerically by fitting the tail exponent and
refusing to decide inside a band around the critical value.  A failed
test never means "does not stabilize"; the report then says ``unknown``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Literal, NamedTuple

import numpy as np

from .funcs import (
    Compose,
    InverseOf,
    Power,
    ScalarFunction,
    ScaledBy,
    StructureTriple,
    radial_inf_q,
    radial_inf_q_array,
    radial_inf_q_fn,
    radial_power_log,
    theta_inf_array,
    theta_inf_fn,
)
from .quad import TailIntegral

Method = Literal["auto", "closed", "numeric"]

INCONCLUSIVE_BAND = 0.05
CRITICAL_Q = -2.0
CRITICAL_G = 1.0
CRITICAL_H = 1.0

# wide enough that log(z/theta) and log(z) are indistinguishable in the fit
_FIT_GRID = np.geomspace(1e10, 1e60, 40)


class Status(str, enum.Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


class Verdict(str, enum.Enum):
    STABILIZES = "stabilizes"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class IntegralVerdict:
    status: Status
    value: float | None = None
    diagnostic: str = ""

    def __post_init__(self):
        if (self.value is not None) != (self.status is Status.CONVERGENT):
            raise ValueError("value is present exactly for convergent integrals")
        if self.value is not None and not self.value >= 0:
            raise ValueError("integral value must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"status": self.status.value}
        if self.value is not None:
            d["value"] = self.value
        if self.diagnostic:
            d["diagnostic"] = self.diagnostic
        return d


@dataclass(frozen=True)
class StabilizationReport:
    q_integral: IntegralVerdict
    g_integral: IntegralVerdict
    h_integral: IntegralVerdict
    verdict: Verdict
    theta: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "q": self.q_integral.to_dict(),
            "g": self.g_integral.to_dict(),
            "h": self.h_integral.to_dict(),
            "verdict": self.verdict.value,
            "theta": self.theta,
        }


def _power_log_status(a: float, s: float, a_crit: float, s_crit: float, diverge_above: bool) -> Status:
    """Classify ``int^inf z**(...)`` given tail exponents of the relevant function.

    ``diverge_above``: the integral diverges when (a, s) is lexicographically
    at or above the critical pair (q case) rather than converges above it.
    """
    if a != a_crit:
        above = a > a_crit
    elif diverge_above:
        above = s >= s_crit
    else:
        above = s > s_crit
    if diverge_above:
        return Status.DIVERGENT if above else Status.CONVERGENT
    return Status.CONVERGENT if above else Status.DIVERGENT


def fit_tail_exponents(values_at: Any, grid: np.ndarray = _FIT_GRID) -> tuple[float, float]:
    """Least-squares fit of ``log f = c + a log z + s log log z`` on a far grid."""
    with np.errstate(all="ignore"):
        y = np.log(np.asarray(values_at(grid), dtype=float))
    ok = np.isfinite(y)
    if ok.sum() < 5:
        return math.nan, math.nan
    lz = np.log(grid[ok])
    A = np.column_stack([np.ones_like(lz), lz, np.log(lz)])
    coef, *_ = np.linalg.lstsq(A, y[ok], rcond=None)
    return float(coef[1]), float(coef[2])


def _numeric_status(a_fit: float, a_crit: float, converge_above: bool) -> Status:
    if not math.isfinite(a_fit) or abs(a_fit - a_crit) < INCONCLUSIVE_BAND:
        return Status.INCONCLUSIVE
    above = a_fit > a_crit
    return Status.CONVERGENT if above == converge_above else Status.DIVERGENT


def _with_value(status: Status, F, diag: str) -> IntegralVerdict:
    if status is not Status.CONVERGENT:
        return IntegralVerdict(status, None, diag)
    value = TailIntegral(F)(1.0)
    if not math.isfinite(value):
        return IntegralVerdict(Status.INCONCLUSIVE, None, diag + "; quadrature tail did not settle")
    return IntegralVerdict(status, value, diag)


def _q_tail(p: ScalarFunction) -> tuple[float, float] | None:
    t = p.tail()
    if t is None:
        return None
    # q is eventually constant unless p decays
    return t if (t[0] < 0 or (t[0] == 0 and t[1] < 0)) else (0.0, 0.0)


def classify_q_integral(p_radial: ScalarFunction, method: Method = "auto") -> IntegralVerdict:
    """Classify ``int_1^inf r q(r) dr``; divergence is what the criterion needs."""
    tail = _q_tail(p_radial) if method != "numeric" else None
    if method == "closed" and tail is None:
        raise ValueError("no closed-form tail for this weight")
    if tail is not None:
        a, s = tail
        status = _power_log_status(a, s, CRITICAL_Q, -1.0, diverge_above=True)
        diag = f"closed form: q ~ r^{a:g} log^{s:g} r"
    else:
        a, s = fit_tail_exponents(lambda r: radial_inf_q_array(p_radial, r))
        status = _numeric_status(a, CRITICAL_Q, converge_above=False)
        diag = f"tail fit: q ~ r^{a:.4f} log^{s:.3f} r"

    radial_inf_q(p_radial, 1.0)  # positivity check
    q = radial_inf_q_fn(p_radial)

    def F(r):
        return r * q(r)

    return _with_value(status, F, diag)


def _classify_zeta(f: ScalarFunction, theta: float, method: Method, name: str, integrand, s_crit: float) -> IntegralVerdict:
    if not theta > 1:
        raise ValueError("theta must exceed 1")
    tail = f.tail() if method != "numeric" else None
    if method == "closed" and tail is None:
        raise ValueError(f"no closed-form tail for {name}")
    if tail is not None:
        a, s = tail
        status = _power_log_status(a, s, 1.0, s_crit, diverge_above=False)
        diag = f"closed form: {name}_theta ~ z^{a:g} log^{s:g} z"
    else:
        a, s = fit_tail_exponents(lambda z: theta_inf_array(f, theta, z))
        status = _numeric_status(a, 1.0, converge_above=True)
        diag = f"tail fit: {name}_theta ~ z^{a:.4f} log^{s:.3f} z"
    f_theta = theta_inf_fn(f, theta)
    return _with_value(status, lambda z: integrand(f_theta(z), z), diag)


def classify_g_integral(g: ScalarFunction, theta: float, method: Method = "auto") -> IntegralVerdict:
    """Classify ``int_1^inf (g_theta(z) z)**(-1/2) dz``."""
    return _classify_zeta(g, theta, method, "g", lambda gv, z: (gv * z) ** -0.5, 2.0)


def classify_h_integral(h: ScalarFunction, theta: float, method: Method = "auto") -> IntegralVerdict:
    """Classify ``int_1^inf dz / h_theta(z)``."""
    return _classify_zeta(h, theta, method, "h", lambda hv, z: 1.0 / hv, 1.0)


def theorem21_verdict(triple: StructureTriple, method: Method = "auto") -> StabilizationReport:
    """Assemble the three classifications into a stabilization verdict."""
    q = classify_q_integral(triple.p_radial, method)
    g = classify_g_integral(triple.g, triple.theta, method)
    h = classify_h_integral(triple.h, triple.theta, method)
    ok = q.status is Status.DIVERGENT and g.status is Status.CONVERGENT and h.status is Status.CONVERGENT
    return StabilizationReport(q, g, h, Verdict.STABILIZES if ok else Verdict.UNKNOWN, triple.theta)


# -- worked example families -------------------------------------------------

class Example21Result(NamedTuple):
    passes: bool
    p_exponent: float


class Example22Result(NamedTuple):
    gamma: float
    passes: bool


class Example23Result(NamedTuple):
    threshold: float
    passes: bool


def _check_alpha(alpha: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def example21_check(alpha: float, mu: float, sigma: float, k: float, l: float) -> Example21Result:
    """Exponent test for ``u_t = Lap u + b - c |u|^(sigma-1) u`` with power bounds."""
    _check_alpha(alpha)
    spatial = min(l - k + alpha, l + 2) >= 0
    absorption = sigma > max(1.0, alpha + mu)
    return Example21Result(spatial and absorption, min((l - k) / alpha - 1, l))


def example21_triple(alpha: float, mu: float, sigma: float, k: float, l: float, theta: float = 2.0, p0: float = 1.0) -> StructureTriple:
    """Structure functions induced by the power-law bounds on ``b`` and ``c``."""
    res = example21_check(alpha, mu, sigma, k, l)
    return StructureTriple(
        Power(1.0, sigma),
        Power(1.0, (sigma - mu) / alpha),
        Power(p0, res.p_exponent, offset=1.0),
        theta,
    )


def example22_gamma(alpha: float, k: float, s: float, l: float, m: float) -> float:
    _check_alpha(alpha)
    left, right = l + 2, l - k + alpha
    if abs(min(left, right)) > 1e-12:
        raise ValueError(f"exponents are off the critical manifold: min(l-k+alpha, l+2) = {min(left, right)}")
    if left < right:
        return m
    if left == right:
        return min((m - s) / alpha, m)
    return (m - s) / alpha


def example22_check(alpha: float, k: float, s: float, l: float, m: float, sigma: float, mu: float) -> Example22Result:
    """Critical spatial exponents with logarithmic corrections."""
    gamma = example22_gamma(alpha, k, s, l, m)
    return Example22Result(gamma, gamma >= -1 and sigma > max(1.0, alpha + mu))


def example22_triple(alpha: float, k: float, s: float, l: float, m: float, sigma: float, mu: float, theta: float = 2.0) -> StructureTriple:
    gamma = example22_gamma(alpha, k, s, l, m)
    return StructureTriple(
        Power(1.0, sigma),
        Power(1.0, (sigma - mu) / alpha),
        radial_power_log(1.0, -2.0, gamma),
        theta,
    )


def example23_threshold(alpha: float, mu: float) -> float:
    _check_alpha(alpha)
    if alpha + mu < 1:
        return 2.0
    if alpha + mu == 1:
        return max(2.0, alpha)
    return alpha


def example23_check(alpha: float, mu: float, nu: float, k: float, l: float) -> Example23Result:
    """Critical absorption exponent ``sigma = max(1, alpha + mu)`` with a log factor."""
    threshold = example23_threshold(alpha, mu)
    return Example23Result(threshold, nu > threshold and min(l - k + alpha, l + 2) >= 0)


def example23_triple(alpha: float, mu: float, nu: float, k: float, l: float, theta: float = 2.0) -> StructureTriple:
    _check_alpha(alpha)
    from .funcs import PowerLog

    sigma = max(1.0, alpha + mu)
    return StructureTriple(
        PowerLog(1.0, sigma, nu, shift=1.0),
        PowerLog(1.0, (sigma - mu) / alpha, nu / alpha, shift=1.0),
        Power(1.0, min((l - k) / alpha - 1, l), offset=1.0),
        theta,
    )


def example24_triple(phi: ScalarFunction, psi: ScalarFunction, eps: float, theta: float = 2.0) -> StructureTriple:
    if not phi.strictly_increasing:
        raise ValueError("phi must be declared strictly increasing (invertible)")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return StructureTriple(
        psi,
        Compose(InverseOf(phi), ScaledBy(eps, psi)),
        Power(eps, 0.0),
        theta,
    )


def example24_check(phi: ScalarFunction, psi: ScalarFunction, eps: float, theta: float, method: Method = "auto") -> StabilizationReport:
    """Gradient bound ``phi(|Du|)`` against absorption ``psi(|u|)``."""
    return theorem21_verdict(example24_triple(phi, psi, eps, theta), method)
