"""Explicit decay envelopes from the dyadic barrier argument.

For a probe radius ``r`` and time ``t`` let ``k`` be the largest integer with
``4**k r**2 < t``.  The supremum ``m`` of ``u_+`` over the probe cylinder
satisfies ``G(m) >= budget(t)``, where

    G(m)      = (int_m^inf (g_theta z)^(-1/2) dz)**2 + int_m^inf dz / h_theta
    budget(t) = C int_r^(2**k r) rho q(4 rho) d rho.

``G`` is strictly decreasing, so inverting it against the budget gives an
upper bound on ``m`` that tends to zero as ``t`` grows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad

from .criterion import Status, classify_g_integral, classify_h_integral
from .funcs import ScalarFunction, radial_inf_q, radial_inf_q_fn, theta_inf_fn
from .quad import TailIntegral, segment_integral

M_FLOOR = 1e-30


class DivergentTailError(ValueError):
    """A tail integral in G diverges; the envelope is undefined."""


@dataclass(frozen=True)
class EnvelopeParams:
    theta: float = 2.0
    C: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError("theta must exceed 1")
        if not self.C > 0:
            raise ValueError("calibration constant C must be positive")
        if not self.r > 0:
            raise ValueError("probe radius must be positive")


class GTransform:
    """``m -> G(m)`` for fixed ``(g, h, theta)``; tail integrals are cached."""

    def __init__(self, g: ScalarFunction, h: ScalarFunction, theta: float):
        gv = classify_g_integral(g, theta)
        hv = classify_h_integral(h, theta)
        for name, v in (("g", gv), ("h", hv)):
            if v.status is not Status.CONVERGENT:
                raise DivergentTailError(f"{name}-tail integral is {v.status.value} ({v.diagnostic})")
        g_theta = theta_inf_fn(g, theta)
        h_theta = theta_inf_fn(h, theta)
        self.theta = theta
        self.g_tail = TailIntegral(lambda z: 1.0 / math.sqrt(g_theta(z)) / math.sqrt(z))
        self.h_tail = TailIntegral(lambda z: 1.0 / h_theta(z))

    def __call__(self, m: float) -> float:
        a = self.g_tail(m)
        return a * a + self.h_tail(m)

    def supremum(self) -> float:
        """Proxy for ``lim_{m -> 0+} G(m)``."""
        return self(M_FLOOR)


def g_transform(g: ScalarFunction, h: ScalarFunction, theta: float, m: float) -> float:
    return GTransform(g, h, theta)(m)


def dyadic_index(r: float, t: float) -> int:
    """Largest ``k >= 0`` with ``4**k r**2 < t`` (0 if there is none)."""
    if not (r > 0 and t > 0):
        raise ValueError("r and t must be positive")
    ratio = t / (r * r)
    if ratio <= 4:
        return 0
    k = max(0, int(math.floor(math.log(ratio, 4))) - 1)
    while 4.0 ** (k + 1) < ratio:
        k += 1
    while k > 0 and not 4.0**k < ratio:
        k -= 1
    return k


def dyadic_budget(p_radial: ScalarFunction, params: EnvelopeParams, t: float) -> float:
    """``C * int_r^(2**k r) rho q(4 rho) d rho``, integrated dyadic piece by piece."""
    k = dyadic_index(params.r, t)
    if k == 0:
        return 0.0
    radial_inf_q(p_radial, 4 * params.r)
    q = radial_inf_q_fn(p_radial)
    total = 0.0
    for i in range(k):
        a, b = params.r * 2**i, params.r * 2 ** (i + 1)
        val, _ = quad(lambda rho: rho * q(4 * rho), a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    return params.C * total


@dataclass(frozen=True)
class DecayBound:
    """Outcome of inverting ``G`` against the budget.

    ``status`` is ``"ok"``, ``"no_information"`` (zero budget, bound is
    ``inf``) or ``"collapsed"`` (budget exceeds ``G(0+)``, bound is 0).
    """

    bound: float
    status: str
    k: int
    budget: float

    @property
    def degenerate(self) -> bool:
        return self.status != "ok"


def invert_g(G: GTransform, budget: float, rtol: float = 1e-15) -> float:
    """Unique ``M`` with ``G(M) = budget`` by bisection in ``log M``."""
    lo = hi = 1.0
    g1 = G(1.0)
    if g1 >= budget:
        while G(hi) >= budget:
            lo = hi
            hi *= 10.0
            if hi > 1e300:
                raise ArithmeticError("G does not fall below the budget")
    else:
        while G(lo) < budget:
            hi = lo
            lo /= 10.0
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(300):
        mid = 0.5 * (llo + lhi)
        if G(math.exp(mid)) >= budget:
            llo = mid
        else:
            lhi = mid
        if lhi - llo < rtol:
            break
    return math.exp(0.5 * (llo + lhi))


def decay_bound(
    g: ScalarFunction,
    h: ScalarFunction,
    p_radial: ScalarFunction,
    params: EnvelopeParams,
    t: float,
    transform: GTransform | None = None,
) -> DecayBound:
    """Upper bound for ``sup u_+`` on the probe cylinder ending at ``t``."""
    G = transform if transform is not None else GTransform(g, h, params.theta)
    k = dyadic_index(params.r, t)
    budget = dyadic_budget(p_radial, params, t)
    if budget == 0.0:
        return DecayBound(math.inf, "no_information", k, budget)
    if budget > G.supremum():
        return DecayBound(0.0, "collapsed", k, budget)
    return DecayBound(invert_g(G, budget), "ok", k, budget)


def envelope_curve(
    g: ScalarFunction,
    h: ScalarFunction,
    p_radial: ScalarFunction,
    params: EnvelopeParams,
    times: Iterable[float],
    transform: GTransform | None = None,
) -> list[tuple[float, int, float, float]]:
    """Rows ``(t, k, budget, bound)`` sharing one cached ``G``."""
    G = transform if transform is not None else GTransform(g, h, params.theta)
    rows = []
    for t in times:
        res = decay_bound(g, h, p_radial, params, t, transform=G)
        rows.append((float(t), res.k, res.budget, res.bound))
    return rows


def write_envelope_csv(path, rows: Sequence[tuple[float, int, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "k", "budget", "bound"])
        for t, k, budget, bound in rows:
            w.writerow([f"{t:.17g}", k, f"{budget:.17g}", "inf" if math.isinf(bound) else f"{bound:.17g}"])


# -- per-step diagnostics -------------------------------------------------------

@dataclass(frozen=True)
class DyadicLadder:
    """Suprema ``m_i`` of ``u`` over nested cylinders of radius ``r * 2**i``."""

    radii: tuple[float, ...]
    sup_values: tuple[float, ...]
    time: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        m = np.asarray(self.sup_values, dtype=float)
        if r.size == 0 or r.shape != m.shape:
            raise ValueError("radii and sup_values must be non-empty and of equal length")
        if not np.allclose(r[1:] / r[:-1], 2.0, rtol=1e-12, atol=0):
            raise ValueError("radii must double at every step")
        k = r.size - 1
        if not (4.0**k * r[0] ** 2 < self.time <= 4.0 ** (k + 1) * r[0] ** 2):
            raise ValueError(f"time {self.time} inconsistent with {k + 1} dyadic radii")
        if np.any(np.diff(m) < 0):
            raise ValueError("sup_values must be non-decreasing")
        object.__setattr__(self, "radii", tuple(float(v) for v in r))
        object.__setattr__(self, "sup_values", tuple(float(v) for v in m))


def ladder_from_history(
    times: Sequence[float],
    r_nodes: Sequence[float],
    history: np.ndarray,
    r: float,
    t: float,
) -> DyadicLadder:
    """Cylinder suprema of ``u`` from a stored space-time history.

    ``history[j, i]`` is ``u(r_nodes[i], times[j])``; only samples with time in
    ``[t - r_i**2, t]`` and radius ``<= r_i`` enter ``m_i``.
    """
    times = np.asarray(times, dtype=float)
    rn = np.asarray(r_nodes, dtype=float)
    U = np.asarray(history, dtype=float)
    k = dyadic_index(r, t)
    if not t > r * r:
        raise ValueError("need t > r**2")
    radii, sups = [], []
    for i in range(k + 1):
        ri = r * 2**i
        tm = (times >= t - ri * ri - 1e-12) & (times <= t + 1e-12)
        sm = rn <= ri + 1e-12
        if not tm.any() or not sm.any():
            raise ValueError(f"history does not cover the cylinder of radius {ri}")
        radii.append(ri)
        sups.append(float(U[np.ix_(tm, sm)].max()))
    return DyadicLadder(tuple(radii), tuple(sups), t)


@dataclass(frozen=True)
class Estimate:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return math.inf if self.lhs > 0 else 0.0
        return self.lhs / self.rhs

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs


@dataclass(frozen=True)
class StepReport:
    index: int
    r_lo: float
    r_hi: float
    m_lo: float
    m_hi: float
    regime: str
    estimates: dict[str, Estimate] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def applicable(self) -> tuple[str, ...]:
        if self.regime == "growth":
            return ("g_sqrt", "h_linear")
        if self.regime == "slow":
            return ("g_inverse", "h_inverse")
        return ()

    @property
    def satisfied(self) -> tuple[str, ...]:
        return tuple(n for n in self.applicable if self.estimates[n].holds)


def dyadic_diagnostics(
    ladder: DyadicLadder,
    g: ScalarFunction,
    h: ScalarFunction,
    p_radial: ScalarFunction,
    theta: float,
    C: float = 1.0,
) -> list[StepReport]:
    """Left and right sides of the per-step barrier estimates.

    In the growth regime ``m_{i+1} >= sqrt(theta) m_i`` the candidates are

    * ``g_sqrt``:   int (g_theta z)^(-1/2) dz  >=  C int q(2 rho)^(1/2) d rho
    * ``h_linear``: int dz / h_theta           >=  C int rho q(2 rho) d rho

    and otherwise

    * ``g_inverse``: int dz / g_sqrt(theta)    >=  C int rho q(2 rho) d rho
    * ``h_inverse``: int dz / h_sqrt(theta)    >=  C int rho q(2 rho) d rho

    with ``z`` running over ``[m_i, m_{i+1}]`` and ``rho`` over
    ``[r_i, 2 r_i]``.  All four are computed for every step so that the
    constant ``C`` can be fitted from data.
    """
    g_t = theta_inf_fn(g, theta)
    h_t = theta_inf_fn(h, theta)
    g_s = theta_inf_fn(g, math.sqrt(theta))
    h_s = theta_inf_fn(h, math.sqrt(theta))
    q = radial_inf_q_fn(p_radial)
    reports = []
    radii, ms = ladder.radii, ladder.sup_values
    for i in range(len(radii) - 1):
        r_lo, r_hi = radii[i], radii[i + 1]
        m_lo, m_hi = ms[i], ms[i + 1]
        if not m_lo > 0:
            reports.append(StepReport(i, r_lo, r_hi, m_lo, m_hi, "skipped", {}, ("nonpositive supremum",)))
            continue
        regime = "growth" if m_hi >= math.sqrt(theta) * m_lo else "slow"
        rhs_sqrt = C * quad(lambda rho: math.sqrt(q(2 * rho)), r_lo, r_hi, epsrel=1e-10)[0]
        rhs_lin = C * quad(lambda rho: rho * q(2 * rho), r_lo, r_hi, epsrel=1e-10)[0]
        est = {
            "g_sqrt": Estimate(segment_integral(lambda z: (g_t(z) * z) ** -0.5, m_lo, m_hi), rhs_sqrt),
            "h_linear": Estimate(segment_integral(lambda z: 1.0 / h_t(z), m_lo, m_hi), rhs_lin),
            "g_inverse": Estimate(segment_integral(lambda z: 1.0 / g_s(z), m_lo, m_hi), rhs_lin),
            "h_inverse": Estimate(segment_integral(lambda z: 1.0 / h_s(z), m_lo, m_hi), rhs_lin),
        }
        flags = ("flat",) if m_hi == m_lo else ()
        reports.append(StepReport(i, r_lo, r_hi, m_lo, m_hi, regime, est, flags))
    return reports


def fit_calibration(reports: Sequence[StepReport]) -> float:
    """Largest ``C`` for which every step satisfies one applicable estimate.

    Each estimate scales linearly in ``C``, so a step allows any ``C`` up to
    ``max(lhs / rhs_at_C1)`` over its applicable estimates.
    """
    allowed = []
    for rep in reports:
        if not rep.applicable:
            continue
        allowed.append(max(rep.estimates[n].ratio for n in rep.applicable))
    return min(allowed) if allowed else math.inf
