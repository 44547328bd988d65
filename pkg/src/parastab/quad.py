"""Improper integrals of positive functions on ``[m, inf)``.

Integration runs in the logarithmic variable ``u = log(z)``.  Up to
``z = ZETA_MAX`` the integral is cached at integer ``u`` anchors; the range
``[ZETA_MAX, e**U_FAR]`` is one adaptive pass, and beyond ``U_FAR`` a fitted
``C exp(-k u) u**(-g)`` model supplies the remainder.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

ZETA_MAX = 1e12
U_FAR = 600.0

_EPSREL = 1e-12


def _log_integrand(F: Callable[[float], float]) -> Callable[[float], float]:
    def G(u: float) -> float:
        z = math.exp(u)
        with np.errstate(all="ignore"):
            v = float(F(z)) * z
        if math.isnan(v):
            return 0.0
        return v

    return G


def _quad(G, a: float, b: float, limit: int = 200) -> float:
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(G, a, b, epsabs=0.0, epsrel=_EPSREL, limit=limit)
    return val


def model_tail(G: Callable[[float], float], u0: float) -> float:
    """Integral of a model fitted to ``G`` beyond ``u0``.

    Exponentially decaying tails use ``C exp(-k u) u**(-g)``; tails with no
    exponential decay (log-critical integrands) use ``C (u - d)**(-g)``.
    """
    us = np.array([u0 - 200.0, u0 - 100.0, u0])
    vals = np.array([G(u) for u in us])
    if not np.all(vals > 0):
        return 0.0
    lv = np.log(vals)
    A = np.column_stack([np.ones(3), -us, -np.log(us)])
    c, kappa, gamma = np.linalg.solve(A, lv)
    if kappa > 1e-4:
        def model(u):
            return math.exp(c - kappa * u - gamma * math.log(u))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(model, u0, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
        return val
    if kappa < -1e-4:
        return math.inf
    # pure algebraic decay in u
    ratio = (lv[0] - lv[1]) / (lv[1] - lv[2])

    def mismatch(d):
        return (math.log(us[1] - d) - math.log(us[0] - d)) / (math.log(us[2] - d) - math.log(us[1] - d)) - ratio

    lo, hi = -10 * u0, us[0] - 1.0
    if mismatch(lo) * mismatch(hi) < 0:
        d = brentq(mismatch, lo, hi, xtol=1e-12)
    else:
        d = 0.0
    gamma = (lv[1] - lv[2]) / (math.log(us[2] - d) - math.log(us[1] - d))
    if gamma <= 1:
        return math.inf
    return float(vals[2] * (u0 - d) / (gamma - 1.0))


class TailIntegral:
    """Callable ``m -> integral of F over [m, inf)`` with cached anchors."""

    def __init__(self, F: Callable[[float], float], zeta_max: float = ZETA_MAX):
        self.F = F
        self.G = _log_integrand(F)
        self.u_max = math.ceil(math.log(zeta_max))
        self._anchors: dict[int, float] = {}

    def _top(self) -> float:
        if self.u_max not in self._anchors:
            far = _quad(self.G, self.u_max, U_FAR, limit=500)
            self._anchors[self.u_max] = far + model_tail(self.G, U_FAR)
        return self._anchors[self.u_max]

    def anchor(self, j: int) -> float:
        if j >= self.u_max:
            return self._top()
        if j in self._anchors:
            return self._anchors[j]
        k = j + 1
        while k < self.u_max and k not in self._anchors:
            k += 1
        acc = self.anchor(k)
        for i in range(k - 1, j - 1, -1):
            acc = acc + _quad(self.G, i, i + 1)
            self._anchors[i] = acc
        return acc

    def __call__(self, m: float) -> float:
        if not m > 0:
            raise ValueError("lower limit must be positive")
        u = math.log(m)
        if u >= self.u_max:
            return float(_quad(self.G, u, U_FAR, limit=500) + model_tail(self.G, U_FAR))
        j = math.ceil(u)
        return float(self.anchor(j) + _quad(self.G, u, j))


def segment_integral(F: Callable[[float], float], a: float, b: float) -> float:
    """Integral of ``F`` over ``[a, b]`` (log variable; 0 when ``b <= a``)."""
    if not (a > 0 and b > a):
        return 0.0
    return _quad(_log_integrand(F), math.log(a), math.log(b), limit=200)
