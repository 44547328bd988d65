"""One-dimensional structure functions and their infima.

Every function here belongs to a closed family so that tail behaviour can
be read off from exponents.  Families evaluate vectorised through
``f(z)``; the checked scalar entry point is :func:`eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ScalarFunction",
    "Power",
    "PowerLog",
    "TabulatedMonotone",
    "InverseOf",
    "Compose",
    "ScaledBy",
    "MinOf",
    "Polynomial",
    "StructureTriple",
    "DomainError",
    "eval",
    "theta_inf",
    "radial_inf_q",
    "radial_power_log",
    "from_dict",
]

INCREASING = 1
DECREASING = -1
UNKNOWN = 0

_INVERSE_RTOL = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    """Argument outside the domain (or range) of a structure function."""


@dataclass(frozen=True)
class ScalarFunction:
    """Base class: positive function of one positive variable."""

    def __call__(self, z):
        with np.errstate(all="ignore"):
            return self._values(np.asarray(z, dtype=float))

    def _values(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def monotone(self) -> int:
        """+1 non-decreasing, -1 non-increasing, 0 unknown."""
        return UNKNOWN

    @property
    def strictly_increasing(self) -> bool:
        return False

    def tail(self) -> tuple[float, float] | None:
        """Exponents ``(a, s)`` with ``f ~ C z**a log(z)**s`` as ``z -> inf``."""
        return None

    def at_zero(self) -> float:
        """Limit of ``f(z)`` as ``z -> 0+`` (may be 0 or inf)."""
        return float(self(0.0))

    def critical_points(self) -> tuple[float, ...] | None:
        """Interior local extrema on (0, inf), if the family knows them."""
        return None

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


def _lex_less(x: tuple[float, float], y: tuple[float, float]) -> bool:
    return x[0] < y[0] or (x[0] == y[0] and x[1] < y[1])


@dataclass(frozen=True)
class Power(ScalarFunction):
    """``c0 * (offset + z)**a``."""

    c0: float
    a: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    def _values(self, z):
        return self.c0 * np.power(self.offset + z, self.a)

    @property
    def monotone(self):
        return DECREASING if self.a < 0 else INCREASING

    @property
    def strictly_increasing(self):
        return self.a > 0

    def tail(self):
        return (float(self.a), 0.0)

    def at_zero(self):
        if self.offset > 0 or self.a == 0:
            return self.c0 * self.offset**self.a if self.offset > 0 else self.c0
        return 0.0 if self.a > 0 else math.inf

    def to_dict(self):
        d = {"family": "power", "c0": self.c0, "a": self.a}
        if self.offset:
            d["offset"] = self.offset
        return d


@dataclass(frozen=True)
class PowerLog(ScalarFunction):
    """``c0 * (offset + z)**a * log(shift + z)**s`` with ``shift >= 1``."""

    c0: float
    a: float
    s: float = 0.0
    shift: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.shift < 1:
            raise ValueError("shift must be >= 1 so the log factor stays positive")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    def _values(self, z):
        return (
            self.c0
            * np.power(self.offset + z, self.a)
            * np.power(np.log(self.shift + z), self.s)
        )

    @property
    def monotone(self):
        if self.a >= 0 and self.s >= 0:
            return INCREASING
        if self.a <= 0 and self.s <= 0:
            return DECREASING
        return UNKNOWN

    @property
    def strictly_increasing(self):
        return self.monotone == INCREASING and (self.a > 0 or self.s > 0)

    def tail(self):
        return (float(self.a), float(self.s))

    def at_zero(self):
        e = (self.a if self.offset == 0 else 0.0) + (self.s if self.shift == 1 else 0.0)
        if e > 0:
            return 0.0
        if e < 0:
            return math.inf
        const = self.offset**self.a if self.offset > 0 else 1.0
        if self.shift > 1:
            const *= math.log(self.shift) ** self.s
        return self.c0 * const

    def _dlog(self, z):
        # sign of d log f / dz, scaled by the positive (offset+z)(shift+z)log(shift+z)
        L = np.log(self.shift + z)
        return self.a * (self.shift + z) * L + self.s * (self.offset + z)

    @cached_property
    def _crit(self) -> tuple[float, ...]:
        if self.monotone != UNKNOWN:
            return ()
        grid = np.logspace(-15, 30, 4501)
        with np.errstate(all="ignore"):
            d = self._dlog(grid)
        roots = []
        for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
            roots.append(brentq(lambda x: float(self._dlog(x)), grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15))
        return tuple(roots)

    def critical_points(self):
        return self._crit

    def to_dict(self):
        d = {"family": "power_log", "c0": self.c0, "a": self.a, "s": self.s, "shift": self.shift}
        if self.offset:
            d["offset"] = self.offset
        return d


def radial_power_log(p0: float, l: float, m: float = 0.0) -> PowerLog:
    """Spatial weight ``p0 (1+r)**l log(2+r)**m``."""
    return PowerLog(p0, l, m, shift=2.0, offset=1.0)


@dataclass(frozen=True)
class TabulatedMonotone(ScalarFunction):
    """Log-log linear interpolation through positive nodes.

    Outside the nodes the first and last log-log slopes are frozen, which is
    also the tail model seen by the integral classifier.
    """

    nodes: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("need at least two nodes with matching values")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        if np.any(y <= 0):
            raise ValueError("ordinates must be positive")
        object.__setattr__(self, "nodes", tuple(float(v) for v in x))
        object.__setattr__(self, "values", tuple(float(v) for v in y))

    @cached_property
    def _log(self):
        lx = np.log(self.nodes)
        ly = np.log(self.values)
        return lx, ly, np.diff(ly) / np.diff(lx)

    def _values(self, z):
        lx, ly, slopes = self._log
        lz = np.log(z)
        out = np.interp(lz, lx, ly)
        out = np.where(lz < lx[0], ly[0] + slopes[0] * (lz - lx[0]), out)
        out = np.where(lz > lx[-1], ly[-1] + slopes[-1] * (lz - lx[-1]), out)
        return np.exp(out)

    @property
    def monotone(self):
        dy = np.diff(self.values)
        if np.all(dy >= 0):
            return INCREASING
        if np.all(dy <= 0):
            return DECREASING
        return UNKNOWN

    @property
    def strictly_increasing(self):
        return bool(np.all(np.diff(self.values) > 0))

    def at_zero(self):
        s0 = self._log[2][0]
        if s0 > 0:
            return 0.0
        if s0 < 0:
            return math.inf
        return self.values[0]

    def to_dict(self):
        return {"family": "tabulated", "nodes": list(self.nodes), "values": list(self.values)}


@dataclass(frozen=True)
class InverseOf(ScalarFunction):
    """Inverse of a strictly increasing bijection of ``[0, inf)``."""

    base: ScalarFunction

    def __post_init__(self):
        if not self.base.strictly_increasing:
            raise ValueError("InverseOf requires a base declared strictly increasing")

    def _values(self, z):
        b = self.base
        if isinstance(b, Power) and b.offset == 0:
            return np.power(z / b.c0, 1.0 / b.a)
        return _vector_inverse(b, z)

    @property
    def monotone(self):
        return INCREASING

    @property
    def strictly_increasing(self):
        return True

    def tail(self):
        t = self.base.tail()
        if t is None or t[0] <= 0:
            return None
        return (1.0 / t[0], -t[1] / t[0])

    def at_zero(self):
        if self.base.at_zero() == 0:
            return 0.0
        raise DomainError("0 is outside the range of the base function")

    def to_dict(self):
        return {"family": "inverse_of", "base": self.base.to_dict()}


def _vector_inverse(base: ScalarFunction, target: np.ndarray) -> np.ndarray:
    """Monotone bisection in log space, elementwise."""
    y = np.atleast_1d(np.asarray(target, dtype=float))
    out = np.full(y.shape, np.nan)
    zero = y == 0
    out[zero] = 0.0
    work = ~zero & np.isfinite(y) & (y > 0)
    if not np.any(work):
        return out.reshape(np.shape(target))
    yt = y[work]
    lo = np.zeros_like(yt)
    hi = np.zeros_like(yt)
    # bracket in log10 space
    for i in range(yt.size):
        a, b = -1.0, 1.0
        while base(10.0**a) > yt[i]:
            a -= 8.0
            if a < -300:
                raise DomainError(f"target {yt[i]} below the range of the base function")
        while base(10.0**b) < yt[i]:
            b += 8.0
            if b > 300:
                raise DomainError(f"target {yt[i]} above the range of the base function")
        lo[i], hi[i] = a * math.log(10), b * math.log(10)
    while True:
        mid = 0.5 * (lo + hi)
        above = base(np.exp(mid)) > yt
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo < _INVERSE_RTOL * 0.1):
            break
    out[work] = np.exp(0.5 * (lo + hi))
    return out.reshape(np.shape(target))


@dataclass(frozen=True)
class Compose(ScalarFunction):
    """``outer(inner(z))``."""

    outer: ScalarFunction
    inner: ScalarFunction

    def _values(self, z):
        return self.outer(self.inner(z))

    @property
    def monotone(self):
        return self.outer.monotone * self.inner.monotone

    @property
    def strictly_increasing(self):
        return self.outer.strictly_increasing and self.inner.strictly_increasing

    def tail(self):
        ti, to = self.inner.tail(), self.outer.tail()
        if ti is None or to is None:
            return None
        a, s = ti
        A, S = to
        if a > 0:
            return (A * a, A * s + S)
        if a == 0 and s == 0:
            return (0.0, 0.0)
        if a == 0 and s > 0 and S == 0:
            return (0.0, A * s)
        return None

    def at_zero(self):
        return float(self.outer(self.inner.at_zero()))

    def to_dict(self):
        return {"family": "compose", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class ScaledBy(ScalarFunction):
    """``eps * base(z)``."""

    eps: float
    base: ScalarFunction

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("scale factor must be positive")

    def _values(self, z):
        return self.eps * self.base(z)

    @property
    def monotone(self):
        return self.base.monotone

    @property
    def strictly_increasing(self):
        return self.base.strictly_increasing

    def tail(self):
        return self.base.tail()

    def at_zero(self):
        return self.eps * self.base.at_zero()

    def critical_points(self):
        return self.base.critical_points()

    def to_dict(self):
        return {"family": "scaled_by", "eps": self.eps, "base": self.base.to_dict()}


@dataclass(frozen=True)
class MinOf(ScalarFunction):
    """Pointwise minimum."""

    parts: tuple[ScalarFunction, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("MinOf needs at least one function")
        object.__setattr__(self, "parts", tuple(self.parts))

    def _values(self, z):
        return np.minimum.reduce([f(z) for f in self.parts])

    @property
    def monotone(self):
        signs = {f.monotone for f in self.parts}
        return signs.pop() if len(signs) == 1 else UNKNOWN

    @property
    def strictly_increasing(self):
        return all(f.strictly_increasing for f in self.parts)

    def tail(self):
        tails = [f.tail() for f in self.parts]
        if any(t is None for t in tails):
            return None
        best = tails[0]
        for t in tails[1:]:
            if _lex_less(t, best):
                best = t
        return best

    def at_zero(self):
        return min(f.at_zero() for f in self.parts)

    def to_dict(self):
        return {"family": "min_of", "parts": [f.to_dict() for f in self.parts]}


@dataclass(frozen=True)
class Polynomial(ScalarFunction):
    """``sum(coeffs[i] * z**i)``; positivity on the domain is the caller's job."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if not c or c[-1] <= 0:
            raise ValueError("leading coefficient must be positive")
        object.__setattr__(self, "coeffs", c)

    def _values(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    @property
    def monotone(self):
        if len(self.coeffs) == 1:
            return INCREASING
        if all(c >= 0 for c in self.coeffs[1:]):
            return INCREASING
        return UNKNOWN

    @property
    def strictly_increasing(self):
        return len(self.coeffs) > 1 and all(c >= 0 for c in self.coeffs[1:])

    def tail(self):
        return (float(len(self.coeffs) - 1), 0.0)

    def at_zero(self):
        return self.coeffs[0]

    def to_dict(self):
        return {"family": "polynomial", "coeffs": list(self.coeffs)}


def from_dict(d: dict[str, Any]) -> ScalarFunction:
    """Build a function from its JSON description."""
    if not isinstance(d, dict) or "family" not in d:
        raise ValueError(f"function description needs a 'family' key: {d!r}")
    fam = d["family"]
    known = {
        "power": {"family", "c0", "a", "offset"},
        "power_log": {"family", "c0", "a", "s", "shift", "offset"},
        "tabulated": {"family", "nodes", "values"},
        "inverse_of": {"family", "base"},
        "compose": {"family", "outer", "inner"},
        "scaled_by": {"family", "eps", "base"},
        "min_of": {"family", "parts"},
        "polynomial": {"family", "coeffs"},
    }
    if fam not in known:
        raise ValueError(f"unknown function family {fam!r}")
    extra = set(d) - known[fam]
    if extra:
        raise ValueError(f"unexpected keys for {fam}: {sorted(extra)}")
    if fam == "power":
        return Power(float(d.get("c0", 1.0)), float(d["a"]), float(d.get("offset", 0.0)))
    if fam == "power_log":
        return PowerLog(
            float(d.get("c0", 1.0)),
            float(d["a"]),
            float(d.get("s", 0.0)),
            float(d.get("shift", 1.0)),
            float(d.get("offset", 0.0)),
        )
    if fam == "tabulated":
        return TabulatedMonotone(tuple(d["nodes"]), tuple(d["values"]))
    if fam == "inverse_of":
        return InverseOf(from_dict(d["base"]))
    if fam == "compose":
        return Compose(from_dict(d["outer"]), from_dict(d["inner"]))
    if fam == "scaled_by":
        return ScaledBy(float(d["eps"]), from_dict(d["base"]))
    if fam == "min_of":
        return MinOf(tuple(from_dict(p) for p in d["parts"]))
    return Polynomial(tuple(d["coeffs"]))


def eval(f: ScalarFunction, z: float) -> float:  # noqa: A001 - public name
    """Evaluate ``f`` at a single point of its domain."""
    lo, hi = f.domain
    if not (lo < z < hi) or not math.isfinite(z):
        raise DomainError(f"{z} outside domain ({lo}, {hi})")
    v = float(f(z))
    if not (v > 0) or not math.isfinite(v):
        raise DomainError(f"{type(f).__name__} is not positive and finite at {z} (got {v})")
    return v


def _golden_min(f, a: float, b: float, tol: float = 1e-13) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = float(f(c)), float(f(d))
    while abs(b - a) > tol * (abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = float(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = float(f(d))
    return (c, fc) if fc < fd else (d, fd)


def _interval_min(f: ScalarFunction, lo: float, hi: float) -> float:
    """Infimum of a continuous ``f`` over ``[lo, hi]``."""
    m = f.monotone
    if m == INCREASING:
        return float(f(lo))
    if m == DECREASING:
        return float(f(hi))
    if isinstance(f, TabulatedMonotone):
        inside = [v for x, v in zip(f.nodes, f.values) if lo < x < hi]
        return float(min([float(f(lo)), float(f(hi))] + inside))
    crit = f.critical_points()
    if crit is not None:
        pts = [lo, hi] + [c for c in crit if lo < c < hi]
        return float(np.min(f(np.array(pts))))
    grid = np.geomspace(lo, hi, 65) if lo > 0 else np.linspace(lo, hi, 65)
    vals = f(grid)
    best = float(np.min(vals))
    i = int(np.argmin(vals))
    if 0 < i < grid.size - 1:
        _, fv = _golden_min(f, grid[i - 1], grid[i + 1])
        best = min(best, fv)
    return best


def theta_inf(f: ScalarFunction, theta: float, z: float) -> float:
    """Infimum of ``f`` over the window ``(z/theta, theta*z)``."""
    if not theta > 1:
        raise ValueError("theta must exceed 1")
    lo, hi = z / theta, z * theta
    dlo, dhi = f.domain
    if lo < dlo or hi > dhi or not z > 0:
        raise DomainError(f"window ({lo}, {hi}) escapes domain ({dlo}, {dhi})")
    return _interval_min(f, lo, hi)


def theta_inf_array(f: ScalarFunction, theta: float, z) -> np.ndarray:
    """Vectorised :func:`theta_inf` (fast path for monotone families)."""
    z = np.asarray(z, dtype=float)
    if f.monotone == INCREASING:
        return f(z / theta)
    if f.monotone == DECREASING:
        return f(z * theta)
    return np.vectorize(lambda x: theta_inf(f, theta, x), otypes=[float])(z)


def theta_inf_fn(f: ScalarFunction, theta: float):
    """Scalar callable ``z -> theta_inf(f, theta, z)`` without per-call checks
    for monotone families."""
    if f.monotone == INCREASING:
        return lambda z: float(f(z / theta))
    if f.monotone == DECREASING:
        return lambda z: float(f(z * theta))
    return lambda z: theta_inf(f, theta, z)


_Q_GRID = 10_000


def radial_inf_q(p_radial: ScalarFunction, r: float) -> float:
    """``q(r)``: infimum of the radial weight over ``(0, r]``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    val = _q_raw(p_radial, r)
    if not val > 0 or math.isnan(val):
        raise ValueError(f"q({r}) = {val}: the spatial weight needs a positive infimum on bounded balls")
    return val


def _q_raw(p_radial: ScalarFunction, r: float) -> float:
    m = p_radial.monotone
    if m == DECREASING:
        val = float(p_radial(r))
    elif m == INCREASING:
        val = p_radial.at_zero()
    else:
        crit = p_radial.critical_points()
        if isinstance(p_radial, TabulatedMonotone):
            cands = [p_radial.at_zero(), float(p_radial(r))]
            cands += [v for x, v in zip(p_radial.nodes, p_radial.values) if x <= r]
            val = min(cands)
        elif crit is not None:
            pts = np.array([r] + [c for c in crit if c < r])
            val = min(float(np.min(p_radial(pts))), p_radial.at_zero())
        else:
            grid = np.concatenate([np.geomspace(r * 1e-12, r, _Q_GRID // 2), np.linspace(0, r, _Q_GRID // 2 + 1)[1:]])
            val = float(np.min(p_radial(grid)))
            try:
                val = min(val, p_radial.at_zero())
            except DomainError:
                pass
    return val


def radial_inf_q_array(p_radial: ScalarFunction, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if p_radial.monotone == DECREASING:
        return p_radial(r)
    return np.vectorize(lambda x: _q_raw(p_radial, x), otypes=[float])(r)


def radial_inf_q_fn(p_radial: ScalarFunction):
    """Scalar callable for ``q`` without per-call validation."""
    if p_radial.monotone == DECREASING:
        return lambda r: float(p_radial(r))
    return lambda r: _q_raw(p_radial, r)


_COMPACT_SAMPLES = np.geomspace(1e-3, 1e3, 61)


@dataclass(frozen=True)
class StructureTriple:
    """The data ``(g, h, p, theta)`` consumed by the stabilization test."""

    g: ScalarFunction
    h: ScalarFunction
    p_radial: ScalarFunction
    theta: float = 2.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError(f"theta must exceed 1, got {self.theta}")
        for name in ("g", "h"):
            vals = getattr(self, name)(_COMPACT_SAMPLES)
            if not np.all(np.isfinite(vals)) or not np.all(vals > 0):
                raise ValueError(f"{name} must be positive and finite on compact subsets of (0, inf)")

    def with_theta(self, theta: float) -> "StructureTriple":
        return StructureTriple(self.g, self.h, self.p_radial, theta)

    def to_dict(self) -> dict[str, Any]:
        return {"g": self.g.to_dict(), "h": self.h.to_dict(), "p": self.p_radial.to_dict(), "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict[str, Any], theta: float | None = None) -> "StructureTriple":
        th = theta if theta is not None else float(d.get("theta", 2.0))
        return cls(from_dict(d["g"]), from_dict(d["h"]), from_dict(d["p"]), th)
