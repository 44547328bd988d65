"""Radial finite-difference simulation of ``u_t = Lap u + b - c(x) F(u)``.

The radial Laplacian ``u_rr + (n-1)/r u_r`` is discretised in conservative
(finite-volume) form on nodes ``r_j = j dr`` with half cells at ``r = 0``
and ``r = R``.  Symmetry closes the origin, a homogeneous Neumann condition
closes the outer boundary.  Time stepping is IMEX Euler: implicit diffusion
(tridiagonal solve) and explicit reaction with ``Du`` replaced by the
central-difference radial gradient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .funcs import ScalarFunction, from_dict

MU_DELTA = 1e-12


class BlowupDetected(RuntimeError):
    def __init__(self, time: float, message: str = ""):
        super().__init__(message or f"solution blew up at t = {time:.6g}")
        self.time = time


class StabilityError(ValueError):
    """Time step exceeds the explicit-part stability bound."""

    def __init__(self, dt: float, limit: float):
        super().__init__(f"dt = {dt:.3g} exceeds the stability limit {limit:.3g}")
        self.dt = dt
        self.limit = limit


@dataclass(frozen=True)
class BTerm:
    """``sign * sgn(u) * b0 (1+r)^k log^s(2+r) |u|^mu |u_r|^alpha``."""

    b0: float = 0.0
    k: float = 0.0
    s: float = 0.0
    mu: float = 0.0
    alpha: float = 1.0
    sign: float = 1.0

    def __post_init__(self):
        if self.b0 < 0:
            raise ValueError("b0 must be non-negative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.sign not in (1, -1, 1.0, -1.0):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class CTerm:
    """``c0 (1+r)^l log^m(2+r)``; ``c0 = 0`` switches absorption off."""

    c0: float = 1.0
    l: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.c0 < 0:
            raise ValueError("c0 must be non-negative")


@dataclass(frozen=True)
class Absorption:
    """``|u|^(sigma-1) u log^nu(1+|u|)``."""

    sigma: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be non-negative")


@dataclass(frozen=True)
class EquationSpec:
    """A concrete radial equation.

    With ``phi`` and ``psi`` set, the gradient term is ``sign * phi(|u_r|)``
    and the absorption is ``psi(|u|) sgn(u)``; ``c`` and ``absorption`` are
    then ignored.
    """

    n: int = 1
    b: BTerm = field(default_factory=BTerm)
    c: CTerm = field(default_factory=CTerm)
    absorption: Absorption = field(default_factory=Absorption)
    phi: ScalarFunction | None = None
    psi: ScalarFunction | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be a positive integer")
        if (self.phi is None) != (self.psi is None):
            raise ValueError("phi and psi must be given together")

    @property
    def gradient_mode(self) -> bool:
        return self.phi is not None

    def c_of_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.c.c0 * (1.0 + r) ** self.c.l * np.log(2.0 + r) ** self.c.m

    def b_weight(self, r):
        r = np.asarray(r, dtype=float)
        b = self.b
        return b.b0 * (1.0 + r) ** b.k * np.log(2.0 + r) ** b.s

    def reaction(self, r, u, ur, c_r=None, bw_r=None) -> np.ndarray:
        """``b(r, u, u_r) - absorption(r, u)``, vectorised."""
        u = np.asarray(u, dtype=float)
        ur = np.asarray(ur, dtype=float)
        au = np.abs(u)
        with np.errstate(all="ignore"):
            if self.gradient_mode:
                drift = self.b.sign * self.phi(np.abs(ur))
                absorb = np.where(u != 0, self.psi(np.where(au > 0, au, 1.0)) * np.sign(u), 0.0)
                return drift - absorb
            out = np.zeros_like(u)
            if self.b.b0 > 0:
                bw = self.b_weight(r) if bw_r is None else bw_r
                mu = self.b.mu
                umu = (u * u + MU_DELTA**2) ** (mu / 2) if mu < 1 else au**mu
                out = out + self.b.sign * np.sign(u) * bw * umu * np.abs(ur) ** self.b.alpha
            if self.c.c0 > 0:
                cr = self.c_of_r(r) if c_r is None else c_r
                sig, nu = self.absorption.sigma, self.absorption.nu
                f = np.sign(u) * au**sig
                if nu:
                    f = f * np.log1p(au) ** nu
                out = out - cr * f
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"n": int(self.n), "b": asdict(self.b)}
        if self.gradient_mode:
            d["phi"] = self.phi.to_dict()
            d["psi"] = self.psi.to_dict()
        else:
            d["c"] = asdict(self.c)
            d["absorption"] = asdict(self.absorption)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EquationSpec":
        allowed = {"n", "b", "c", "absorption", "phi", "psi"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unexpected equation keys: {sorted(extra)}")
        phi = from_dict(d["phi"]) if "phi" in d else None
        psi = from_dict(d["psi"]) if "psi" in d else None
        return cls(
            n=int(d.get("n", 1)),
            b=BTerm(**d.get("b", {})),
            c=CTerm(**d.get("c", {})),
            absorption=Absorption(**d.get("absorption", {})),
            phi=phi,
            psi=psi,
        )


@dataclass(frozen=True)
class RadialGrid:
    R: float
    N: int

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("truncation radius must be positive")
        if int(self.N) != self.N or self.N < 16:
            raise ValueError("need at least 16 cells")

    @property
    def dr(self) -> float:
        return self.R / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dr

    def volumes(self, n: int) -> np.ndarray:
        r = self.nodes
        lo = np.maximum(r - self.dr / 2, 0.0)
        hi = np.minimum(r + self.dr / 2, self.R)
        return (hi**n - lo**n) / n

    def laplacian_bands(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients of ``u_{j-1}`` and ``u_{j+1}`` in the discrete Laplacian."""
        r = self.nodes
        V = self.volumes(n)
        face = (r[:-1] + self.dr / 2) ** (n - 1) / self.dr
        lower = np.zeros(self.N + 1)
        upper = np.zeros(self.N + 1)
        upper[:-1] = face / V[:-1]
        lower[1:] = face / V[1:]
        return lower, upper

    def laplacian(self, u: np.ndarray, n: int) -> np.ndarray:
        lower, upper = self.laplacian_bands(n)
        out = -(lower + upper) * u
        out[1:] += lower[1:] * u[:-1]
        out[:-1] += upper[:-1] * u[1:]
        return out

    def gradient(self, u: np.ndarray) -> np.ndarray:
        g = np.zeros_like(u)
        g[1:-1] = (u[2:] - u[:-2]) / (2 * self.dr)
        return g

    def to_dict(self) -> dict[str, Any]:
        return {"R": self.R, "N": int(self.N)}


@dataclass(frozen=True)
class FieldState:
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise BlowupDetected(self.time, f"non-finite values at t = {self.time:.6g}")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: RadialGrid, value: float) -> "FieldState":
        return cls(np.full(grid.N + 1, float(value)))

    @classmethod
    def gaussian(cls, grid: RadialGrid, amplitude: float, width: float = 1.0) -> "FieldState":
        return cls(amplitude * np.exp(-((grid.nodes / width) ** 2)))

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "FieldState":
        return cls(np.asarray(fn(grid.nodes), dtype=float))


class _Stepper:
    """Per-(spec, grid) cache of spatial weights and the diffusion bands."""

    def __init__(self, spec: EquationSpec, grid: RadialGrid):
        self.spec = spec
        self.grid = grid
        r = grid.nodes
        self.lower, self.upper = grid.laplacian_bands(spec.n)
        self.c_r = spec.c_of_r(r) if not spec.gradient_mode else None
        self.bw_r = spec.b_weight(r) if not spec.gradient_mode else None
        self._ab: dict[float, np.ndarray] = {}

    def reaction(self, u, ur):
        return self.spec.reaction(self.grid.nodes, u, ur, self.c_r, self.bw_r)

    def stability_limit(self, u: np.ndarray, ur: np.ndarray) -> float:
        du = 1e-7 * np.maximum(np.abs(u), 1e-8)
        dR = np.abs(self.reaction(u + du, ur) - self.reaction(u - du, ur)) / (2 * du)
        limit = math.inf
        m = float(np.max(dR)) if dR.size else 0.0
        if m > 0:
            limit = 0.5 / m
        if self.spec.gradient_mode or self.spec.b.b0 > 0:
            dv = 1e-7 * np.maximum(np.abs(ur), 1e-8)
            dB = np.abs(self.reaction(u, ur + dv) - self.reaction(u, ur - dv)) / (2 * dv)
            a = float(np.max(dB))
            if a > 0:
                limit = min(limit, self.grid.dr / a)
        return limit

    def matrix(self, dt: float) -> np.ndarray:
        ab = self._ab.get(dt)
        if ab is None:
            n = self.grid.N + 1
            ab = np.zeros((3, n))
            ab[0, 1:] = -dt * self.upper[:-1]
            ab[1] = 1.0 + dt * (self.lower + self.upper)
            ab[2, :-1] = -dt * self.lower[1:]
            self._ab[dt] = ab
        return ab

    def step(self, state: FieldState, dt: float) -> FieldState:
        u = state.values
        ur = self.grid.gradient(u)
        limit = self.stability_limit(u, ur)
        if dt > limit * (1 + 1e-12):
            raise StabilityError(dt, limit)
        rhs = u + dt * self.reaction(u, ur)
        new = solve_banded((1, 1), self.matrix(dt), rhs, check_finite=False)
        t = state.time + dt
        if not np.all(np.isfinite(new)):
            raise BlowupDetected(t)
        return FieldState(new, t)


def step_imex(state: FieldState, spec: EquationSpec, grid: RadialGrid, dt: float) -> FieldState:
    """Advance one IMEX Euler step; raises :class:`StabilityError` if ``dt`` is too large."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _Stepper(spec, grid).step(state, dt)


@dataclass
class DecayCurve:
    probe: float
    times: list[float] = field(default_factory=list)
    sup_abs: list[float] = field(default_factory=list)
    sup_pos: list[float] = field(default_factory=list)

    def record(self, t: float, u_probe: np.ndarray) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("sample times must be strictly increasing")
        self.times.append(float(t))
        self.sup_abs.append(float(np.max(np.abs(u_probe))))
        self.sup_pos.append(float(max(0.0, np.max(u_probe))))

    def at(self, t: float, positive: bool = False) -> float:
        """Sample closest to ``t``."""
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return (self.sup_pos if positive else self.sup_abs)[i]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "sup_abs", "sup_pos"])
            for row in zip(self.times, self.sup_abs, self.sup_pos):
                w.writerow([f"{v:.17g}" for v in row])


@dataclass
class SimulationResult:
    curve: DecayCurve
    final: FieldState
    snapshots: dict[float, FieldState] = field(default_factory=dict)
    history_times: list[float] = field(default_factory=list)
    history: list[np.ndarray] = field(default_factory=list)
    substeps: int = 0


def write_snapshot_csv(path, grid: RadialGrid, state: FieldState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u"])
        for r, u in zip(grid.nodes, state.values):
            w.writerow([f"{r:.17g}", f"{u:.17g}"])


def simulate(
    spec: EquationSpec,
    grid: RadialGrid,
    initial: FieldState,
    T: float,
    probe: float,
    dt: float,
    sample_every: int = 1,
    snapshot_times: Sequence[float] = (),
    keep_history: bool = False,
    max_substeps: int = 1_000_000,
) -> SimulationResult:
    """Integrate to ``T`` with macro step ``dt``, sampling ``sup_{r <= probe} |u|``.

    A macro step that violates the explicit stability bound is split into
    equal substeps; the sampling grid stays tied to ``dt``.
    """
    if not probe > 0 or probe > grid.R / 4 * (1 + 1e-12):
        raise ValueError(f"probe radius must lie in (0, R/4]; got {probe} with R = {grid.R}")
    if not (dt > 0 and T >= 0):
        raise ValueError("need dt > 0 and T >= 0")
    if len(initial.values) != grid.N + 1:
        raise ValueError("initial state does not match the grid")
    stepper = _Stepper(spec, grid)
    mask = grid.nodes <= probe + 1e-12
    n_steps = int(round(T / dt))
    state = FieldState(initial.values.copy(), 0.0)
    curve = DecayCurve(probe)
    curve.record(0.0, state.values[mask])
    result = SimulationResult(curve, state)
    pending = sorted(float(s) for s in snapshot_times)
    if keep_history:
        result.history_times.append(0.0)
        result.history.append(state.values.copy())

    def take_snapshots(st: FieldState, i: int):
        while pending and pending[0] <= (i + 0.5) * dt:
            result.snapshots[pending.pop(0)] = st

    take_snapshots(state, 0)
    for i in range(1, n_steps + 1):
        t_target = i * dt
        try:
            state = stepper.step(state, dt)
        except StabilityError as err:
            nsub = math.ceil(dt / err.limit * 1.01)
            if nsub > max_substeps:
                raise BlowupDetected(state.time, f"stiffness runaway near t = {state.time:.6g}") from err
            h = dt / nsub
            for _ in range(nsub):
                try:
                    state = stepper.step(state, h)
                except StabilityError as err2:
                    raise BlowupDetected(state.time, f"stiffness runaway near t = {state.time:.6g}") from err2
            result.substeps += nsub
        state = FieldState(state.values, t_target)
        if i % sample_every == 0 or i == n_steps:
            curve.record(t_target, state.values[mask])
            if keep_history:
                result.history_times.append(t_target)
                result.history.append(state.values.copy())
        take_snapshots(state, i)
    result.final = state
    return result


def residual(state: FieldState, spec: EquationSpec, grid: RadialGrid) -> float:
    """Sup over nodes ``r < R`` of the discrete stationary right-hand side."""
    u = state.values
    rhs = grid.laplacian(u, spec.n) + spec.reaction(grid.nodes, u, grid.gradient(u))
    return float(np.max(np.abs(rhs[:-1])))
