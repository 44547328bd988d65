"""Radial shooting for bounded positive stationary solutions.

A stationary radial solution of ``Lap u + b - c F(u) = 0`` solves

    u'' + (n-1)/r u' + reaction(r, u, u') = 0,   u(0) = A,  u'(0) = 0,

where ``reaction`` is the same right-hand side the simulator uses.  A
profile that stays positive and bounded and flattens out at large radius
is a time-independent solution that does not decay, i.e. a witness that
stabilization fails.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .pde import EquationSpec, FieldState, RadialGrid

BLOWUP_FACTOR = 1e6
PLATEAU_TOL = 1e-6
DEFAULT_RTOL = 1e-10


class Outcome(str, enum.Enum):
    BOUNDED_POSITIVE = "bounded_positive"
    HITS_ZERO = "hits_zero"
    BLOWUP = "blowup"


@dataclass(frozen=True)
class ShootResult:
    """Outcome of one shot from ``u(0) = A``.

    ``radius`` is where integration stopped: the zero crossing, the blow-up
    radius, or ``R_max``.  ``solution`` is the dense interpolant on
    ``[0, radius]``.
    """

    A: float
    outcome: Outcome
    radius: float
    terminal_u: float
    terminal_du: float
    solution: Any = field(repr=False, compare=False)
    rtol: float = DEFAULT_RTOL

    @property
    def bounded_positive(self) -> bool:
        return self.outcome is Outcome.BOUNDED_POSITIVE

    @property
    def plateau(self) -> float:
        """``|u'(R)| R / u(R)``; small means the profile has levelled off."""
        if not self.terminal_u > 0:
            return math.inf
        return abs(self.terminal_du) * self.radius / self.terminal_u

    def is_witness(self, plateau_tol: float = PLATEAU_TOL) -> bool:
        return self.bounded_positive and self.plateau < plateau_tol

    def evaluate(self, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.radius * (1 + 1e-12)):
            raise ValueError(f"radii must lie in [0, {self.radius}]")
        y = self.solution(np.minimum(r, self.radius))
        return y[0], y[1]

    def to_field(self, grid: RadialGrid) -> FieldState:
        """Profile interpolated onto a simulation grid."""
        u, _ = self.evaluate(grid.nodes)
        return FieldState(u)

    def summary(self) -> dict[str, Any]:
        return {
            "A": self.A,
            "outcome": self.outcome.value,
            "radius": self.radius,
            "terminal_u": self.terminal_u,
            "terminal_du": self.terminal_du,
            "plateau": self.plateau if math.isfinite(self.plateau) else None,
            "rtol": self.rtol,
        }


def _rhs(spec: EquationSpec):
    n = spec.n

    def f(r, y):
        u, v = y
        react = float(spec.reaction(r, u, v))
        if r == 0.0:
            return [v, -react / n]
        return [v, -(n - 1) / r * v - react]

    return f


def shoot(
    spec: EquationSpec,
    A: float,
    R_max: float,
    rtol: float = DEFAULT_RTOL,
    blowup_factor: float = BLOWUP_FACTOR,
) -> ShootResult:
    """Integrate the radial stationary equation from ``u(0) = A`` out to ``R_max``."""
    if not A > 0:
        raise ValueError("initial value A must be positive")
    if not R_max > 0:
        raise ValueError("R_max must be positive")

    def crosses_zero(r, y):
        return y[0]

    crosses_zero.terminal = True
    crosses_zero.direction = -1

    def explodes(r, y):
        return blowup_factor * A - abs(y[0])

    explodes.terminal = True

    sol = solve_ivp(
        _rhs(spec),
        (0.0, R_max),
        [A, 0.0],
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-4 * A,
        events=(crosses_zero, explodes),
        dense_output=True,
    )
    r_end = float(sol.t[-1])
    u_end, du_end = (float(v) for v in sol.y[:, -1])
    if sol.status == 1 and sol.t_events[0].size:
        outcome = Outcome.HITS_ZERO
    elif sol.status == 1 or sol.status == -1 or not math.isfinite(u_end):
        # event hit or step-size underflow near a singularity
        outcome = Outcome.BLOWUP
    else:
        outcome = Outcome.BOUNDED_POSITIVE if np.all(sol.y[0] > 0) else Outcome.HITS_ZERO
    return ShootResult(A, outcome, r_end, u_end, du_end, sol.sol, rtol)


@dataclass(frozen=True)
class WitnessSearch:
    """Record of a scan: the witness (if any) and every shot summary."""

    witness: ShootResult | None
    shots: tuple[dict[str, Any], ...]

    @property
    def found(self) -> bool:
        return self.witness is not None


def find_witness(
    spec: EquationSpec,
    A_range: tuple[float, float],
    R_max: float = 1e5,
    samples: int = 25,
    plateau_tol: float = PLATEAU_TOL,
    rtol: float = DEFAULT_RTOL,
) -> WitnessSearch:
    """Scan a log-spaced grid of ``A`` and return the smallest-``A`` witness."""
    lo, hi = A_range
    if not (lo > 0 and hi > lo):
        return WitnessSearch(None, ())
    shots = []
    for A in np.geomspace(lo, hi, samples):
        res = shoot(spec, float(A), R_max, rtol=rtol)
        shots.append(res.summary())
        if res.is_witness(plateau_tol):
            return WitnessSearch(res, tuple(shots))
    return WitnessSearch(None, tuple(shots))


def profile_radii(R: float, count: int = 2001) -> np.ndarray:
    """Linear sampling near the origin, logarithmic beyond ``r = 1``."""
    if R <= 1:
        return np.linspace(0.0, R, count)
    head = np.linspace(0.0, 1.0, count // 2, endpoint=False)
    return np.concatenate([head, np.geomspace(1.0, R, count - head.size)])


def write_profile_csv(path, result: ShootResult, radii: Sequence[float] | None = None) -> None:
    r = profile_radii(result.radius) if radii is None else np.asarray(radii, dtype=float)
    u, du = result.evaluate(r)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "du_dr"])
        for row in zip(r, u, du):
            w.writerow([f"{v:.17g}" for v in row])


def write_manifest(path, payload: dict[str, Any]) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
