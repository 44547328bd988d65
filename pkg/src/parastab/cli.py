"""Command-line front end.

Each subcommand reads one JSON config whose single top-level key names the
command.  Exit codes: 0 success (or "stabilizes" for ``check``), 10 verdict
unknown, 2 configuration error, 11 divergent tails, 12 numerical blow-up.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .criterion import (
    Verdict,
    example21_check,
    example21_triple,
    example22_check,
    example22_triple,
    example23_check,
    example23_triple,
    example24_triple,
    theorem21_verdict,
)
from .envelope import DivergentTailError, EnvelopeParams, GTransform, envelope_curve, write_envelope_csv
from .funcs import StructureTriple, from_dict
from .pde import BlowupDetected, EquationSpec, FieldState, RadialGrid, residual, simulate, write_snapshot_csv
from .stationary import PLATEAU_TOL, find_witness, write_profile_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNKNOWN = 10
EXIT_DIVERGENT = 11
EXIT_BLOWUP = 12

COMMANDS = ("check", "sweep", "envelope", "simulate", "stationary")


class ConfigError(ValueError):
    def __init__(self, message: str, **extra: Any):
        super().__init__(message)
        self.extra = extra


def _fail(kind: str, message: str, code: int, **extra: Any) -> int:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(_dump(obj))


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def load_config(path: str, command: str) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON: {err.msg}", line=err.lineno, column=err.colno) from err
    if not isinstance(doc, dict) or list(doc) != [command]:
        found = list(doc) if isinstance(doc, dict) else type(doc).__name__
        raise ConfigError(f"config must hold exactly one '{command}' block, found {found}")
    block = doc[command]
    if not isinstance(block, dict):
        raise ConfigError(f"'{command}' block must be a JSON object")
    return block


def _num(block: dict, key: str, default: Any = None, positive: bool = False) -> float:
    if key not in block:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"'{key}' must be a finite number")
    if positive and not v > 0:
        raise ConfigError(f"'{key}' must be positive")
    return float(v)


# -- check -------------------------------------------------------------------

_FAMILY_KEYS = {
    "example21": ("alpha", "mu", "sigma", "k", "l"),
    "example22": ("alpha", "k", "s", "l", "m", "sigma", "mu"),
    "example23": ("alpha", "mu", "nu", "k", "l"),
}


def _family_params(name: str, block: dict) -> dict[str, float]:
    keys = _FAMILY_KEYS[name]
    extra = set(block) - set(keys)
    if extra:
        raise ConfigError(f"unexpected {name} keys: {sorted(extra)}")
    return {k: _num(block, k) for k in keys}


def _family_triple(name: str, params: dict[str, float], theta: float) -> StructureTriple:
    builder = {"example21": example21_triple, "example22": example22_triple, "example23": example23_triple}[name]
    return builder(**params, theta=theta)


def _family_closed(name: str, params: dict[str, float]) -> bool:
    checker = {"example21": example21_check, "example22": example22_check, "example23": example23_check}[name]
    return bool(checker(**params).passes)


def _resolve_triple(block: dict, theta: float) -> tuple[StructureTriple, dict[str, Any]]:
    sources = [k for k in ("triple", "example21", "example22", "example23", "example24") if k in block]
    if len(sources) != 1:
        raise ConfigError("check needs exactly one of triple, example21, example22, example23, example24")
    src = sources[0]
    try:
        if src == "triple":
            t = block["triple"]
            triple = StructureTriple.from_dict(t, theta=theta)
            return triple, {"triple": triple.to_dict()}
        if src == "example24":
            e = block["example24"]
            triple = example24_triple(from_dict(e["phi"]), from_dict(e["psi"]), _num(e, "eps", positive=True), theta)
            return triple, {"example24": {"phi": e["phi"], "psi": e["psi"], "eps": float(e["eps"])}}
        params = _family_params(src, block[src])
        return _family_triple(src, params, theta), {src: params}
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid {src} block: {err}") from err


def cmd_check(block: dict, args) -> int:
    theta = args.theta if args.theta is not None else _num(block, "theta", 2.0)
    method = block.get("method", "auto")
    if method not in ("auto", "closed", "numeric"):
        raise ConfigError("method must be auto, closed or numeric")
    triple, echo = _resolve_triple(block, theta)
    try:
        report = theorem21_verdict(triple, method)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    out = report.to_dict()
    sys.stdout.write(_dump(out))
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        _write_json(d / "report.json", out)
        _manifest(d / "report.manifest.json", "check", {**echo, "method": method, "theta": theta}, ["report.json"])
    return EXIT_OK if report.verdict is Verdict.STABILIZES else EXIT_UNKNOWN


def _manifest(path: Path, command: str, resolved: dict, outputs: list[str], **extra: Any) -> None:
    _write_json(path, {"command": command, "config": resolved, "outputs": outputs, "version": __version__, **extra})


# -- sweep -------------------------------------------------------------------

def _sweep_point(job: tuple[str, dict[str, float], float]) -> tuple[str, str]:
    name, params, theta = job
    closed = Verdict.STABILIZES if _family_closed(name, params) else Verdict.UNKNOWN
    try:
        numeric = theorem21_verdict(_family_triple(name, params, theta), "numeric").verdict
    except ValueError:
        numeric = Verdict.UNKNOWN
    return closed.value, numeric.value


def cmd_sweep(block: dict, args) -> int:
    name = block.get("family")
    if name not in _FAMILY_KEYS:
        raise ConfigError(f"family must be one of {sorted(_FAMILY_KEYS)}")
    theta = args.theta if args.theta is not None else _num(block, "theta", 2.0)
    fixed = {k: _num(block.get("fixed", {}), k) for k in block.get("fixed", {})}
    axes = block.get("axes")
    if not isinstance(axes, list) or not axes:
        raise ConfigError("axes must be a non-empty list of {name, values}")
    names, values = [], []
    for ax in axes:
        if not isinstance(ax, dict) or set(ax) != {"name", "values"}:
            raise ConfigError("each axis needs exactly 'name' and 'values'")
        vals = ax["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"axis '{ax.get('name')}' has no values")
        names.append(ax["name"])
        values.append([_num({"v": v}, "v") for v in vals])
    keys = _FAMILY_KEYS[name]
    missing = set(keys) - set(fixed) - set(names)
    unknown = (set(fixed) | set(names)) - set(keys)
    if missing or unknown or len(set(names)) != len(names) or set(fixed) & set(names):
        raise ConfigError(f"sweep parameters must cover {list(keys)} exactly once")
    jobs = []
    for combo in itertools.product(*values):
        params = {**fixed, **dict(zip(names, combo))}
        params = {k: params[k] for k in keys}
        if name == "example22":
            try:
                _family_closed(name, params)
            except ValueError as err:
                raise ConfigError(f"sweep point {params}: {err}") from err
        jobs.append((name, params, theta))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            verdicts = list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        verdicts = [_sweep_point(j) for j in jobs]

    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*keys, "closed", "numeric"])
        for (_, params, _), (closed, numeric) in zip(jobs, verdicts):
            w.writerow([*(_fmt(params[k]) for k in keys), closed, numeric])
    resolved = {"family": name, "fixed": fixed, "axes": [{"name": n, "values": v} for n, v in zip(names, values)], "theta": theta}
    _manifest(d / "sweep.manifest.json", "sweep", resolved, ["sweep.csv"], rows=len(jobs))
    return EXIT_OK


# -- envelope ----------------------------------------------------------------

def _time_grid(block: dict) -> list[float]:
    if "t" in block:
        ts = block["t"]
        if not isinstance(ts, list) or not ts:
            raise ConfigError("'t' must be a non-empty list")
        return [_num({"t": v}, "t", positive=True) for v in ts]
    grid = block.get("t_grid")
    if not isinstance(grid, dict):
        raise ConfigError("envelope needs 't' or 't_grid'")
    start, stop = _num(grid, "start", positive=True), _num(grid, "stop", positive=True)
    num = int(_num(grid, "num", positive=True))
    if stop < start:
        raise ConfigError("t_grid stop must not be below start")
    return [float(v) for v in np.geomspace(start, stop, num)]


def cmd_envelope(block: dict, args) -> int:
    theta = args.theta if args.theta is not None else _num(block, "theta", 2.0)
    C = args.calibration_c if args.calibration_c is not None else _num(block, "C", 1.0)
    try:
        g, h, p = from_dict(block["g"]), from_dict(block["h"]), from_dict(block["p"])
        params = EnvelopeParams(theta=theta, C=C, r=_num(block, "r", 1.0, positive=True))
    except KeyError as err:
        raise ConfigError(f"missing key {err}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    times = _time_grid(block)
    try:
        transform = GTransform(g, h, theta)
    except DivergentTailError as err:
        return _fail("divergent", str(err), EXIT_DIVERGENT)
    rows = envelope_curve(g, h, p, params, times, transform=transform)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    write_envelope_csv(d / "envelope.csv", rows)
    resolved = {"g": g.to_dict(), "h": h.to_dict(), "p": p.to_dict(), "theta": theta, "C": C, "r": params.r, "t": times}
    _manifest(d / "envelope.manifest.json", "envelope", resolved, ["envelope.csv"])
    return EXIT_OK


# -- simulate / stationary -------------------------------------------------------

def _equation(block: dict) -> EquationSpec:
    try:
        return EquationSpec.from_dict(block["equation"])
    except KeyError as err:
        raise ConfigError(f"missing key {err}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid equation: {err}") from err


def _grid(block: dict) -> RadialGrid:
    g = block.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("missing 'grid' block with R and N")
    try:
        return RadialGrid(_num(g, "R", positive=True), int(_num(g, "N", positive=True)))
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _initial(block: dict, grid: RadialGrid) -> tuple[FieldState, dict]:
    init = block.get("initial", {"kind": "zero"})
    kind = init.get("kind")
    if kind == "zero":
        return FieldState.constant(grid, 0.0), {"kind": "zero"}
    if kind == "constant":
        v = _num(init, "value")
        return FieldState.constant(grid, v), {"kind": kind, "value": v}
    if kind == "gaussian":
        a, w = _num(init, "amplitude"), _num(init, "width", 1.0, positive=True)
        return FieldState.gaussian(grid, a, w), {"kind": kind, "amplitude": a, "width": w}
    raise ConfigError("initial.kind must be zero, constant or gaussian")


def cmd_simulate(block: dict, args) -> int:
    spec = _equation(block)
    grid = _grid(block)
    init, init_echo = _initial(block, grid)
    dt = _num(block, "dt", positive=True)
    T = _num(block, "T", positive=True)
    probe = _num(block, "probe", 1.0, positive=True)
    every = int(_num(block, "sample_every", 1, positive=True))
    snaps = [_num({"t": v}, "t") for v in block.get("snapshots", [])]
    if probe > grid.R / 4:
        raise ConfigError("probe radius must not exceed R/4")
    try:
        res = simulate(spec, grid, init, T, probe, dt, sample_every=every, snapshot_times=snaps)
    except BlowupDetected as err:
        return _fail("blowup", str(err), EXIT_BLOWUP, time=err.time)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    res.curve.write_csv(d / "decay.csv")
    outputs = ["decay.csv"]
    for t, st in sorted(res.snapshots.items()):
        name = f"snapshot_t{t:.17g}.csv"
        write_snapshot_csv(d / name, grid, st)
        outputs.append(name)
    resolved = {
        "equation": spec.to_dict(),
        "grid": grid.to_dict(),
        "initial": init_echo,
        "dt": dt,
        "T": T,
        "probe": probe,
        "sample_every": every,
        "snapshots": snaps,
        "seed": None,
    }
    _manifest(d / "simulate.manifest.json", "simulate", resolved, outputs, substeps=res.substeps)
    return EXIT_OK


def cmd_stationary(block: dict, args) -> int:
    spec = _equation(block)
    ar = block.get("A_range")
    if not (isinstance(ar, list) and len(ar) == 2):
        raise ConfigError("A_range must be a two-element list")
    lo, hi = (_num({"a": v}, "a") for v in ar)
    R_max = _num(block, "R_max", 1e5, positive=True)
    samples = int(_num(block, "samples", 25, positive=True))
    plateau = _num(block, "plateau_tol", PLATEAU_TOL, positive=True)
    rtol = _num(block, "rtol", 1e-10, positive=True)
    grid = _grid(block) if "grid" in block else RadialGrid(16.0, 256)
    if grid.R > R_max:
        raise ConfigError("residual grid must fit inside R_max")
    search = find_witness(spec, (lo, hi), R_max, samples=samples, plateau_tol=plateau, rtol=rtol)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    resolved = {
        "equation": spec.to_dict(),
        "A_range": [lo, hi],
        "R_max": R_max,
        "samples": samples,
        "plateau_tol": plateau,
        "rtol": rtol,
        "grid": grid.to_dict(),
    }
    extra: dict[str, Any] = {"found": search.found, "shots": list(search.shots)}
    outputs: list[str] = []
    if search.found:
        w = search.witness
        write_profile_csv(d / "witness.csv", w)
        outputs.append("witness.csv")
        extra["witness"] = w.summary()
        extra["residual"] = residual(w.to_field(grid), spec, grid)
    _manifest(d / "witness.manifest.json", "stationary", resolved, outputs, **extra)
    return EXIT_OK


_HANDLERS = {
    "check": cmd_check,
    "sweep": cmd_sweep,
    "envelope": cmd_envelope,
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parastab", description="Stabilization criteria for semilinear parabolic equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config with a single '%s' block" % name)
        p.add_argument("--out", default=None if name == "check" else ".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--theta", type=float, default=None, help="override theta (> 1)")
        p.add_argument("--calibration-c", type=float, default=None, help="override the envelope constant C")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        return _fail("config", "--jobs must be at least 1", EXIT_CONFIG)
    if args.theta is not None and not args.theta > 1:
        return _fail("config", "--theta must exceed 1", EXIT_CONFIG)
    if args.calibration_c is not None and not args.calibration_c > 0:
        return _fail("config", "--calibration-c must be positive", EXIT_CONFIG)
    try:
        block = load_config(args.config, args.command)
        return _HANDLERS[args.command](block, args)
    except ConfigError as err:
        return _fail("config", str(err), EXIT_CONFIG, **err.extra)


if __name__ == "__main__":
    sys.exit(main())
