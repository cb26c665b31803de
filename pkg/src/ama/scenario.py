"""Scenario files: parsing, validation with located errors, emission and seeded UE layouts.

A scenario file is a YAML mapping::

    rf:        {beta0_db: -61.4, noise_dbm: -94.0, wavelength_m: 0.0107}   # all optional
    swarm:     {L: 4, N: 60, slot_s: 1.0, vmax_mps: 30, dmin_m: 5, H_m: 100,
                endpoints: {initial: [[x, y, z], ...], final: [...]}}       # endpoints optional
    users:     [{x: 40, y: 30, power_dbm: 30}, ...]
    generator: {K: 4, Dx: 160, Dy: 120, seed: 7, power_dbm: 30}           # used when users is empty
    solver:    {eps1: 1e-4, eps2: 1e-4, feas_tol: 1e-8, opt_tol: 1e-6, max_iters: 5000}

Linear alternatives (``rf.beta0``, ``rf.noise_w``, ``users[].power_w``) are
accepted as well; :func:`emit_scenario` writes those so that a parse/emit
round trip is exact.
"""

from __future__ import annotations

import math
import os
from typing import Any, Optional

import numpy as np
import yaml

from .model import (RfParams, Scenario, SolverSettings, ValidationError, beta0_from_wavelength,
                    db_to_linear, dbm_to_watt)
from .rng import uniform

DEFAULT_POWER_DBM = 30.0
DEFAULT_AREA = (160.0, 120.0)

_SECTIONS = {"rf", "swarm", "users", "generator", "solver"}
_RF_KEYS = {"beta0_db", "beta0", "noise_dbm", "noise_w", "wavelength_m"}
_SWARM_KEYS = {"L", "N", "slot_s", "vmax_mps", "dmin_m", "H_m", "endpoints", "reference_point"}
_USER_KEYS = {"x", "y", "power_dbm", "power_w"}
_GEN_KEYS = {"K", "Dx", "Dy", "seed", "power_dbm"}
_SOLVER_KEYS = {"eps1", "eps2", "feas_tol", "opt_tol", "max_iters", "max_outer", "max_stage1", "max_stage2"}


class ScenarioError(ValidationError):
    """A scenario document that cannot be parsed or validated.

    ``location`` is either ``"line L, column C"`` for syntax errors or a
    dotted field path such as ``"swarm.vmax_mps"``.
    """

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


def generate_users(K: int, Dx: float, Dy: float, seed: int) -> np.ndarray:
    """K ground UEs uniform in [-Dx/2, Dx/2] x [-Dy/2, Dy/2].

    Draws 2K values from :func:`ama.rng.uniform` and uses them as
    (x0, y0, x1, y1, ...), so the first K UEs of a larger draw coincide with
    a smaller one under the same seed.
    """
    if K < 1:
        raise ValidationError("generator.K must be >= 1")
    if not (Dx > 0 and Dy > 0):
        raise ValidationError("generator area must be positive")
    u = uniform(seed, 2 * K).reshape(K, 2)
    xy = (u - 0.5) * np.array([Dx, Dy])
    return np.column_stack([xy, np.zeros(K)])


def random_placement(L: int, H: float, d_min: float, seed: int, side: float = 100.0,
                     center=(0.0, 0.0), max_attempts: int = 100_000) -> np.ndarray:
    """L points uniform in a cube of edge ``side`` sitting on the plane z = H, pairwise >= d_min.

    Points are drawn one at a time and a draw closer than d_min to an earlier
    point is rejected; more than ``max_attempts`` draws in total is an error.
    """
    pts = []
    attempts = 0
    block = 3 * 256
    stream = np.zeros(0)
    used = 0
    while len(pts) < L:
        if attempts >= max_attempts:
            raise ValidationError(f"random placement: no feasible layout within {max_attempts} draws")
        if used + 3 > len(stream):
            # restartable counter stream: regenerate a longer prefix
            stream = uniform(seed, len(stream) + block)
        u = stream[used:used + 3]
        used += 3
        attempts += 1
        p = np.array([center[0] + (u[0] - 0.5) * side, center[1] + (u[1] - 0.5) * side, H + u[2] * side])
        if all(np.linalg.norm(p - q) >= d_min for q in pts):
            pts.append(p)
    return np.array(pts)


# -- parsing ---------------------------------------------------------------------

def _mapping(doc: Any, where: str, allowed: set) -> dict:
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ScenarioError(where, "expected a mapping")
    unknown = sorted(set(map(str, doc)) - allowed)
    if unknown:
        raise ScenarioError(f"{where}.{unknown[0]}", "unknown field")
    return doc


def _number(d: dict, key: str, where: str, default=None, integer: bool = False):
    if key not in d or d[key] is None:
        if default is None:
            raise ScenarioError(f"{where}.{key}", "required field missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}", f"expected a number, got {v!r}")
    if integer:
        if float(v) != int(v):
            raise ScenarioError(f"{where}.{key}", "expected an integer")
        return int(v)
    if not math.isfinite(float(v)):
        raise ScenarioError(f"{where}.{key}", "must be finite")
    return float(v)


def _points(v, where: str) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(where, "expected a list of [x, y, z] points") from None
    if a.ndim != 2 or a.shape[1] != 3 or not np.all(np.isfinite(a)):
        raise ScenarioError(where, "expected a list of finite [x, y, z] points")
    return a


def _positive(value, where):
    if not value > 0:
        raise ScenarioError(where, "must be positive")
    return value


def _rf(doc: dict) -> RfParams:
    rf = _mapping(doc.get("rf"), "rf", _RF_KEYS)
    if "noise_w" in rf:
        noise = _positive(_number(rf, "noise_w", "rf"), "rf.noise_w")
    else:
        noise = dbm_to_watt(_number(rf, "noise_dbm", "rf", default=-94.0))
    wavelength = rf.get("wavelength_m")
    if "beta0" in rf:
        beta0 = _positive(_number(rf, "beta0", "rf"), "rf.beta0")
    elif "beta0_db" in rf or wavelength is None:
        beta0 = db_to_linear(_number(rf, "beta0_db", "rf", default=-61.4))
    else:
        beta0 = None
    if wavelength is None:
        return RfParams(beta0=beta0, wavelength=4.0 * math.pi * math.sqrt(beta0), noise_power=noise)
    wavelength = _positive(_number(rf, "wavelength_m", "rf"), "rf.wavelength_m")
    if beta0 is None:
        beta0 = beta0_from_wavelength(wavelength)
    if abs(beta0_from_wavelength(wavelength) - beta0) > 1e-9 * beta0:
        raise ScenarioError("rf.wavelength_m", "inconsistent with beta0 = (wavelength / 4pi)^2")
    return RfParams(beta0=beta0, wavelength=wavelength, noise_power=noise)


def _users(doc: dict, seed_override: Optional[int]):
    users = doc.get("users") or []
    if not isinstance(users, list):
        raise ScenarioError("users", "expected a list")
    if users:
        if "generator" in doc and doc["generator"]:
            raise ScenarioError("generator", "give either users or generator, not both")
        pos, pw = [], []
        for i, u in enumerate(users):
            where = f"users[{i}]"
            u = _mapping(u, where, _USER_KEYS)
            pos.append([_number(u, "x", where), _number(u, "y", where), 0.0])
            if "power_w" in u:
                p = _number(u, "power_w", where)
            else:
                p = dbm_to_watt(_number(u, "power_dbm", where, default=DEFAULT_POWER_DBM))
            if p < 0:
                raise ScenarioError(f"{where}.power", "must be non-negative")
            pw.append(p)
        return np.array(pos), pw
    gen = _mapping(doc.get("generator"), "generator", _GEN_KEYS)
    if not gen:
        raise ScenarioError("users", "no users and no generator given")
    K = _number(gen, "K", "generator", integer=True)
    if K < 1:
        raise ScenarioError("generator.K", "must be >= 1")
    Dx = _positive(_number(gen, "Dx", "generator", default=DEFAULT_AREA[0]), "generator.Dx")
    Dy = _positive(_number(gen, "Dy", "generator", default=DEFAULT_AREA[1]), "generator.Dy")
    seed = _number(gen, "seed", "generator", default=0, integer=True)
    if seed_override is not None:
        seed = int(seed_override)
    if seed < 0:
        raise ScenarioError("generator.seed", "must be a non-negative integer")
    p = dbm_to_watt(_number(gen, "power_dbm", "generator", default=DEFAULT_POWER_DBM))
    return generate_users(K, Dx, Dy, seed), [p] * K


def _solver(doc: dict) -> SolverSettings:
    s = _mapping(doc.get("solver"), "solver", _SOLVER_KEYS)
    base = SolverSettings()
    kw = {}
    for key in _SOLVER_KEYS:
        if key in s:
            integer = key.startswith("max_")
            kw[key] = _number(s, key, "solver", integer=integer)
            if not kw[key] > 0:
                raise ScenarioError(f"solver.{key}", "must be positive")
    return SolverSettings(**{**base.__dict__, **kw})


def scenario_from_dict(doc: Any, seed: Optional[int] = None) -> Scenario:
    """Validate an already-loaded document; ``seed`` overrides ``generator.seed``."""
    doc = _mapping(doc, "<root>", _SECTIONS)
    rf = _rf(doc)
    sw = _mapping(doc.get("swarm"), "swarm", _SWARM_KEYS)
    L = _number(sw, "L", "swarm", integer=True)
    if L < 1:
        raise ScenarioError("swarm.L", "must be >= 1")
    N = _number(sw, "N", "swarm", default=1, integer=True)
    if N < 1:
        raise ScenarioError("swarm.N", "must be >= 1")
    slot = _positive(_number(sw, "slot_s", "swarm", default=1.0), "swarm.slot_s")
    vmax = _positive(_number(sw, "vmax_mps", "swarm", default=30.0), "swarm.vmax_mps")
    dmin = _positive(_number(sw, "dmin_m", "swarm", default=5.0), "swarm.dmin_m")
    H = _positive(_number(sw, "H_m", "swarm", default=100.0), "swarm.H_m")
    q_i = q_f = None
    ends = sw.get("endpoints")
    if ends is not None:
        ends = _mapping(ends, "swarm.endpoints", {"initial", "final"})
        if "initial" not in ends:
            raise ScenarioError("swarm.endpoints.initial", "required field missing")
        q_i = _points(ends["initial"], "swarm.endpoints.initial")
        q_f = _points(ends["final"], "swarm.endpoints.final") if ends.get("final") is not None else None
        for name, pts in (("initial", q_i), ("final", q_f)):
            if pts is not None and len(pts) != L:
                raise ScenarioError(f"swarm.endpoints.{name}", f"expected L={L} points, got {len(pts)}")
    ref = sw.get("reference_point")
    if ref is not None:
        ref = _points([ref], "swarm.reference_point")[0]
    ue, powers = _users(doc, seed)
    try:
        return Scenario.create(ue, powers, L=L, N=N, slot_length=slot, v_max=vmax, d_min=dmin, H=H,
                               rf=rf, initial_positions=q_i, final_positions=q_f, reference_point=ref,
                               solver=_solver(doc))
    except ScenarioError:
        raise
    except ValidationError as exc:
        section = str(exc).split(":", 1)[0] if ":" in str(exc) else "<root>"
        raise ScenarioError(section, str(exc).split(":", 1)[-1].strip()) from None


def load_document(source: str) -> Any:
    """Load the YAML document from a file path or text, with located syntax errors."""
    text = source
    if "\n" not in source and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "<document>"
        raise ScenarioError(where, getattr(exc, "problem", None) or "malformed document") from None
    if doc is None:
        raise ScenarioError("<document>", "empty scenario")
    return doc


def parse_scenario(source: str, seed: Optional[int] = None) -> Scenario:
    """Parse a scenario from a file path or from YAML text.

    ``source`` is read as a file when it names an existing path, otherwise it
    is treated as the document itself.
    """
    return scenario_from_dict(load_document(source), seed)


# -- emission --------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    """Lossless document form of ``sc`` (linear units, explicit UEs)."""
    swarm = {"L": sc.L, "N": sc.N, "slot_s": sc.slot_length, "vmax_mps": sc.v_max,
             "dmin_m": sc.d_min, "H_m": sc.H, "reference_point": [float(v) for v in sc.reference_point]}
    if sc.has_endpoints:
        swarm["endpoints"] = {"initial": sc.initial_positions.tolist(), "final": sc.final_positions.tolist()}
    return {
        "rf": {"beta0": sc.rf.beta0, "wavelength_m": sc.rf.wavelength, "noise_w": sc.rf.noise_power},
        "swarm": swarm,
        "users": [{"x": float(u.position[0]), "y": float(u.position[1]), "power_w": u.tx_power}
                  for u in sc.users],
        "solver": dict(sc.solver.__dict__),
    }


def emit_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    """Field-by-field exact comparison (arrays compared elementwise)."""
    return scenario_to_dict(a) == scenario_to_dict(b) and all(
        np.array_equal(u.position, v.position) and u.reference_coefficient == v.reference_coefficient
        for u, v in zip(a.users, b.users)) and a.K == b.K
