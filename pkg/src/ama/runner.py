"""Command orchestration and result bundles.

Every command maps a scenario to a :class:`ResultBundle`, written as

* ``trajectory.csv``  uav, slot, x, y, z            (L*N rows)
* ``rates.csv``       ue, slot, sinr, rate          (K*N rows)
* ``trace.csv``       iteration, stage, objective   (one row per recorded iterate)
* ``summary.json``    min/average rates, statuses and command-specific fields
* ``timing.json``     wall-clock runtime

Numbers are written with 9 significant digits. Everything except
``timing.json`` is a deterministic function of the scenario and seed.
"""

from __future__ import annotations

import copy
import json
import math
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import channel, closedform, multiuser, single_ue
from .model import Scenario, SwarmTrajectory, ValidationError, watt_to_dbm
from .scenario import random_placement, scenario_from_dict

SIG = 9

COMMANDS = ("place-single", "place-two-ue-hyperbola", "place-joint", "place-successive",
            "traj-single-sca", "traj-maxmin-snr", "traj-altopt", "bench-circular-place",
            "bench-circular-traj", "bench-suite")

PLACEMENT_SUITE = ("place-successive", "place-joint", "bench-circular-place", "bench-random-place")
TRAJECTORY_SUITE = ("traj-altopt", "traj-maxmin-snr", "bench-circular-traj")


def fmt(v) -> str:
    return format(float(v), f".{SIG}g")


def _round(v):
    """Recursively round floats to SIG significant digits for the JSON summary."""
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if not math.isfinite(f) else float(fmt(f))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _round(v.tolist())
    return v


@dataclass
class ResultBundle:
    command: str
    scenario: Scenario
    positions: np.ndarray            # (L, N, 3)
    sinr: np.ndarray                 # (K, N)
    rates: np.ndarray                # (K, N)
    trace: list                      # (stage, objective) pairs
    statuses: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    runtime: float = 0.0
    endpoints_imposed: bool = True

    @property
    def average(self) -> np.ndarray:
        return self.rates.mean(axis=1)

    @property
    def min_average(self) -> float:
        return float(self.average.min())

    def summary(self) -> dict:
        sc = self.scenario
        ends = self.endpoints_imposed and sc.N > 1 and sc.has_endpoints
        feas = SwarmTrajectory(self.positions).violations(sc, endpoints=ends)
        out = {
            "command": self.command,
            "min_average_rate": self.min_average,
            "average_rates": self.average.tolist(),
            "K": sc.K, "L": sc.L, "N": self.positions.shape[1], "slot_s": sc.slot_length,
            "wavelength_m": sc.rf.wavelength, "beta0": sc.rf.beta0,
            "power_dbm": [watt_to_dbm(u.tx_power) if u.tx_power > 0 else None for u in sc.users],
            "solver_statuses": dict(sorted(Counter(self.statuses).items())),
            "trace_length": len(self.trace),
            "max_violation_m": feas.max_violation,
            "endpoints_imposed": bool(ends),
        }
        out.update(self.extra)
        return _round(out)

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        L, N, _ = self.positions.shape
        with open(os.path.join(out_dir, "trajectory.csv"), "w", newline="\n") as fh:
            fh.write("uav,slot,x,y,z\n")
            for l in range(L):
                for n in range(N):
                    x, y, z = self.positions[l, n]
                    fh.write(f"{l},{n},{fmt(x)},{fmt(y)},{fmt(z)}\n")
        K = self.rates.shape[0]
        with open(os.path.join(out_dir, "rates.csv"), "w", newline="\n") as fh:
            fh.write("ue,slot,sinr,rate\n")
            for k in range(K):
                for n in range(N):
                    fh.write(f"{k},{n},{fmt(self.sinr[k, n])},{fmt(self.rates[k, n])}\n")
        with open(os.path.join(out_dir, "trace.csv"), "w", newline="\n") as fh:
            fh.write("iteration,stage,objective\n")
            for i, (stage, v) in enumerate(self.trace):
                fh.write(f"{i},{stage},{fmt(v)}\n")
        _write_json(os.path.join(out_dir, "summary.json"), self.summary())
        _write_json(os.path.join(out_dir, "timing.json"), {"runtime_s": self.runtime})


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands ------------------------------------------------------------------

def _placement_scenario(sc: Scenario) -> Scenario:
    return sc.with_changes(N=1, initial_positions=None, final_positions=None)


def _ue_center(sc: Scenario):
    c = sc.ue_positions.mean(axis=0)
    return float(c[0]), float(c[1])


def _bundle(command, sc, positions, trace, statuses=(), extra=None, beamformers=None) -> ResultBundle:
    pos = np.asarray(positions, float)
    if pos.ndim == 2:
        pos = pos[:, None, :]
    rep = channel.evaluate(sc, pos, beamformers)
    return ResultBundle(command=command, scenario=sc, positions=pos, sinr=rep.sinr, rates=rep.rates,
                        trace=list(trace), statuses=list(statuses), extra=dict(extra or {}))


def _require_single_ue(sc: Scenario, command: str):
    if sc.K != 1:
        raise ValidationError(f"{command} needs exactly one UE (scenario has K={sc.K})")


def _place_single(sc, seed):
    _require_single_ue(sc, "place-single")
    p = _placement_scenario(sc)
    w = p.ue_positions[0]
    if p.L == 1:
        pos = closedform.optimal_single_uav(w, p.H)[None]
        extra = {"branch": "above_ue"}
    elif p.L == 2:
        sol = closedform.optimal_two_uav(p.H, p.d_min, w)
        pos = np.array(sol.positions)
        extra = {"branch": sol.branch, "x_star": sol.x_star, "zeta": sol.zeta}
    else:
        raise ValidationError("place-single has a closed form only for L = 1 or 2")
    b = _bundle("place-single", p, pos, [])
    b.trace = [("closed_form", b.min_average)]
    b.extra.update(extra)
    return b


def _place_hyperbola(sc, seed):
    if sc.K != 2:
        raise ValidationError(f"place-two-ue-hyperbola needs exactly two UEs (scenario has K={sc.K})")
    p = _placement_scenario(sc)
    hp = closedform.successive_hyperbola_placement(p.L, 0.0, p.rf.wavelength, p.H, p.d_min,
                                                   ue_pair=p.ue_positions)
    b = _bundle("place-two-ue-hyperbola", p, hp.positions, [])
    h = channel.channel_matrix(p, b.positions)[:, 0]
    b.trace = [("closed_form", b.min_average)]
    b.extra.update({"nu": hp.nu, "semi_axis_m": hp.a, "half_focal_m": hp.X,
                    "correlation_sq": channel.correlation_sq(h[0], h[1])})
    return b


def _place_joint(sc, seed):
    _require_single_ue(sc, "place-joint")
    p = _placement_scenario(sc)
    res = single_ue.joint_placement(p)
    b = _bundle("place-joint", p, res.positions, [("rate", v) for v in res.trace.objectives],
                res.trace.statuses)
    b.extra.update({"sca_iterations": res.trace.iterations, "converged": res.trace.converged})
    return b


def _place_successive(sc, seed):
    _require_single_ue(sc, "place-successive")
    p = _placement_scenario(sc)
    res = single_ue.successive_placement(p)
    trace, statuses = [], []
    for j, tr in enumerate(res.traces, start=1):
        trace += [(f"uav{j}", v) for v in tr.objectives]
        statuses += tr.statuses
    b = _bundle("place-successive", p, res.positions, trace, statuses)
    b.extra["subproblems"] = res.subproblems
    return b


def _bench_circular_place(sc, seed):
    p = _placement_scenario(sc)
    pos = closedform.circular_placement(p.L, p.d_min, p.H, center=_ue_center(p))
    b = _bundle("bench-circular-place", p, pos, [])
    b.trace = [("closed_form", b.min_average)]
    return b


def _bench_random_place(sc, seed):
    p = _placement_scenario(sc)
    s = 0 if seed is None else int(seed)
    pos = random_placement(p.L, p.H, p.d_min, s, center=_ue_center(p))
    b = _bundle("bench-random-place", p, pos, [])
    b.trace = [("sample", b.min_average)]
    b.extra["seed"] = s
    return b


def _traj_single(sc, seed):
    _require_single_ue(sc, "traj-single-sca")
    init = multiuser.initial_trajectory(sc, seed)
    tr = single_ue.sca_trajectory_single_ue(sc, init)
    b = _bundle("traj-single-sca", sc, tr.trajectory.positions,
                [("sum_rate", v) for v in tr.objectives], tr.statuses)
    b.extra.update({"sca_iterations": tr.iterations, "converged": tr.converged})
    return b


def _traj_snr(sc, seed, stage1=None):
    s1 = stage1 if stage1 is not None else multiuser.maxmin_snr_trajectory(sc, seed=seed)
    b = _bundle("traj-maxmin-snr", sc, s1.trajectory.positions,
                [("min_avg_snr", v) for v in s1.objectives], s1.statuses)
    b.extra.update({"sca_iterations": s1.iterations, "converged": s1.converged,
                    "min_average_snr": s1.objectives[-1]})
    return b


def _traj_altopt(sc, seed, stage1=None):
    res = multiuser.alternating_optimize(sc, seed=seed, stage1=stage1)
    trace = [("min_avg_snr", v) for v in res.stage1.objectives] + [("fa_min_avg_rate", v) for v in res.trace]
    b = _bundle("traj-altopt", sc, res.trajectory.positions, trace, res.stage1.statuses + res.statuses,
                beamformers=res.beamformers)
    b.extra.update({"outer_iterations": res.iterations, "converged": res.converged,
                    "fa_objective": res.fa_objective, "exact_objective": res.exact_objective})
    return b


def _bench_circular_traj(sc, seed):
    tr = multiuser.circular_trajectory(sc, center=_ue_center(sc))
    b = _bundle("bench-circular-traj", sc, tr.positions, [])
    b.endpoints_imposed = False  # the ring formula has no endpoint constraint
    b.trace = [("closed_form", b.min_average)]
    return b


_RUNNERS: dict[str, Callable] = {
    "place-single": _place_single,
    "place-two-ue-hyperbola": _place_hyperbola,
    "place-joint": _place_joint,
    "place-successive": _place_successive,
    "traj-single-sca": _traj_single,
    "traj-maxmin-snr": _traj_snr,
    "traj-altopt": _traj_altopt,
    "bench-circular-place": _bench_circular_place,
    "bench-random-place": _bench_random_place,
    "bench-circular-traj": _bench_circular_traj,
}


def suite_methods(sc: Scenario) -> tuple:
    """Placement suite for one UE with N = 1, trajectory suite otherwise."""
    return PLACEMENT_SUITE if (sc.K == 1 and sc.N == 1) else TRAJECTORY_SUITE


def run_suite(sc: Scenario, seed: Optional[int] = None) -> dict:
    """Every benchmark method on ``sc``; returns {method: ResultBundle}."""
    out = {}
    methods = suite_methods(sc)
    stage1 = None
    for m in methods:
        t0 = time.perf_counter()
        if m == "traj-altopt":
            stage1 = multiuser.maxmin_snr_trajectory(sc, seed=seed)
            out[m] = _traj_altopt(sc, seed, stage1=stage1)
        elif m == "traj-maxmin-snr" and stage1 is not None:
            out[m] = _traj_snr(sc, seed, stage1=stage1)
        else:
            out[m] = _RUNNERS[m](sc, seed)
        out[m].runtime = time.perf_counter() - t0
    return out


def run(command: str, sc: Scenario, out_dir: Optional[str] = None, seed: Optional[int] = None):
    """Execute ``command``; writes the bundle(s) when ``out_dir`` is given.

    Returns a :class:`ResultBundle`, or for ``bench-suite`` a dict of them.
    """
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    t0 = time.perf_counter()
    if command == "bench-suite":
        res = run_suite(sc, seed)
        if out_dir is not None:
            for m, b in res.items():
                b.write(os.path.join(out_dir, m))
            summary = {"command": command, "methods": list(res),
                       "min_average_rate": {m: b.min_average for m, b in res.items()},
                       "ordering": sorted(res, key=lambda m: -res[m].min_average)}
            _write_json(os.path.join(out_dir, "summary.json"), _round(summary))
            _write_json(os.path.join(out_dir, "timing.json"),
                        {"runtime_s": time.perf_counter() - t0,
                         "methods": {m: b.runtime for m, b in res.items()}})
        return res
    b = _RUNNERS[command](sc, seed)
    b.runtime = time.perf_counter() - t0
    if out_dir is not None:
        b.write(out_dir)
    return b


# -- sweeps ----------------------------------------------------------------------

SWEEP_AXES = ("power_dbm", "K")


def _with_value(doc: dict, axis: str, value) -> dict:
    d = copy.deepcopy(doc)
    users = d.get("users") or []
    if axis == "power_dbm":
        if users:
            for u in users:
                u.pop("power_w", None)
                u["power_dbm"] = float(value)
        else:
            d.setdefault("generator", {})["power_dbm"] = float(value)
    else:
        k = int(value)
        if users:
            if k > len(users):
                raise ValidationError(f"sweep K={k} exceeds the {len(users)} listed users")
            d["users"] = users[:k]
        else:
            d.setdefault("generator", {})["K"] = k
    return d


def sweep(axis: str, values, doc: dict, out_dir: Optional[str] = None, seed: Optional[int] = None):
    """One bench-suite per value of ``axis``; returns (methods, rows of (value, rate per method))."""
    if axis not in SWEEP_AXES:
        raise ValidationError(f"sweep axis must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValidationError("sweep values must be sorted")
    rows, methods = [], None
    for v in values:
        sc = scenario_from_dict(_with_value(doc, axis, v), seed)
        point_dir = None if out_dir is None else os.path.join(out_dir, f"{axis}_{fmt(v)}")
        res = run("bench-suite", sc, point_dir, seed)
        methods = methods or list(res)
        rows.append((v, [res[m].min_average for m in methods]))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="\n") as fh:
            fh.write(",".join([axis] + list(methods)) + "\n")
            for v, rates in rows:
                fh.write(",".join([fmt(v)] + [fmt(r) for r in rates]) + "\n")
    return methods, rows
