"""Single-UE optimizers: SCA trajectory design, joint placement and successive placement.

With one UE and MRC the per-slot rate is log2(1 + pbar beta0 sum_l 1/||q_l - w||^2),
which is convex in the squared distances; its tangent plane in those squared
distances gives a concave quadratic minorant in the positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import solver, swarm
from .closedform import circular_placement
from .model import Scenario, SwarmTrajectory, ValidationError

LN2 = math.log(2.0)


class InfeasibleInitializationError(ValueError):
    """The supplied starting trajectory violates a swarm constraint."""


def _snr_scale(scenario: Scenario) -> float:
    return float(scenario.pbars[0] * scenario.rf.beta0)


def _sq_dist(q, w) -> np.ndarray:
    d = np.asarray(q, float) - np.asarray(w, float)
    return np.sum(d * d, axis=-1)


def rate(q, pbar: float, beta0: float, w) -> float:
    """log2(1 + pbar beta0 sum_l 1/||q_l - w||^2) for a placement q of shape (L, 3)."""
    return float(np.log2(1.0 + pbar * beta0 * np.sum(1.0 / _sq_dist(q, w))))


def rate_lower_bound(q, q_anchor, pbar: float, beta0: float, w) -> float:
    """Tangent minorant of :func:`rate` in the squared distances, anchored at ``q_anchor``."""
    u = _sq_dist(np.atleast_2d(q), w)
    ut = _sq_dist(np.atleast_2d(q_anchor), w)
    g = pbar * beta0
    s = g * np.sum(1.0 / ut)
    coef = g / ut ** 2 / ((1.0 + s) * LN2)
    return float(np.log2(1.0 + s) - np.sum(coef * (u - ut)))


def collision_lower_bound(q_l, q_lp, qt_l, qt_lp) -> float:
    """Affine minorant 2 D.(q_l - q_l') - ||D||^2 of ||q_l - q_l'||^2, D the anchor difference."""
    D = np.asarray(qt_l, float) - np.asarray(qt_lp, float)
    return float(2.0 * D @ (np.asarray(q_l, float) - np.asarray(q_lp, float)) - D @ D)


@dataclass
class ScaTrace:
    objectives: list
    iterations: int
    converged: bool
    trajectory: SwarmTrajectory
    statuses: list = field(default_factory=list)


def sum_rate(scenario: Scenario, positions: np.ndarray) -> float:
    """Sum over slots of the single-UE MRC rate."""
    g = _snr_scale(scenario)
    w = scenario.users[0].position
    inv = 1.0 / _sq_dist(positions, w)  # (L, N)
    return float(np.sum(np.log2(1.0 + g * inv.sum(axis=0))))


def _rate_objective(dim, idx, anchor, scenario):
    """Concave minorant of the slot-summed rate as an :class:`solver.Objective`."""
    g = _snr_scale(scenario)
    w = scenario.users[0].position
    ut = _sq_dist(anchor, w)  # (L, N)
    s = g * np.sum(1.0 / ut, axis=0)
    coef = g / ut ** 2 / ((1.0 + s)[None, :] * LN2)
    live = idx[:, 0, 0] >= 0
    # fixed UAVs only contribute constants, which do not move the maximizer
    const = float(np.sum(np.log2(1.0 + s)) + np.sum(coef[live] * ut[live]))
    qidx = idx[live].reshape(-1, 3)
    return solver.Objective(dim, constant=const, quad_idx=qidx,
                            quad_center=np.broadcast_to(w, qidx.shape),
                            quad_rho=2.0 * coef[live].ravel())


def _check_start(traj: SwarmTrajectory, scenario: Scenario, endpoints: bool, speed: bool):
    rep = traj.violations(scenario, endpoints=endpoints)
    worst = max(rep.collision, rep.altitude, rep.endpoints, rep.speed if speed else 0.0)
    if worst > rep.tol:
        raise InfeasibleInitializationError(f"initial trajectory is infeasible (worst violation {worst:.3g} m)")


def _sca_rate(scenario: Scenario, positions: np.ndarray, *, speed: bool, endpoints: bool,
              eps: float, max_outer: int) -> ScaTrace:
    L, N = scenario.L, scenario.N
    q = np.array(positions, float)
    traj = SwarmTrajectory(q)
    _check_start(traj, scenario, endpoints, speed)
    idx = swarm.full_layout(L, N)
    dim = L * N * 3
    opts = solver.SolveOptions(scenario.solver.feas_tol, scenario.solver.opt_tol, scenario.solver.max_iters)
    if endpoints:
        fi, fv = swarm.endpoint_pins(idx, scenario)
    else:
        fi, fv = np.zeros(0, np.int64), np.zeros(0)
    obj = sum_rate(scenario, q)
    history, statuses = [obj], []
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        blocks = swarm.trajectory_blocks(dim, idx, q, scenario, speed=speed)
        prob = solver.ConvexSubproblem(dim, _rate_objective(dim, idx, q, scenario), blocks,
                                       q.ravel(), fi, fv)
        rep = solver.solve(prob, opts)
        statuses.append(rep.status)
        cand = rep.x.reshape(L, N, 3)
        new = sum_rate(scenario, cand)
        if rep.status == solver.INFEASIBLE_START or not new >= obj:
            converged = True
            break
        q, prev, obj = cand, obj, new
        history.append(obj)
        if (obj - prev) / abs(prev) < eps:
            converged = True
            break
    return ScaTrace(objectives=history, iterations=it, converged=converged,
                    trajectory=SwarmTrajectory(q), statuses=statuses)


def sca_trajectory_single_ue(scenario: Scenario, initial: SwarmTrajectory | np.ndarray) -> ScaTrace:
    """Maximize the slot-summed rate of the single UE from a feasible starting trajectory."""
    if scenario.K != 1:
        raise ValidationError("single-UE trajectory design needs exactly one UE")
    pos = initial.positions if isinstance(initial, SwarmTrajectory) else np.asarray(initial, float)
    return _sca_rate(scenario, pos, speed=True, endpoints=scenario.has_endpoints,
                     eps=scenario.solver.eps1, max_outer=scenario.solver.max_outer)


@dataclass
class PlacementResult:
    positions: np.ndarray
    rate: float
    trace: ScaTrace | None = None
    subproblems: int = 0
    traces: list = field(default_factory=list)


def _placement_scenario(scenario: Scenario) -> Scenario:
    if scenario.K != 1:
        raise ValidationError("placement needs exactly one UE")
    return scenario.with_changes(N=1, initial_positions=None, final_positions=None)


def joint_placement(scenario: Scenario, init: str = "successive") -> PlacementResult:
    """SCA over all L positions at once (no speed or endpoint constraints).

    ``init="successive"`` starts from :func:`successive_placement`;
    ``init="circular"`` starts from the d_min-spaced ring above the UE, which
    is a stationary point of the linearized problem for symmetric reasons.
    """
    sc = _placement_scenario(scenario)
    w = sc.users[0].position
    if sc.L == 1:
        start = np.array([[w[0], w[1], sc.H]])
    elif init == "circular":
        start = circular_placement(sc.L, sc.d_min, sc.H, center=w[:2])
    elif init == "successive":
        start = successive_placement(sc).positions
    else:
        raise ValidationError(f"unknown initializer {init!r}")
    tr = _sca_rate(sc, start[:, None, :], speed=False, endpoints=False,
                   eps=sc.solver.eps1, max_outer=sc.solver.max_outer)
    pos = tr.trajectory.positions[:, 0]
    return PlacementResult(positions=pos, rate=tr.objectives[-1], trace=tr, subproblems=tr.iterations)


def _start_candidates(placed: np.ndarray, d_min: float, w: np.ndarray) -> np.ndarray:
    """Feasible points just outside d_min of an already placed UAV, closest to the UE first."""
    step = d_min * (1.0 + 1e-9)
    th = 2.0 * math.pi * np.arange(12) / 12.0
    ring = np.column_stack([np.cos(th), np.sin(th), np.zeros(12)])
    dirs = np.vstack([ring, [[0.0, 0.0, 1.0]]])
    cands = (placed[:, None, :] + step * dirs[None]).reshape(-1, 3)
    gaps = np.linalg.norm(cands[:, None, :] - placed[None], axis=-1).min(axis=1)
    ok = cands[gaps >= d_min]
    order = np.argsort(_sq_dist(ok, w), kind="stable")
    return ok[order]


def successive_placement(scenario: Scenario) -> PlacementResult:
    """Place UAVs one at a time, each maximizing the rate given those already placed.

    The first UAV sits directly above the UE; every later one solves one
    single-UAV SCA problem, so exactly L - 1 placement problems are solved.
    """
    sc = _placement_scenario(scenario)
    w = sc.users[0].position
    g = _snr_scale(sc)
    placed = np.array([[w[0], w[1], sc.H]])
    opts = solver.SolveOptions(sc.solver.feas_tol, sc.solver.opt_tol, sc.solver.max_iters)
    traces = []
    for _ in range(1, sc.L):
        C = 1.0 + g * np.sum(1.0 / _sq_dist(placed, w))
        q = _start_candidates(placed, sc.d_min, w)[0]

        def value(p):
            return math.log2(C + g / float(_sq_dist(p, w)))

        obj = value(q)
        history, statuses, converged = [obj], [], False
        for it in range(1, sc.solver.max_outer + 1):
            u = float(_sq_dist(q, w))
            coef = g / u ** 2 / ((C + g / u) * LN2)
            objective = solver.Objective(3, constant=obj + coef * u, quad_idx=[[0, 1, 2]],
                                         quad_center=[w], quad_rho=2.0 * coef)
            anchor = np.vstack([placed, q[None]])[:, None, :]
            idx = -np.ones((len(placed) + 1, 1, 3), np.int64)
            idx[-1, 0] = np.arange(3)
            blocks = [swarm.collision_block(3, idx, anchor, sc.d_min), solver.half_space(3, [2], sc.H)]
            rep = solver.solve(solver.ConvexSubproblem(3, objective, blocks, q), opts)
            statuses.append(rep.status)
            new = value(rep.x)
            if rep.status == solver.INFEASIBLE_START or not new >= obj:
                converged = True
                break
            q, prev, obj = rep.x, obj, new
            history.append(obj)
            if (obj - prev) / abs(prev) < sc.solver.eps1:
                converged = True
                break
        traces.append(ScaTrace(objectives=history, iterations=it, converged=converged,
                               trajectory=SwarmTrajectory(q[None, None, :]), statuses=statuses))
        placed = np.vstack([placed, q[None]])
    return PlacementResult(positions=placed, rate=rate(placed, sc.pbars[0], sc.rf.beta0, w),
                           subproblems=sc.L - 1, traces=traces)
