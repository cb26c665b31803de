"""Multi-UE trajectory design: max-min SNR initialization and alternating beamforming/trajectory updates.

The second stage freezes channel amplitudes at the first-stage trajectory and
lets only the spherical phases follow the UAVs. For UAV ``l`` the beam gain
``g_{k,i} = |v_k^H h_i|^2`` splits into ``f`` (cross terms that move with
``q_l``) and ``f_bar`` (everything else); ``f`` is sandwiched between two
quadratics with curvature ``omega``, which makes each per-UAV problem convex.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import channel, solver, swarm
from .closedform import circular_placement, ring_radius
from .model import Scenario, SwarmTrajectory, ValidationError
from .rng import uniform

log = logging.getLogger(__name__)
LN2 = math.log(2.0)


class InfeasibleTrajectoryError(ValueError):
    """A trajectory (typically an initializer) violates the swarm constraints."""


# -- simple bounds ---------------------------------------------------------------

def inv_sq_dist_lower_bound(q, q_anchor, w) -> float:
    """Tangent minorant of 1/||q - w||^2 in the distance ||q - w||, anchored at ``q_anchor``."""
    r = float(np.linalg.norm(np.asarray(q, float) - np.asarray(w, float)))
    rt = float(np.linalg.norm(np.asarray(q_anchor, float) - np.asarray(w, float)))
    return 1.0 / rt ** 2 - 2.0 / rt ** 3 * (r - rt)


def exp_linearize_lb(mu: float, mu_anchor: float) -> float:
    """Tangent minorant (1 + mu - mu~) e^{mu~} of e^{mu}."""
    return (1.0 + mu - mu_anchor) * math.exp(mu_anchor)


def f_bounds(q, q_anchor, value: float, gradient, omega: float):
    """Quadratic lower and upper surrogates of ``f`` around ``q_anchor``."""
    d = np.asarray(q, float) - np.asarray(q_anchor, float)
    lin = value + float(np.asarray(gradient, float) @ d)
    gap = 0.5 * omega * float(d @ d)
    return lin - gap, lin + gap


# -- fixed-amplitude channels ------------------------------------------------

class FixedAmplitudeChannelModel:
    """Channels with amplitudes sqrt(beta0)/r_hat from an anchor trajectory and live spherical phases."""

    def __init__(self, scenario: Scenario, anchor: np.ndarray):
        self.scenario = scenario
        self.anchor = np.array(anchor, float)
        self.anchor_dist = channel.ue_uav_distances(self.anchor, scenario.ue_positions)
        self.amplitude = math.sqrt(scenario.rf.beta0) / self.anchor_dist  # (K, N, L)

    def channels(self, positions: np.ndarray) -> np.ndarray:
        return channel.fixed_amplitude_channels(self.scenario, positions, self.anchor)


def fa_objective(model: FixedAmplitudeChannelModel, positions: np.ndarray, V: np.ndarray):
    """min_k of the slot-summed rate with beamformers V under the fixed-amplitude model."""
    h = model.channels(positions)
    rates = np.log2(1.0 + channel.sinr_matrix(h, V, model.scenario.pbars))
    return float(rates.sum(axis=1).min()), rates


# -- scalar surrogate pieces -----------------------------------------------------

@dataclass(frozen=True)
class FrozenSlot:
    """Everything ``f_{k,i,l}[n]`` needs besides ``q_l[n]``.

    ``positions`` are the live UAV positions at the slot (row ``l`` is
    ignored), ``amplitude`` the frozen per-UAV amplitudes of UE ``i`` and ``v``
    the receive vector of UE ``k``.
    """

    l: int
    w: np.ndarray
    positions: np.ndarray
    amplitude: np.ndarray
    v: np.ndarray
    wavenumber: float

    def zetas(self) -> np.ndarray:
        z = 2.0 * self.amplitude[self.l] * self.amplitude * abs(self.v[self.l]) * np.abs(self.v)
        z[self.l] = 0.0
        return z

    def angles(self) -> np.ndarray:
        return np.angle(self.v[self.l] * np.conj(self.v))


def g_decompose(k: int, i: int, l: int, n: int, channels: np.ndarray, V: np.ndarray):
    """Split |v_k^H h_i|^2 at slot n into the UAV-l cross terms f and the remainder f_bar."""
    h = channels[i, n]
    v = V[k, n]
    s = np.vdot(v, h)
    z = np.conj(h[l]) * v[l] * (s - np.conj(v[l]) * h[l])
    f = 2.0 * z.real
    return float(f), float(abs(s) ** 2 - f)


def f_value_and_gradient(q_l, frozen: FrozenSlot):
    """Cosine-sum value of f at ``q_l`` and its gradient in ``q_l``."""
    q = np.asarray(q_l, float)
    k0 = frozen.wavenumber
    r_l = float(np.linalg.norm(q - frozen.w))
    r = np.linalg.norm(frozen.positions - frozen.w, axis=-1)
    zeta = frozen.zetas()
    phase = k0 * (r_l - r) + frozen.angles()
    value = float(np.sum(zeta * np.cos(phase)))
    grad = -k0 * float(np.sum(zeta * np.sin(phase))) * (q - frozen.w) / r_l
    return value, grad


def lipschitz_omega(frozen: FrozenSlot) -> float:
    """Curvature bound (2 pi / lambda)^2 * sum of zeta for the surrogates of f."""
    return frozen.wavenumber ** 2 * float(np.sum(frozen.zetas()))


def frozen_slot(model: FixedAmplitudeChannelModel, positions: np.ndarray, V: np.ndarray,
                k: int, i: int, l: int, n: int) -> FrozenSlot:
    sc = model.scenario
    return FrozenSlot(l=l, w=sc.ue_positions[i], positions=np.array(positions[:, n]),
                      amplitude=model.amplitude[i, n], v=V[k, n], wavenumber=sc.rf.wavenumber)


# -- vectorized surrogate coefficients -------------------------------------------

@dataclass
class SurrogateCoefficients:
    """Per (k, i, n) surrogate data for one UAV ``l`` at the anchor trajectory."""

    l: int
    g: np.ndarray       # (K, K, N) current beam gains |v_k^H h_i|^2
    f: np.ndarray       # (K, K, N) UAV-l cross terms
    grad: np.ndarray    # (K, K, N, 3) gradient of f in q_l
    omega: np.ndarray   # (K, K, N) curvature bound

    @property
    def f_bar(self) -> np.ndarray:
        return self.g - self.f


def surrogate_coefficients(model: FixedAmplitudeChannelModel, positions: np.ndarray,
                           V: np.ndarray, l: int) -> SurrogateCoefficients:
    sc = model.scenario
    k0 = sc.rf.wavenumber
    h = model.channels(positions)  # (K, N, L)
    s = np.einsum("knl,inl->kin", np.conj(V), h)
    hl = h[:, :, l]                # (i, n)
    vl = V[:, :, l]                # (k, n)
    B = s - np.conj(vl)[:, None, :] * hl[None, :, :]
    Z = np.conj(hl)[None] * vl[:, None, :] * B
    diff = positions[l][None, :, :] - sc.ue_positions[:, None, :]   # (i, n, 3)
    unit = diff / np.linalg.norm(diff, axis=-1, keepdims=True)
    grad = -2.0 * k0 * Z.imag[..., None] * unit[None]
    a = model.amplitude                         # (i, n, L)
    av = a[None] * np.abs(V)[:, None]           # (k, i, n, L)
    own = av[..., l]
    omega = k0 ** 2 * 2.0 * own * (av.sum(axis=-1) - own)
    return SurrogateCoefficients(l=l, g=np.abs(s) ** 2, f=2.0 * Z.real, grad=grad, omega=omega)


# -- slacks ----------------------------------------------------------------------

@dataclass
class SlackState:
    eta: np.ndarray
    mu: np.ndarray
    gamma: float

    @classmethod
    def at(cls, gains: np.ndarray, pbars) -> "SlackState":
        """Tight slacks for beam gains g[k, i, n]."""
        p = np.asarray(pbars, float)[None, :, None]
        total = np.sum(p * gains, axis=1)
        K = gains.shape[0]
        interference = np.sum(p * gains * (1.0 - np.eye(K))[:, :, None], axis=1)
        eta = np.log1p(total)
        mu = np.log1p(interference)
        gamma = float(np.min(np.sum(eta - mu, axis=1)) / LN2)
        return cls(eta=eta, mu=mu, gamma=gamma)


# -- benchmarks and initializers ---------------------------------------------------

def circular_trajectory(scenario: Scenario, center=(0.0, 0.0)) -> SwarmTrajectory:
    """Rigid ring of radius d_min / (2 sin(pi/L)) completing one turn over the N slots.

    Endpoints are not imposed. Raises when the per-slot chord exceeds the
    displacement budget.
    """
    L, N = scenario.L, scenario.N
    if L < 2:
        raise ValidationError("circular trajectory needs L >= 2")
    if N < 2:
        raise ValidationError("circular trajectory needs N >= 2")
    R = ring_radius(L, scenario.d_min)
    chord = 2.0 * R * math.sin(math.pi / (N - 1))
    if chord > scenario.v_step:
        raise InfeasibleTrajectoryError(
            f"circular trajectory needs {chord:.6g} m per slot, above the budget {scenario.v_step:.6g} m")
    th = 2.0 * math.pi * np.arange(N)[None, :] / (N - 1) + 2.0 * math.pi * np.arange(L)[:, None] / L
    pos = np.stack([center[0] + R * np.cos(th), center[1] + R * np.sin(th),
                    np.full((L, N), scenario.H)], axis=-1)
    return SwarmTrajectory(pos)


def initial_trajectory(scenario: Scenario, seed: Optional[int] = None) -> SwarmTrajectory:
    """Feasible start for the SNR stage.

    With endpoints the swarm flies the straight segment from start to end
    positions at constant speed (hovering when they coincide); without them it
    is the circular trajectory (the ring itself when N = 1). A seed adds a
    uniform perturbation of at most 1 m per free coordinate, halved until
    feasible.
    """
    L, N = scenario.L, scenario.N
    if scenario.has_endpoints:
        t = np.linspace(0.0, 1.0, N)[None, :, None] if N > 1 else np.zeros((1, 1, 1))
        qi = scenario.initial_positions[:, None, :]
        qf = scenario.final_positions[:, None, :]
        pos = qi + t * (qf - qi)
    elif L == 1:
        w = scenario.ue_positions.mean(axis=0)
        pos = np.repeat(np.array([[[w[0], w[1], scenario.H]]]), N, axis=1)
    elif N == 1:
        pos = circular_placement(L, scenario.d_min, scenario.H)[:, None, :]
    else:
        pos = circular_trajectory(scenario).positions
    traj = SwarmTrajectory(pos)
    if not traj.is_feasible(scenario):
        raise InfeasibleTrajectoryError("no feasible initial trajectory for this scenario")
    if seed is None:
        return traj
    noise = uniform(seed, pos.size, -1.0, 1.0).reshape(pos.shape)
    noise[..., 2] = np.abs(noise[..., 2])
    if scenario.has_endpoints:
        noise[:, 0] = 0.0
        noise[:, -1] = 0.0
    scale = 1.0
    for _ in range(40):
        cand = SwarmTrajectory(pos + scale * noise)
        if cand.is_feasible(scenario):
            return cand
        scale *= 0.5
    return traj


# -- stage 1: max-min average SNR -----------------------------------------------

def average_snr(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Interference-free MRC SNR of every UE averaged over the slots."""
    r2 = channel.ue_uav_distances(positions, scenario.ue_positions) ** 2  # (K, N, L)
    return scenario.pbars * scenario.rf.beta0 * np.sum(1.0 / r2, axis=(1, 2)) / scenario.N


@dataclass
class SnrTrace:
    objectives: list
    iterations: int
    converged: bool
    trajectory: SwarmTrajectory
    statuses: list = field(default_factory=list)


def maxmin_snr_trajectory(scenario: Scenario, initial: Optional[SwarmTrajectory] = None,
                          seed: Optional[int] = None) -> SnrTrace:
    """SCA on the epigraph form of max_Q min_k average SNR."""
    L, N, K = scenario.L, scenario.N, scenario.K
    traj = initial if initial is not None else initial_trajectory(scenario, seed)
    if not traj.is_feasible(scenario):
        raise InfeasibleTrajectoryError("initial trajectory is infeasible")
    q = np.array(traj.positions)
    nq = 3 * L * N
    # variables: positions, one distance epigraph tau per (k, l, n), then Psi
    ntau = K * L * N
    dim = nq + ntau + 1
    idx = swarm.full_layout(L, N)
    fi, fv = swarm.endpoint_pins(idx, scenario)
    st = scenario.solver
    opts = solver.SolveOptions(st.feas_tol, st.opt_tol, st.max_iters)
    w = scenario.ue_positions
    gain = scenario.pbars * scenario.rf.beta0 / N
    psi = float(average_snr(scenario, q).min())
    history, statuses, converged = [psi], [], False
    objective = solver.Objective(dim, linear=np.eye(dim)[-1])
    tau_idx = nq + np.arange(ntau)
    term_idx = np.tile(idx.reshape(-1, 3), (K, 1))
    term_center = np.repeat(w, L * N, axis=0)
    # ||q - w_k|| - tau <= 0
    dist_rows = solver.norm_sum(dim, sp.csr_matrix((-np.ones(ntau), (np.arange(ntau), tau_idx)),
                                                   shape=(ntau, dim)),
                                np.zeros(ntau), np.arange(ntau), term_idx, term_center, 1.0)
    it = 0
    for it in range(1, st.max_stage1 + 1):
        rt = channel.ue_uav_distances(q, w)                          # (K, N, L)
        rt_flat = rt.transpose(0, 2, 1).reshape(K, L * N)           # ordered like idx (l, n)
        b = gain * np.sum(3.0 / rt_flat ** 2, axis=1)
        weight = (2.0 * gain[:, None] / rt_flat ** 3).ravel()
        # Psi + sum_t weight_t tau_t <= b_k
        A = sp.lil_matrix((K, dim))
        for k in range(K):
            A[k, tau_idx[k * L * N:(k + 1) * L * N]] = weight[k * L * N:(k + 1) * L * N]
        A[:, dim - 1] = 1.0
        blocks = [dist_rows, solver.affine(dim, A.tocsr(), b)]
        blocks += swarm.trajectory_blocks(dim, idx, q, scenario)
        x0 = np.concatenate([q.ravel(), rt_flat.ravel(), [psi]])
        rep = solver.solve(solver.ConvexSubproblem(dim, objective, blocks, x0, fi, fv), opts)
        statuses.append(rep.status)
        cand = rep.x[:nq].reshape(L, N, 3)
        new = float(average_snr(scenario, cand).min())
        if rep.status == solver.INFEASIBLE_START or not new >= psi:
            converged = True
            break
        q, prev, psi = cand, psi, new
        history.append(psi)
        if (psi - prev) / abs(prev) < st.eps1:
            converged = True
            break
    return SnrTrace(objectives=history, iterations=it, converged=converged,
                    trajectory=SwarmTrajectory(q), statuses=statuses)


# -- stage 2: per-UAV trajectory step ---------------------------------------------

@dataclass
class UavStep:
    positions: np.ndarray
    slacks: SlackState
    gamma_start: float
    status: str
    accepted: bool
    objective: float


def per_uav_subproblem(model: FixedAmplitudeChannelModel, positions: np.ndarray, V: np.ndarray,
                       l: int, opts: Optional[solver.SolveOptions] = None) -> UavStep:
    """One convexified update of UAV ``l``'s trajectory with beamformers and other UAVs fixed.

    The anchor is the current trajectory. Variables are the displacement of
    UAV l from the anchor at every slot, the slacks eta (K x N), mu (K x N)
    and the rate level Gamma. The step is kept only if the fixed-amplitude
    objective with these beamformers strictly increases.
    """
    sc = model.scenario
    K, N, L = sc.K, sc.N, sc.L
    p = sc.pbars
    opts = opts or solver.SolveOptions(sc.solver.feas_tol, sc.solver.opt_tol, sc.solver.max_iters)
    co = surrogate_coefficients(model, positions, V, l)
    slack = SlackState.at(co.g, p)
    nq = 3 * N
    off_eta, off_mu, off_g = nq, nq + K * N, nq + 2 * K * N
    dim = off_g + 1
    eta_idx = off_eta + np.arange(K * N).reshape(K, N)
    mu_idx = off_mu + np.arange(K * N).reshape(K, N)
    d_idx = np.arange(nq).reshape(N, 3)

    # rate rows: Gamma ln2 - sum_n (eta - mu) <= 0
    A_rate = np.zeros((K, dim))
    A_rate[:, off_g] = LN2
    for k in range(K):
        A_rate[k, eta_idx[k]] = -1.0
        A_rate[k, mu_idx[k]] = 1.0
    blocks = [solver.affine(dim, A_rate, np.zeros(K))]

    pg = p[None, :, None, None] * co.grad            # (k, i, n, 3)
    po = p[None, :, None] * co.omega                 # (k, i, n)
    pgain = p[None, :, None] * co.g
    mask = 1.0 - np.eye(K)[:, :, None]               # i != k
    rows = np.arange(K * N)
    cols_d = np.repeat(d_idx[None], K, axis=0).reshape(K * N, 3)

    def sparse_rows(coef_d, extra_col=None, extra_val=None):
        r = np.repeat(rows, 3)
        c = cols_d.ravel()
        v = coef_d.reshape(-1)
        if extra_col is not None:
            r = np.concatenate([r, rows]); c = np.concatenate([c, extra_col]); v = np.concatenate([v, extra_val])
        return sp.csr_matrix((v, (r, c)), shape=(K * N, dim))

    # desired-plus-interference rows: e^eta <= 1 + sum_i p_i [g]_lb
    grad_all = pg.sum(axis=1)                         # (k, n, 3)
    rho_all = po.sum(axis=1)                          # (k, n)
    A_b = sparse_rows(-grad_all)
    b_b = 1.0 + pgain.sum(axis=1)
    blocks.append(solver.exponential(dim, eta_idx.ravel(), A_b, b_b.ravel(), idx=cols_d,
                                     center=np.zeros((K * N, 3)), rho=rho_all.ravel()))
    # interference rows: 1 + sum_{i!=k} p_i [g]_ub <= (1 + mu - mu~) e^{mu~}
    grad_int = (pg * mask[..., None]).sum(axis=1)
    rho_int = (po * mask).sum(axis=1)
    e_mu = np.exp(slack.mu)
    A_c = sparse_rows(grad_int, mu_idx.ravel(), -e_mu.ravel())
    b_c = -1.0 - (pgain * mask).sum(axis=1) + (1.0 - slack.mu) * e_mu
    blocks.append(solver.convex_quadratic(dim, A_c, b_c.ravel(), cols_d, np.zeros((K * N, 3)),
                                          rho_int.ravel()))
    # swarm rows for UAV l in displacement coordinates
    idx = swarm.single_layout(L, N, l)
    shift = np.array(positions)
    blocks += swarm.trajectory_blocks(dim, idx, positions, sc, shift=shift)
    fi, fv = swarm.endpoint_pins(idx, sc, shift=shift)

    x0 = np.zeros(dim)
    x0[eta_idx] = slack.eta
    x0[mu_idx] = slack.mu
    x0[off_g] = slack.gamma
    objective = solver.Objective(dim, linear=np.eye(dim)[off_g])
    rep = solver.solve(solver.ConvexSubproblem(dim, objective, blocks, x0, fi, fv), opts)

    old, _ = fa_objective(model, positions, V)
    cand = np.array(positions)
    cand[l] = positions[l] + rep.x[:nq].reshape(N, 3)
    accepted = False
    new = old
    if rep.status != solver.INFEASIBLE_START:
        value, _ = fa_objective(model, cand, V)
        feasible = SwarmTrajectory(cand).is_feasible(sc)
        # ties keep the incumbent: a flat objective (e.g. L = 1) leaves the barrier free to drift
        if value > old and feasible:
            accepted, new = True, value
    if not accepted:
        log.info("UAV %d step rejected (status %s); keeping incumbent", l, rep.status)
        cand = np.array(positions)
    new_slack = SlackState(eta=rep.x[eta_idx], mu=rep.x[mu_idx], gamma=float(rep.x[off_g])) \
        if accepted else slack
    return UavStep(positions=cand, slacks=new_slack, gamma_start=slack.gamma, status=rep.status,
                   accepted=accepted, objective=new)


# -- Algorithm: alternating optimization ---------------------------------------

@dataclass
class AltOptResult:
    trajectory: SwarmTrajectory
    beamformers: np.ndarray
    rates: np.ndarray
    average: np.ndarray
    stage1: SnrTrace
    trace: list
    fa_objective: float
    exact_objective: float
    iterations: int
    converged: bool
    statuses: list = field(default_factory=list)

    @property
    def min_average(self) -> float:
        return float(self.average.min())


def alternating_optimize(scenario: Scenario, seed: Optional[int] = None,
                         stage1: Optional[SnrTrace] = None) -> AltOptResult:
    """Max-min rate trajectory and MMSE beamformers.

    Stage 1 maximizes the minimum average SNR. Stage 2 freezes amplitudes at
    that trajectory and alternates MMSE beamforming with one convexified step
    per UAV until the fractional gain of min_k sum_n rate drops below eps2.
    The result is re-evaluated with exact channels and a final MMSE pass.
    ``trace`` holds the fixed-amplitude objective (min over UEs of the
    slot-averaged rate) after every beamforming and every UAV update.
    """
    st = scenario.solver
    s1 = stage1 if stage1 is not None else maxmin_snr_trajectory(scenario, seed=seed)
    q = np.array(s1.trajectory.positions)
    model = FixedAmplitudeChannelModel(scenario, q)
    opts = solver.SolveOptions(st.feas_tol, st.opt_tol, st.max_iters)
    N = scenario.N
    trace, statuses = [], []
    obj = None
    converged = False
    b = 0
    for b in range(1, st.max_stage2 + 1):
        V = channel.mmse_beamformers(model.channels(q), scenario.pbars)
        start, _ = fa_objective(model, q, V)
        trace.append(start / N)
        for l in range(scenario.L):
            step = per_uav_subproblem(model, q, V, l, opts)
            statuses.append(step.status)
            q = step.positions
            trace.append(step.objective / N)
        new = trace[-1] * N
        if obj is not None and (new - obj) / abs(obj) < st.eps2:
            obj = new
            converged = True
            break
        obj = new
    h = channel.channel_matrix(scenario, q)
    V = channel.mmse_beamformers(h, scenario.pbars)
    report = channel.evaluate(scenario, q, V)
    V_fa = channel.mmse_beamformers(model.channels(q), scenario.pbars)
    fa, _ = fa_objective(model, q, V_fa)
    return AltOptResult(trajectory=SwarmTrajectory(q), beamformers=V, rates=report.rates,
                        average=report.average, stage1=s1, trace=trace, fa_objective=fa / N,
                        exact_objective=report.min_average, iterations=b, converged=converged,
                        statuses=statuses)
