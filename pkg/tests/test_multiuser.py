import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ama import channel, multiuser as mu, single_ue, solver
from ama.model import SwarmTrajectory, ValidationError

from conftest import SECTION_V_ENDPOINTS, SECTION_V_UES, make_scenario

LAM = 4 * math.pi * math.sqrt(10 ** -6.14)


def _cplx(r, *shape):
    return r.normal(size=shape) + 1j * r.normal(size=shape)


def random_instance(seed, K=2, L=4, N=2):
    """Fixed-amplitude model, perturbed trajectory and unit beamformers."""
    r = np.random.default_rng(seed)
    ues = np.column_stack([r.uniform(-40, 40, (K, 2)), np.zeros(K)])
    sc = make_scenario(ues=ues, L=L, N=N)
    anchor = np.concatenate([r.uniform(-20, 20, (L, N, 2)), np.full((L, N, 1), 100.0)], axis=-1)
    pos = anchor + r.uniform(-1, 1, anchor.shape)
    V = _cplx(r, K, N, L)
    V /= np.linalg.norm(V, axis=-1, keepdims=True)
    return sc, mu.FixedAmplitudeChannelModel(sc, anchor), pos, V, r


def test_inverse_square_bound_examples():
    w = np.zeros(3)
    q = np.array([0, 0, 100.0])
    assert mu.inv_sq_dist_lower_bound(q, q, w) == pytest.approx(1e-4, rel=1e-14)
    lb = mu.inv_sq_dist_lower_bound([0, 0, 110.0], q, w)
    assert lb == pytest.approx(8e-5, rel=1e-12)
    assert lb <= 1 / 12100


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inverse_square_bound_sampled(seed):
    r = np.random.default_rng(seed)
    w = np.append(r.uniform(-50, 50, 2), 0.0)
    qt = np.append(r.uniform(-50, 50, 2), 100.0)
    q = qt + r.uniform(-30, 30, 3)
    assert mu.inv_sq_dist_lower_bound(q, qt, w) <= 1.0 / float(np.sum((q - w) ** 2)) * (1 + 1e-12)


def test_exp_bound():
    assert mu.exp_linearize_lb(0.0, 0.0) == 1.0
    assert mu.exp_linearize_lb(1.0, 0.0) == 2.0 <= math.e
    r = np.random.default_rng(1)
    for m_t in r.uniform(-3, 3, 50):
        for m in r.uniform(m_t - 2, m_t + 2, 20):
            assert mu.exp_linearize_lb(m, m_t) <= math.exp(m) * (1 + 1e-15)


def test_g_decompose_trivial_cases():
    r = np.random.default_rng(0)
    h = _cplx(r, 1, 1, 1)
    V = _cplx(r, 1, 1, 1)
    f, fbar = mu.g_decompose(0, 0, 0, 0, h, V)
    assert f == 0.0 and fbar == pytest.approx(abs(np.vdot(V[0, 0], h[0, 0])) ** 2)
    h = _cplx(r, 1, 1, 4)
    V = _cplx(r, 1, 1, 4)
    V[0, 0, 2] = 0.0
    assert mu.g_decompose(0, 0, 2, 0, h, V)[0] == 0.0


def test_g_decompose_sums_to_gain():
    r = np.random.default_rng(2)
    h, V = _cplx(r, 3, 2, 4), _cplx(r, 3, 2, 4)
    for k, i, l, n in [(0, 1, 2, 0), (2, 2, 0, 1), (1, 0, 3, 1)]:
        f, fbar = mu.g_decompose(k, i, l, n, h, V)
        assert f + fbar == pytest.approx(abs(np.vdot(V[k, n], h[i, n])) ** 2, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_cosine_form_matches_complex_form(seed):
    sc, model, pos, V, r = random_instance(seed)
    h = model.channels(pos)
    for k in range(sc.K):
        for i in range(sc.K):
            for l in range(sc.L):
                for n in range(sc.N):
                    fr = mu.frozen_slot(model, pos, V, k, i, l, n)
                    f_cos, _ = mu.f_value_and_gradient(pos[l, n], fr)
                    f_z, _ = mu.g_decompose(k, i, l, n, h, V)
                    assert f_cos == pytest.approx(f_z, rel=1e-9, abs=1e-20)


def test_f_vanishes_with_zero_weights():
    sc, model, pos, V, r = random_instance(3)
    fr = mu.frozen_slot(model, pos, V, 0, 0, 1, 0)
    fr = mu.FrozenSlot(fr.l, fr.w, fr.positions, np.zeros_like(fr.amplitude), fr.v, fr.wavenumber)
    val, grad = mu.f_value_and_gradient(pos[1, 0], fr)
    assert val == 0.0 and np.all(grad == 0.0)


def test_f_aligned_phase_gives_zeta():
    # UAV 0 and UAV 1 equidistant from the UE, receive weights in phase
    w = np.zeros(3)
    positions = np.array([[3.0, 4.0, 100.0], [-4.0, 3.0, 100.0]])
    fr = mu.FrozenSlot(l=0, w=w, positions=positions, amplitude=np.array([2e-6, 3e-6]),
                       v=np.array([0.6, 0.8], complex), wavenumber=2 * math.pi / LAM)
    val, _ = mu.f_value_and_gradient(positions[0], fr)
    assert val == pytest.approx(fr.zetas()[1], rel=1e-12)


def test_omega_single_term():
    c = 2 * 2e-6 * 3e-6 * 0.6 * 0.8
    fr = mu.FrozenSlot(l=0, w=np.zeros(3), positions=np.zeros((2, 3)), amplitude=np.array([2e-6, 3e-6]),
                       v=np.array([0.6, 0.8], complex), wavenumber=2 * math.pi / LAM)
    assert mu.lipschitz_omega(fr) == pytest.approx(4 * math.pi ** 2 * c / LAM ** 2, rel=1e-12)
    half = mu.FrozenSlot(fr.l, fr.w, fr.positions, fr.amplitude, fr.v, 2 * fr.wavenumber)
    assert mu.lipschitz_omega(half) == pytest.approx(4 * mu.lipschitz_omega(fr), rel=1e-12)


def test_f_bounds_anchor_and_gap():
    g = np.array([1.0, -2.0, 0.5])
    lo, hi = mu.f_bounds([1, 2, 3], [1, 2, 3], 0.7, g, 3.0)
    assert lo == hi == 0.7
    for axis in range(3):
        d = np.zeros(3)
        d[axis] = 0.4
        lo, hi = mu.f_bounds(d, np.zeros(3), 0.7, g, 3.0)
        assert hi - lo == pytest.approx(3.0 * 0.16)


@pytest.mark.parametrize("seed", range(3))
def test_f_sandwich_sampled(seed):
    sc, model, pos, V, r = random_instance(seed)
    fr = mu.frozen_slot(model, pos, V, 0, 1, 2, 1)
    q0 = pos[2, 1]
    f0, g0 = mu.f_value_and_gradient(q0, fr)
    om = mu.lipschitz_omega(fr)
    for _ in range(1000):
        d = r.normal(size=3)
        q = q0 + d / np.linalg.norm(d) * r.uniform(0, 5)
        lo, hi = mu.f_bounds(q, q0, f0, g0, om)
        f, _ = mu.f_value_and_gradient(q, fr)
        assert lo - 1e-12 * abs(om) <= f <= hi + 1e-12 * abs(om)


def test_vectorized_coefficients_match_scalar_routes():
    sc, model, pos, V, r = random_instance(7, K=3, L=3, N=2)
    for l in range(sc.L):
        co = mu.surrogate_coefficients(model, pos, V, l)
        np.testing.assert_allclose(co.g, channel.beam_gains(model.channels(pos), V), rtol=1e-12)
        for k in range(sc.K):
            for i in range(sc.K):
                for n in range(sc.N):
                    fr = mu.frozen_slot(model, pos, V, k, i, l, n)
                    f, g = mu.f_value_and_gradient(pos[l, n], fr)
                    assert co.f[k, i, n] == pytest.approx(f, rel=1e-9, abs=1e-22)
                    np.testing.assert_allclose(co.grad[k, i, n], g, rtol=1e-7, atol=1e-22)
                    assert co.omega[k, i, n] == pytest.approx(mu.lipschitz_omega(fr), rel=1e-12)


def test_slack_state_is_tight():
    sc, model, pos, V, r = random_instance(4)
    g = channel.beam_gains(model.channels(pos), V)
    s = mu.SlackState.at(g, sc.pbars)
    fa, _ = mu.fa_objective(model, pos, V)
    assert s.gamma == pytest.approx(fa, rel=1e-10)


def test_circular_trajectory_geometry():
    sc = make_scenario(L=4, N=10)
    tr = mu.circular_trajectory(sc).positions
    np.testing.assert_allclose(tr[:, 0], tr[:, -1], atol=1e-12)
    R = 5 / (2 * math.sin(math.pi / 4))
    steps = np.linalg.norm(np.diff(tr, axis=1), axis=-1)
    np.testing.assert_allclose(steps, 2 * R * math.sin(math.pi / 9), rtol=1e-12)
    angles = np.degrees(np.arctan2(tr[:, 0, 1], tr[:, 0, 0])) % 360
    np.testing.assert_allclose(angles, [0, 90, 180, 270], atol=1e-9)
    assert SwarmTrajectory(tr).is_feasible(sc)


def test_circular_trajectory_rejections():
    with pytest.raises(ValidationError):
        mu.circular_trajectory(make_scenario(L=1, N=10))
    with pytest.raises(mu.InfeasibleTrajectoryError):
        mu.circular_trajectory(make_scenario(L=80, N=3))


def test_initial_trajectory_is_seeded_and_feasible():
    sc = make_scenario(ues=SECTION_V_UES, L=4, N=10, initial_positions=SECTION_V_ENDPOINTS)
    a, b = mu.initial_trajectory(sc, seed=5), mu.initial_trajectory(sc, seed=5)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert a.is_feasible(sc)
    assert not np.array_equal(a.positions, mu.initial_trajectory(sc, seed=6).positions)


def test_maxmin_snr_single_ue_agrees_with_rate_sca():
    sc = make_scenario(L=3, N=1)
    init = mu.initial_trajectory(sc)
    snr = mu.maxmin_snr_trajectory(sc, init)
    rate = single_ue.sca_trajectory_single_ue(sc, init)
    a = single_ue.sum_rate(sc, snr.trajectory.positions)
    assert a == pytest.approx(rate.objectives[-1], rel=1e-3)


def test_maxmin_snr_pinned_single_slot():
    sc = make_scenario(ues=SECTION_V_UES, L=4, N=1, initial_positions=SECTION_V_ENDPOINTS)
    tr = mu.maxmin_snr_trajectory(sc)
    np.testing.assert_allclose(tr.trajectory.positions[:, 0], SECTION_V_ENDPOINTS, atol=1e-12)


@pytest.mark.slow
def test_maxmin_snr_drifts_to_ue_centroid():
    sc = make_scenario(ues=SECTION_V_UES, L=4, N=20, initial_positions=SECTION_V_ENDPOINTS)
    tr = mu.maxmin_snr_trajectory(sc)
    mid = tr.trajectory.positions[:, sc.N // 2, :2]
    assert np.all(np.linalg.norm(mid, axis=1) < 20.0)
    assert np.all(np.diff(tr.objectives) >= 0)
    assert tr.trajectory.is_feasible(sc)
    assert set(tr.statuses) == {solver.OPTIMAL}


def test_per_uav_step_is_monotone_and_feasible():
    sc = make_scenario(ues=[[20, 0, 0], [-20, 10, 0]], L=3, N=4,
                       initial_positions=[[30, 0, 100], [30, 6, 100], [30, 12, 100]])
    s1 = mu.maxmin_snr_trajectory(sc)
    q = s1.trajectory.positions
    model = mu.FixedAmplitudeChannelModel(sc, q)
    V = channel.mmse_beamformers(model.channels(q), sc.pbars)
    for l in range(sc.L):
        step = mu.per_uav_subproblem(model, q, V, l)
        assert step.objective >= mu.fa_objective(model, q, V)[0] - 1e-9
        assert SwarmTrajectory(step.positions).is_feasible(sc)
        if step.accepted:
            assert step.slacks.gamma >= step.gamma_start - 1e-6
        q = step.positions


def test_altopt_single_uav_reaches_apex():
    res = mu.alternating_optimize(make_scenario(L=1, N=1))
    np.testing.assert_allclose(res.trajectory.positions[0, 0], [0, 0, 100], atol=0.1)


def test_altopt_small_scenario():
    sc = make_scenario(ues=[[20, 0, 0], [-20, 10, 0]], L=3, N=4,
                       initial_positions=[[30, 0, 100], [30, 6, 100], [30, 12, 100]])
    res = mu.alternating_optimize(sc)
    assert np.all(np.diff(res.trace) >= -1e-9)
    assert res.trajectory.is_feasible(sc)
    assert res.min_average == pytest.approx(res.exact_objective)
    assert res.fa_objective >= res.trace[0] - 1e-9
