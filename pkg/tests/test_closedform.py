import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ama import channel, closedform as cf
from ama.model import RfParams, ValidationError

from conftest import make_scenario

LAM = RfParams.from_db().wavelength


@pytest.mark.parametrize("ue,H,expected", [([0, 0, 0], 100, [0, 0, 100]), ([10, -5, 0], 100, [10, -5, 100]),
                                           ([0, 0, 0], 50, [0, 0, 50])])
def test_single_uav_above_ue(ue, H, expected):
    np.testing.assert_array_equal(cf.optimal_single_uav(ue, H), expected)


def test_two_uav_symmetric_branch():
    sol = cf.optimal_two_uav(100.0, 5.0)
    assert sol.branch == cf.SYMMETRIC and sol.x_star == -2.5 and sol.zeta == 20.0
    assert np.linalg.norm(sol.positions[1] - sol.positions[0]) == pytest.approx(5.0)


def test_two_uav_asymmetric_branch_against_grid():
    sol = cf.optimal_two_uav(2.5, 5.0)
    xs = sorted([sol.x_star] + [a.x_star for a in sol.alternatives])
    offset = 5.0 * math.sqrt(math.sqrt(0.5) - 0.5)
    assert xs == pytest.approx([-2.5 - offset, -2.5 + offset], abs=1e-12)
    assert xs == pytest.approx([-4.7755, -0.2245], abs=1e-4)
    grid = np.arange(-20.0, 20.0 + 1e-9, 1e-4)
    g = cf.pair_gain(grid, 2.5, 5.0)
    assert g.max() <= cf.pair_gain(sol.x_star, 2.5, 5.0) * (1 + 1e-12)
    assert abs(grid[np.argmax(g)] - xs[0]) < 1e-3 or abs(grid[np.argmax(g)] - xs[1]) < 1e-3
    assert cf.pair_gain(xs[0], 2.5, 5.0) == pytest.approx(cf.pair_gain(xs[1], 2.5, 5.0), rel=1e-14)


def test_two_uav_threshold_branches_coincide():
    d = 5.0
    sol = cf.optimal_two_uav(d * math.sqrt(3) / 2, d)
    assert sol.x_star == pytest.approx(-d / 2, abs=1e-7)
    assert all(a.x_star == pytest.approx(-d / 2, abs=1e-7) for a in sol.alternatives)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50.0), st.floats(0.5, 20.0))
def test_two_uav_stationary(zeta, d_min):
    sol = cf.optimal_two_uav(zeta * d_min, d_min)
    assert abs(cf.pair_stationarity_residual(sol.x_star, zeta * d_min, d_min)) <= 1e-8
    assert sol.objective == pytest.approx(float(cf.pair_gain(sol.x_star, zeta * d_min, d_min)), rel=1e-12)


def test_two_uav_translates_with_ue():
    sol = cf.optimal_two_uav(100.0, 5.0, ue=[10, 20, 0])
    np.testing.assert_allclose(sol.positions[0], [7.5, 20, 100])


def test_two_uav_rejects_bad_input():
    with pytest.raises(ValidationError):
        cf.optimal_two_uav(0.0, 5.0)


def test_min_feasible_nu_default_scan():
    # oracle: independent linear scan of the separation inequality
    def sep(nu):
        a = (2 * nu + 1) * LAM / 8
        return 2 * a * math.sqrt(100.0 ** 2 / (25.0 ** 2 - a * a) + 1)
    oracle = next(nu for nu in range(10 ** 5) if sep(nu) >= 5.0)
    assert oracle == 227
    assert cf.min_feasible_nu(25.0, LAM, 100.0, 5.0) == 227


def test_min_feasible_nu_edge_cases():
    assert cf.min_feasible_nu(25.0, LAM, 100.0, 1e-9) == 0
    nu = cf.min_feasible_nu(25.0, LAM, 100.0, 60.0)
    assert cf.semi_axis(nu, LAM) < 25.0
    assert cf.pair_separation(nu, 25.0, LAM, 100.0) >= 60.0
    with pytest.raises(cf.NoFeasibleNuError):
        cf.min_feasible_nu(25.0, LAM, 100.0, 1e5)


def test_hyperbola_pair_focal_difference():
    hp = cf.hyperbola_positions(2, 227, 25.0, LAM, [100.0])
    np.testing.assert_allclose(np.abs(hp.positions[:, 0]), 2.5088, atol=1e-4)
    foci = np.array([[25.0, 0, 0], [-25.0, 0, 0]])
    for q in hp.positions:
        r = np.linalg.norm(q - foci, axis=1)
        assert abs(r[1] - r[0]) == pytest.approx(455 * LAM / 4, rel=1e-9)


def test_hyperbola_pair_is_uncorrelated():
    hp = cf.hyperbola_positions(2, 227, 25.0, LAM, [100.0])
    sc = make_scenario(ues=hp.ue_positions, L=2)
    h = channel.channel_matrix(sc, hp.positions[:, None, :])[:, 0]
    assert channel.correlation_sq(h[0], h[1]) < 1e-10


def test_hyperbola_asymptote():
    a = cf.semi_axis(227, LAM)
    hp = cf.hyperbola_positions(2, 227, 25.0, LAM, [1e9])
    assert hp.positions[0, 0] / 1e9 == pytest.approx(a / math.sqrt(25.0 ** 2 - a * a), rel=1e-9)


def test_hyperbola_positions_validation():
    with pytest.raises(ValidationError):
        cf.hyperbola_positions(3, 0, 25.0, LAM, [100.0])
    with pytest.raises(ValidationError):
        cf.hyperbola_positions(2, 0, 25.0, LAM, [90.0], H=100.0)


def test_successive_hyperbola_single_pair_matches_direct():
    a = cf.successive_hyperbola_placement(2, 25.0, LAM, 100.0, 5.0)
    b = cf.hyperbola_positions(2, 227, 25.0, LAM, [100.0])
    np.testing.assert_array_equal(a.positions, b.positions)


def test_successive_hyperbola_chain_spacing():
    hp = cf.successive_hyperbola_placement(4, 25.0, LAM, 100.0, 5.0)
    assert hp.z[1] > 100.0
    # oracle: bisection on altitude for the chord to the first UAV
    x = lambda z: hp.a * math.sqrt(z * z / (25.0 ** 2 - hp.a ** 2) + 1)
    lo, hi = 100.0, 120.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if math.hypot(x(mid) - x(100.0), mid - 100.0) < 5.0 else (lo, mid)
    assert hp.z[1] == pytest.approx(hi, abs=1e-9)
    assert np.linalg.norm(hp.positions[1] - hp.positions[0]) - 5.0 == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("L", [2, 4, 8])
def test_successive_hyperbola_removes_interference(L):
    ue = [[-25.0, 0, 0], [25.0, 0, 0]]
    sc = make_scenario(ues=ue, L=L)
    hp = cf.successive_hyperbola_placement(L, 0.0, LAM, 100.0, 5.0, ue_pair=ue)
    h = channel.channel_matrix(sc, hp.positions[:, None, :])[:, 0]
    assert channel.correlation_sq(h[0], h[1]) < 1e-10
    for k in range(2):
        assert channel.mmse_sinr_two_ue(h[k], h[1 - k], sc.pbars[k], sc.pbars[1 - k]) == pytest.approx(
            channel.snr_mrc(h[k], sc.pbars[k]), rel=1e-9)


def test_hyperbola_in_rotated_frame():
    ue = [[10.0, 10.0, 0], [10.0 + 30 * math.cos(1.0), 10.0 + 30 * math.sin(1.0), 0]]
    hp = cf.successive_hyperbola_placement(4, 0.0, LAM, 100.0, 5.0, ue_pair=ue)
    sc = make_scenario(ues=ue, L=4)
    h = channel.channel_matrix(sc, hp.positions[:, None, :])[:, 0]
    assert channel.correlation_sq(h[0], h[1]) < 1e-10
    assert hp.X == pytest.approx(15.0)


@pytest.mark.parametrize("L,R", [(4, 5 / (2 * math.sin(math.pi / 4))), (6, 5.0)])
def test_ring_radius(L, R):
    assert cf.ring_radius(L, 5.0) == pytest.approx(R, rel=1e-12)


def test_ring_adjacent_spacing():
    pts = cf.circular_placement(80, 5.0, 100.0)
    gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    np.testing.assert_allclose(gaps, 5.0, atol=1e-9)
    assert np.all(pts[:, 2] == 100.0)
    with pytest.raises(ValidationError):
        cf.circular_placement(1, 5.0, 100.0)
