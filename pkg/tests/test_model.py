import math

import numpy as np
import pytest

from ama.model import (RfParams, Scenario, SolverSettings, SwarmTrajectory, ValidationError,
                       beta0_from_wavelength, dbm_to_watt, min_pairwise_distance, wavelength_from_beta0)

from conftest import make_scenario


def test_wavelength_follows_reference_gain():
    rf = RfParams.from_db()
    assert rf.wavelength == pytest.approx(4 * math.pi * math.sqrt(10 ** -6.14), rel=1e-12)
    assert rf.wavelength == pytest.approx(0.010697, abs=5e-6)
    assert beta0_from_wavelength(wavelength_from_beta0(3e-7)) == pytest.approx(3e-7, rel=1e-12)


def test_explicit_wavelength_overrides_gain():
    rf = RfParams.from_db(wavelength=0.05)
    assert rf.beta0 == pytest.approx((0.05 / (4 * math.pi)) ** 2)


def test_inconsistent_rf_is_rejected():
    with pytest.raises(ValidationError):
        RfParams(beta0=1e-6, wavelength=0.01, noise_power=1e-12)


def test_power_conversion():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert make_scenario().pbars[0] == pytest.approx(10 ** 12.4, rel=1e-12)


@pytest.mark.parametrize("field,value", [("eps1", 0.0), ("opt_tol", -1.0), ("max_iters", 0)])
def test_solver_settings_validation(field, value):
    with pytest.raises(ValidationError):
        SolverSettings(**{field: value})


def test_scenario_defaults_and_reference_point():
    sc = make_scenario(L=4, N=3, initial_positions=[[10, 0, 100], [0, 10, 100], [-10, 0, 100], [0, -10, 100]])
    assert sc.K == 1 and sc.v_step == 30.0
    np.testing.assert_allclose(sc.reference_point, [0, 0, 100])
    np.testing.assert_array_equal(sc.final_positions, sc.initial_positions)
    assert make_scenario().reference_point.tolist() == [0, 0, 100]


def test_user_must_be_on_ground():
    with pytest.raises(ValidationError):
        make_scenario(ues=[[0, 0, 1]])


def test_min_pairwise_distance():
    assert min_pairwise_distance(np.array([[0, 0, 0], [3, 4, 0], [10, 0, 0]])) == 5.0
    assert min_pairwise_distance(np.zeros((1, 3))) == math.inf


def test_feasibility_report():
    sc = make_scenario(L=2, N=2)
    ok = SwarmTrajectory(np.array([[[0, 0, 100], [10, 0, 100]], [[0, 5, 100], [10, 5, 100]]], float))
    assert ok.is_feasible(sc)
    bad = SwarmTrajectory(np.array([[[0, 0, 100], [40, 0, 99]], [[0, 4, 100], [10, 5, 100]]], float))
    rep = bad.violations(sc)
    assert rep.speed == pytest.approx(math.hypot(40, 1) - 30)
    assert rep.collision == pytest.approx(1.0)
    assert rep.altitude == pytest.approx(1.0)
    assert not rep.ok


def test_trajectory_shape_checked():
    with pytest.raises(ValidationError):
        SwarmTrajectory(np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        SwarmTrajectory(np.full((1, 1, 3), np.nan))
