from dataclasses import replace

import numpy as np
import pytest

from dronesurv.channel import EnvironmentParams
from dronesurv.detection import TxPowerRange, coverage_radius_m
from dronesurv.montecarlo import (
    Scenario,
    evaluate_grid,
    optimize_deployment,
    run_trials,
    sweep_altitude,
    sweep_separation,
    trial_rng,
)

QUIET = EnvironmentParams(sigma_los_a=0.0, sigma_nlos_a=0.0)
SMALL = Scenario(trials=1500)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(zone_radius=0)
    with pytest.raises(ValueError):
        Scenario(trials=0)
    with pytest.raises(ValueError):
        Scenario(true_power_model="gaussian")
    with pytest.raises(ValueError):
        Scenario(side_l=0)


def test_trial_substreams_are_spawned_children():
    child = np.random.SeedSequence(11).spawn(4)[3]
    assert trial_rng(11, 3).random() == np.random.default_rng(child).random()


def test_noiseless_known_power():
    s = replace(SMALL, env=QUIET, power_range=TxPowerRange.known(10.0), trials=2000)
    rep = run_trials(s)
    assert rep.mean_error_m < 1e-3
    assert rep.mean_delta_m == 0.0


def test_bit_identical_reruns_and_thread_counts():
    a = run_trials(SMALL)
    b = run_trials(SMALL)
    c = run_trials(SMALL, workers=4)
    for other in (b, c):
        assert a.summary() == other.summary()
        assert np.array_equal(a.errors_m, other.errors_m)
        assert np.array_equal(a.estimate_xy, other.estimate_xy)


def test_prefix_of_longer_run_is_identical():
    short = run_trials(replace(SMALL, trials=700))
    long = run_trials(replace(SMALL, trials=2100))
    assert np.array_equal(short.errors_m, long.errors_m[:700])


def test_doubling_trials_is_statistically_stable():
    a = run_trials(replace(SMALL, trials=4000))
    b = run_trials(replace(SMALL, trials=8000, seed=SMALL.seed + 1))
    assert abs(a.mean_error_m - b.mean_error_m) < 3 * np.hypot(a.std_error_m, b.std_error_m)


def test_report_fields():
    rep = run_trials(SMALL)
    assert rep.trials == SMALL.trials
    assert 0 <= rep.clamp_fraction <= 1
    assert rep.rmse_m >= 0 and rep.median_error_m >= 0
    assert np.all(np.hypot(*(rep.true_xy - SMALL.center).T) <= SMALL.zone_radius + 1e-9)


def test_uniform_power_model_draws_inside_range():
    s = replace(SMALL, true_power_model="uniform")
    rep = run_trials(s)
    assert rep.p_tx_dbm.min() >= 0 and rep.p_tx_dbm.max() <= 20
    assert rep.p_tx_dbm.std() > 1


def test_fading_changes_results_but_stays_deterministic():
    s = replace(SMALL, fading_enabled=True)
    a, b = run_trials(s), run_trials(s)
    assert np.array_equal(a.errors_m, b.errors_m)
    assert a.mean_error_m != run_trials(SMALL).mean_error_m


def test_detectable_only_restricts_positions():
    # low power so that part of the zone is out of reach at low altitude
    s = replace(SMALL, altitude_h=100.0, detectable_only=True, true_power_dbm=0.0,
                power_range=TxPowerRange(-10, 10))
    rep = run_trials(s)
    reach = coverage_radius_m(100.0, 0.0, s.env, s.budget, tol=1e-3)
    anchors = s.deployment().ground_vertices()
    dist = np.linalg.norm(rep.true_xy[:, None, :] - anchors[None], axis=2)
    assert np.all(dist <= reach + 1e-3)


def test_translation_invariance():
    moved = replace(SMALL, center=(5000.0, -3000.0))
    a, b = run_trials(SMALL), run_trials(moved)
    np.testing.assert_allclose(a.errors_m, b.errors_m, atol=1e-4)


def test_sweeps_single_points_and_shapes():
    s = replace(SMALL, trials=3000)
    assert sweep_altitude(s, [1000.0]) == [(1000.0, run_trials(s).mean_error_m)]
    assert sweep_separation(s, [300.0]) == [(300.0, run_trials(s).mean_error_m)]
    curve = dict(sweep_separation(s, [20.0, 300.0, 1000.0, 5000.0]))
    assert curve[20.0] > curve[300.0]
    assert curve[5000.0] > min(curve.values())
    with pytest.raises(ValueError):
        sweep_altitude(s, [])
    with pytest.raises(ValueError):
        sweep_altitude(s, [1000.0, 500.0])


def test_known_power_has_zero_delta_in_every_cell():
    s = replace(SMALL, trials=300, power_range=TxPowerRange.known(10.0))
    for h in (400.0, 1500.0):
        for l in (100.0, 900.0):
            assert run_trials(replace(s, altitude_h=h, side_l=l)).mean_delta_m == 0


def test_optimize_deployment():
    s = replace(SMALL, trials=2000)
    assert optimize_deployment(s, [700.0], [300.0]) == (700.0, 300.0, run_trials(replace(s, altitude_h=700.0)).mean_error_m)
    hs = np.arange(200.0, 2001.0, 200.0)
    cells = evaluate_grid(s, hs, [300.0, 1000.0])
    h_star, l_star, err = optimize_deployment(s, hs, [300.0, 1000.0])
    assert all(err <= c[2] for c in cells)
    assert hs[0] < h_star < hs[-1]
