"""Constant-velocity filter: transition/noise construction, update algebra,
and long-run covariance health."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from depthtrack import (FilterConfig, MeasurementSource, NonPositiveDt,
                        PositionMeasurement, SingularInnovation, StateEstimate,
                        initialize, make_process_noise, make_transition,
                        predict, predict_with, update)

RNG = np.random.default_rng(7)


def fix(position, stamp=0.0, source=MeasurementSource.PRIMARY_DETECTOR):
    return PositionMeasurement(np.asarray(position, dtype=float), stamp, source)


def joseph_update(state: StateEstimate, meas: PositionMeasurement,
                  cfg: FilterConfig) -> tuple[np.ndarray, np.ndarray]:
    """Textbook update with an explicit H and the Joseph covariance form.

    Deliberately a different code path from the library (explicit inverse,
    no block slicing) so the two act as independent oracles.
    """
    h = np.zeros((3, 6))
    h[:, :3] = np.eye(3)
    r = np.diag(cfg.r_diag)
    s = h @ state.cov @ h.T + r
    k = state.cov @ h.T @ np.linalg.inv(s)
    mean = state.mean + k @ (meas.position - h @ state.mean)
    ikh = np.eye(6) - k @ h
    cov = ikh @ state.cov @ ikh.T + k @ r @ k.T
    return mean, cov


# ---------------------------------------------------------------- matrices


def test_transition_moves_position_by_velocity():
    f = make_transition(0.05)
    expected = np.eye(6)
    expected[0, 3] = expected[1, 4] = expected[2, 5] = 0.05
    assert_allclose(f, expected)


def test_transition_rejects_non_positive_dt():
    with pytest.raises(NonPositiveDt):
        make_transition(0.0)
    with pytest.raises(NonPositiveDt):
        make_transition(-0.1)


def test_process_noise_hand_values():
    # q=3, dt=1: position block 1, cross 1.5, velocity 3 on each axis.
    q = make_process_noise(1.0, 3.0)
    for axis in range(3):
        assert q[axis, axis] == pytest.approx(1.0)
        assert q[axis, axis + 3] == pytest.approx(1.5)
        assert q[axis + 3, axis] == pytest.approx(1.5)
        assert q[axis + 3, axis + 3] == pytest.approx(3.0)
    # Cross-axis terms stay zero.
    assert q[0, 1] == 0.0 and q[0, 4] == 0.0 and q[3, 4] == 0.0


def test_process_noise_half_second_step():
    q = make_process_noise(0.5, 12.0)
    assert q[2, 2] == pytest.approx(0.5)     # 12 * 0.125 / 3
    assert q[2, 5] == pytest.approx(1.5)     # 12 * 0.25 / 2
    assert q[5, 5] == pytest.approx(6.0)


def test_process_noise_composes_over_substeps():
    # Five short steps equal one long one: F(a) Q F(a)^T + Q(a) telescopes.
    dt = 0.05
    f_sub = make_transition(dt / 5)
    q_sub = make_process_noise(dt / 5, 25.0)
    acc = np.zeros((6, 6))
    for _ in range(5):
        acc = f_sub @ acc @ f_sub.T + q_sub
    assert_allclose(acc, make_process_noise(dt, 25.0), rtol=1e-12, atol=1e-15)


# ---------------------------------------------------------------- lifecycle


def test_initialize_uses_fix_position_and_diagonal_cov():
    cfg = FilterConfig(p0_pos=1.0, p0_vel=25.0)
    state = initialize(fix([1.0, -2.0, 3.0], stamp=4.5), cfg)
    assert_allclose(state.position, [1.0, -2.0, 3.0])
    assert_allclose(state.velocity, [0.0, 0.0, 0.0])
    assert_allclose(state.cov, np.diag([1.0, 1.0, 1.0, 25.0, 25.0, 25.0]))
    assert state.stamp == 4.5


def test_predict_advances_position_with_velocity():
    cfg = FilterConfig(q_scale=0.0)
    state = StateEstimate(np.array([1.0, 2.0, 3.0, 0.5, -1.0, 2.0]),
                          np.eye(6), stamp=10.0)
    out = predict(state, 0.1, cfg)
    assert_allclose(out.position, [1.05, 1.9, 3.2])
    assert_allclose(out.velocity, state.velocity)
    assert out.stamp == pytest.approx(10.1)


def test_predict_with_matches_predict():
    cfg = FilterConfig()
    state = initialize(fix([0.0, 1.0, 2.0]), cfg)
    dt = 0.01
    a = predict(state, dt, cfg)
    b = predict_with(state, make_transition(dt), make_process_noise(dt, cfg.q_scale), dt)
    assert_allclose(a.mean, b.mean)
    assert_allclose(a.cov, b.cov)
    assert a.stamp == b.stamp


def test_update_hand_value_from_fresh_track():
    # Diagonal prior: gain is p/(p+r) on position, zero on velocity.
    cfg = FilterConfig(r_diag=(1e-3, 1e-3, 1e-3), p0_pos=1.0, p0_vel=25.0)
    state = initialize(fix([0.0, 0.0, 0.0]), cfg)
    out = update(state, fix([1.0, 1.0, 1.0]), cfg)
    gain = 1.0 / 1.001
    assert_allclose(out.position, [gain] * 3, rtol=1e-12)
    assert_allclose(out.velocity, [0.0] * 3, atol=1e-15)
    assert_allclose(np.diag(out.cov)[:3], [1.0 - gain] * 3, rtol=1e-9)


def test_update_pulls_mean_toward_measurement():
    cfg = FilterConfig()
    state = initialize(fix([0.0, 0.0, 5.0]), cfg)
    out = update(state, fix([1.0, 0.0, 5.0]), cfg)
    assert 0.0 < out.position[0] < 1.0
    assert out.cov[0, 0] < state.cov[0, 0]


def test_update_matches_joseph_form():
    cfg = FilterConfig(q_scale=25.0, r_diag=(1.6e-3, 1.6e-3, 1.6e-3))
    state = initialize(fix(RNG.normal(size=3)), cfg)
    for step in range(50):
        state = predict(state, RNG.uniform(0.01, 0.2), cfg)
        meas = fix(state.position + RNG.normal(scale=0.05, size=3))
        mean_ref, cov_ref = joseph_update(state, meas, cfg)
        state = update(state, meas, cfg)
        assert_allclose(state.mean, mean_ref, rtol=1e-9, atol=1e-12)
        assert_allclose(state.cov, cov_ref, rtol=1e-6, atol=1e-12)


def test_update_keeps_stamp_and_symmetry():
    cfg = FilterConfig()
    state = predict(initialize(fix([1.0, 2.0, 3.0], stamp=1.0), cfg), 0.5, cfg)
    out = update(state, fix([1.1, 1.9, 3.0], stamp=1.5), cfg)
    assert out.stamp == state.stamp
    assert np.array_equal(out.cov, out.cov.T)


def test_update_refuses_singular_innovation():
    cfg = FilterConfig(r_diag=(1e-3, 1e-3, 1e-3))
    cov = np.diag([1e16, 1e-9, 1e-9, 1.0, 1.0, 1.0])
    state = StateEstimate(np.zeros(6), cov, 0.0)
    with pytest.raises(SingularInnovation):
        update(state, fix([0.0, 0.0, 0.0]), cfg)


def test_repeated_fixes_shrink_uncertainty_toward_steady_state():
    cfg = FilterConfig()
    state = initialize(fix([0.0, 0.0, 4.0]), cfg)
    traces = []
    for _ in range(100):
        state = predict(state, 0.05, cfg)
        state = update(state, fix([0.0, 0.0, 4.0]), cfg)
        traces.append(float(np.trace(state.cov)))
    assert traces[-1] < traces[0]
    # Steady state: the last few steps barely move.
    assert abs(traces[-1] - traces[-2]) < 1e-6 * traces[0]
    assert_allclose(state.position, [0.0, 0.0, 4.0], atol=1e-9)


def test_covariance_health_through_long_random_soak():
    cfg = FilterConfig()
    state = initialize(fix([0.0, 0.0, 5.0]), cfg)
    for step in range(2000):
        state = predict(state, RNG.uniform(0.005, 0.1), cfg)
        if step % 3 == 0:
            state = update(state, fix(state.position + RNG.normal(scale=0.1, size=3)), cfg)
        assert np.abs(state.cov - state.cov.T).max() < 1e-9
        assert np.linalg.eigvalsh(state.cov)[0] >= -1e-9


# ---------------------------------------------------------------- validation


def test_state_estimate_shape_checks():
    with pytest.raises(ValueError, match="6-vector"):
        StateEstimate(np.zeros(3), np.eye(6), 0.0)
    with pytest.raises(ValueError, match="6x6"):
        StateEstimate(np.zeros(6), np.eye(3), 0.0)


def test_measurement_validation():
    with pytest.raises(ValueError, match="finite"):
        fix([np.nan, 0.0, 0.0])
    with pytest.raises(ValueError, match="3-vector"):
        fix([1.0, 2.0])


def test_filter_config_validation():
    with pytest.raises(ValueError, match="q_scale"):
        FilterConfig(q_scale=-1.0)
    with pytest.raises(ValueError, match="positive variances"):
        FilterConfig(r_diag=(1e-3, 0.0, 1e-3))
    with pytest.raises(ValueError, match="initial variances"):
        FilterConfig(p0_pos=0.0)
    with pytest.raises(ValueError, match="stale_timeout"):
        FilterConfig(stale_timeout=0.0)
