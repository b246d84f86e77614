"""Tests for tracking composition, the kinematic effector and the closed loop."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tracking_control import (
    EffectorState,
    EffectorTarget,
    ManipulationOffset,
    TrackAction,
    TrackingGains,
    TrackingOffsets,
    compose_target,
    is_stable_tracking,
    max_stable_speed,
    simulate_tracking,
    step_effector,
    summarize_tracking,
    top_centroid,
    tracking_action,
    tracking_sweep,
    wrap_angle,
)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)
angles = arrays(np.float64, 3, elements=st.floats(min_value=-3.0, max_value=3.0))


def test_top_centroid_example():
    np.testing.assert_array_equal(top_centroid([(0, 0, 0), (2, 0, 1), (1, 3, 2)]), [1, 1, 2])
    np.testing.assert_array_equal(top_centroid([(0.5, -1, 3)]), [0.5, -1, 3])
    with pytest.raises(ValueError):
        top_centroid([])


@given(arrays(np.float64, (6, 3), elements=finite), vec3)
def test_top_centroid_translation_equivariant(points, shift):
    np.testing.assert_allclose(top_centroid(points + shift), top_centroid(points) + shift, atol=1e-9)


def test_tracking_action_adds_the_preset_offset():
    offsets = TrackingOffsets(position_offset=np.array([0, 0, 0.15]), orientation_preset=np.zeros(3))
    track = tracking_action([1.0, 0.5, 0.10], [0.1, 0, 0], offsets)
    np.testing.assert_allclose(track.position, [1.0, 0.5, 0.25])
    np.testing.assert_array_equal(track.velocity, [0.1, 0, 0])

    zero = TrackingOffsets(position_offset=np.zeros(3), orientation_preset=np.zeros(3))
    np.testing.assert_array_equal(tracking_action([1, 2, 3], np.zeros(3), zero).position, [1, 2, 3])


def test_compose_target_examples():
    track = TrackAction(position=np.array([1, 0, 0.25]), orientation=np.array([0, 0, np.pi]),
                        velocity=np.array([0.1, 0, 0]))
    same = compose_target(track)
    np.testing.assert_array_equal(same.position, track.position)
    np.testing.assert_array_equal(same.feedforward_velocity, track.velocity)

    target = compose_target(track, ManipulationOffset(np.array([0, 0, -0.05]), np.array([0, 0, np.pi / 2])))
    np.testing.assert_allclose(target.position, [1, 0, 0.20])
    assert target.orientation[2] == pytest.approx(-np.pi / 2)


def test_wrap_angle_convention():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_angle(0.0) == 0.0


@given(vec3, angles, vec3, angles, vec3, angles)
def test_compose_target_is_additive(pos, ori, da_pos, da_ori, db_pos, db_ori):
    track = TrackAction(position=pos, orientation=wrap_angle(ori), velocity=np.zeros(3))
    a = ManipulationOffset(da_pos, da_ori)
    b = ManipulationOffset(db_pos, db_ori)
    stepwise = compose_target(TrackAction(compose_target(track, a).position,
                                          compose_target(track, a).orientation, np.zeros(3)), b)
    combined = compose_target(track, ManipulationOffset(da_pos + db_pos, da_ori + db_ori))
    np.testing.assert_allclose(stepwise.position, combined.position, atol=1e-12)
    diff = wrap_angle(stepwise.orientation - combined.orientation)
    assert np.all(np.minimum(np.abs(diff), np.abs(np.abs(diff) - 2 * np.pi)) < 1e-9)


def at_rest(position, **kwargs):
    return EffectorState(position=np.asarray(position, dtype=float), **kwargs)


def test_step_effector_holds_position_at_target():
    state = at_rest([0.1, 0.2, 0.3])
    target = EffectorTarget(position=state.position.copy(), orientation=np.zeros(3),
                            feedforward_velocity=np.zeros(3))
    np.testing.assert_array_equal(step_effector(state, target).position, state.position)


def test_step_effector_saturates_at_max_speed():
    state = at_rest([0, 0, 0], max_speed=0.3, max_accel=2.0)
    target = EffectorTarget(position=np.array([1.0, 0, 0]), orientation=np.zeros(3),
                            feedforward_velocity=np.zeros(3))
    for _ in range(10):
        state = step_effector(state, target, TrackingGains(kp=50.0), dt=0.05)
    assert np.linalg.norm(state.velocity) == pytest.approx(0.3)


def test_step_effector_rejects_bad_dt():
    state = at_rest([0, 0, 0])
    target = EffectorTarget(np.zeros(3), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        step_effector(state, target, dt=0.0)


@given(vec3, vec3, vec3, st.floats(min_value=0.01, max_value=2.0))
def test_step_effector_respects_speed_and_accel_limits(start_vel, goal, ff, max_speed):
    norm = np.linalg.norm(start_vel)
    start_vel = start_vel * (max_speed / norm) if norm > max_speed else start_vel
    state = EffectorState(position=np.zeros(3), velocity=start_vel, max_speed=max_speed, max_accel=2.0)
    target = EffectorTarget(position=goal, orientation=np.zeros(3), feedforward_velocity=ff)
    nxt = step_effector(state, target, dt=0.05)
    assert np.linalg.norm(nxt.velocity) <= max_speed + 1e-12
    assert np.linalg.norm(nxt.velocity - state.velocity) <= 2.0 * 0.05 + 1e-12


def test_orientation_slews_at_the_angular_rate():
    state = at_rest([0, 0, 0])
    target = EffectorTarget(np.zeros(3), np.array([0, 0, 1.0]), np.zeros(3))
    nxt = step_effector(state, target, TrackingGains(angular_rate=1.5), dt=0.05)
    assert nxt.orientation[2] == pytest.approx(0.075)


def test_is_stable_tracking_examples():
    times = np.arange(0, 41) * 0.05
    assert is_stable_tracking(list(zip(times, np.zeros_like(times))), tol=0.005, hold=1.0)
    assert not is_stable_tracking(list(zip(times, np.full_like(times, 0.01))), tol=0.005, hold=1.0)
    assert not is_stable_tracking([], tol=0.005, hold=1.0)


def test_is_stable_tracking_waits_for_the_hold():
    times = np.arange(0, 121) * 0.05
    errors = np.where(np.arange(121) < 60, 0.01, 0.001)
    history = list(zip(times, errors))
    first = next(k for k in range(len(history))
                 if is_stable_tracking(history[:k + 1], tol=0.005, hold=1.0))
    assert first == 80
    assert times[first] >= 4.0 - 1e-9


def test_tracking_is_stable_at_low_belt_speed():
    summary = summarize_tracking(simulate_tracking(0.2))
    assert summary['stable']
    assert summary['settle_time_s'] <= 5.0
    assert summary['steady_err_m'] < 0.005


def test_tracking_falls_behind_a_fast_belt():
    trace = simulate_tracking(0.6, duration=10.0)
    assert not summarize_tracking(trace)['stable']
    assert trace['err_norm'].iloc[-1] > 0.25 * (10.0 - 2.0)


def test_static_object_is_a_step_response():
    trace = simulate_tracking(0.0)
    assert summarize_tracking(trace)['stable']
    assert trace['err_norm'].iloc[-1] < 0.005


def test_noiseless_error_eventually_decreases():
    trace = simulate_tracking(0.1, {'centroid_noise': 0.0}, duration=6.0)
    errors = trace['err_norm'].to_numpy()
    tail = errors[np.argmax(errors):]
    below = np.argmax(tail < 0.005)
    assert below > 0
    assert np.all(np.diff(tail[:below + 1]) <= 1e-9)


def test_simulation_is_deterministic():
    assert simulate_tracking(0.2, seed=3).equals(simulate_tracking(0.2, seed=3))


def test_max_stable_speed_bracket():
    assert 0.24 <= max_stable_speed() <= 0.30


def test_max_stable_speed_limited_by_the_actuator():
    slow = max_stable_speed({'max_speed': 0.1})
    assert slow <= 0.1
    assert max_stable_speed({'max_speed': 0.6}) >= max_stable_speed()


def test_tracking_sweep_table():
    sweep, traces = tracking_sweep([0.2, 0.6])
    assert list(sweep.columns) == ['belt_speed', 'stable', 'settle_time_s', 'steady_err_m']
    assert sweep['stable'].tolist() == [True, False]
    assert set(traces) == {0.2, 0.6}
    with pytest.raises(ValueError):
        tracking_sweep([])
