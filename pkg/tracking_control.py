"""
Visual-servo tracking planner, hybrid control-target composition and a
kinematic stand-in for the arm.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from state_estimation import GpHyperparams, ObjectStateEstimator

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['t', 'target_x', 'target_y', 'target_z', 'pos_x', 'pos_y', 'pos_z', 'err_norm']
SWEEP_COLUMNS = ['belt_speed', 'stable', 'settle_time_s', 'steady_err_m']


def _vec(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(3)


def wrap_angle(angle):
    """Wrap radians into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


def error_norm(a, b) -> float:
    return float(np.linalg.norm(_vec(a) - _vec(b)))


@dataclass(frozen=True)
class TrackingOffsets:
    position_offset: np.ndarray = field(default_factory=lambda: _vec(config.TRACKING_DEFAULTS['position_offset']))
    orientation_preset: np.ndarray = field(default_factory=lambda: _vec(config.TRACKING_DEFAULTS['orientation_preset']))


@dataclass(frozen=True)
class TrackAction:
    position: np.ndarray
    orientation: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class ManipulationOffset:
    delta_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    delta_orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def magnitude(self) -> float:
        return float(np.linalg.norm(self.delta_position))


@dataclass(frozen=True)
class EffectorTarget:
    position: np.ndarray
    orientation: np.ndarray
    feedforward_velocity: np.ndarray


@dataclass(frozen=True)
class EffectorState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    max_speed: float = config.TRACKING_DEFAULTS['max_speed']
    max_accel: float = config.TRACKING_DEFAULTS['max_accel']

    def __post_init__(self):
        if self.max_speed <= 0 or self.max_accel <= 0:
            raise ValueError("max_speed and max_accel must be > 0")


@dataclass(frozen=True)
class TrackingGains:
    kp: float = config.TRACKING_DEFAULTS['kp']
    angular_rate: float = config.TRACKING_DEFAULTS['angular_rate']


def top_centroid(points) -> np.ndarray:
    """(mean x, mean y, max z) of an object's observed points."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("top_centroid needs at least one point")
    pts = pts.reshape(-1, 3)
    return np.array([pts[:, 0].mean(), pts[:, 1].mean(), pts[:, 2].max()])


def tracking_action(centroid, velocity, offsets: TrackingOffsets = TrackingOffsets()) -> TrackAction:
    return TrackAction(
        position=_vec(centroid) + offsets.position_offset,
        orientation=_vec(offsets.orientation_preset),
        velocity=_vec(velocity),
    )


def compose_target(track: TrackAction, manip: ManipulationOffset = ManipulationOffset()) -> EffectorTarget:
    """Sum the tracking action and manipulation offsets into one control target."""
    return EffectorTarget(
        position=track.position + _vec(manip.delta_position),
        orientation=wrap_angle(track.orientation + _vec(manip.delta_orientation)),
        feedforward_velocity=_vec(track.velocity),
    )


def _clamp_norm(v: np.ndarray, limit: float) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm > limit:
        return v * (limit / norm)
    return v


def step_effector(state: EffectorState, target: EffectorTarget,
                  gains: TrackingGains = TrackingGains(),
                  dt: float = config.CONTROL_DT) -> EffectorState:
    """
    Advance the point-mass effector one control period.

    Commanded velocity is feedforward plus proportional feedback, clamped to
    max_speed; the velocity change is clamped to max_accel * dt.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")

    command = target.feedforward_velocity + gains.kp * (target.position - state.position)
    command = _clamp_norm(command, state.max_speed)
    # Both endpoints lie inside the speed ball, so the new velocity does too
    velocity = state.velocity + _clamp_norm(command - state.velocity, state.max_accel * dt)
    position = state.position + velocity * dt

    turn = wrap_angle(target.orientation - state.orientation)
    max_turn = gains.angular_rate * dt
    orientation = wrap_angle(state.orientation + np.clip(turn, -max_turn, max_turn))

    return replace(state, position=position, velocity=velocity, orientation=orientation)


def is_stable_tracking(error_history: Sequence[Tuple[float, float]],
                       tol: float = config.TRACKING_DEFAULTS['stable_tol'],
                       hold: float = config.TRACKING_DEFAULTS['stable_hold']) -> bool:
    """True iff the trailing run of errors below tol spans at least `hold` seconds."""
    if tol <= 0 or hold <= 0:
        raise ValueError("tol and hold must be > 0")
    if not error_history:
        return False

    last_t = error_history[-1][0]
    start_t = None
    for t, err in reversed(error_history):
        if err >= tol:
            break
        start_t = t
    if start_t is None:
        return False
    return last_t - start_t >= hold - 1e-9


def settle_time(times: Sequence[float], errors: Sequence[float],
                tol: float, hold: float) -> Optional[float]:
    """First time at which the error has stayed below tol for `hold` seconds."""
    span_start = None
    for t, err in zip(times, errors):
        if err >= tol:
            span_start = None
            continue
        if span_start is None:
            span_start = t
        if t - span_start >= hold - 1e-9:
            return float(t)
    return None


def _tracking_limits(params: Dict) -> Tuple[TrackingGains, TrackingOffsets, float, float]:
    gains = TrackingGains(kp=params['kp'], angular_rate=params['angular_rate'])
    offsets = TrackingOffsets(position_offset=_vec(params['position_offset']),
                              orientation_preset=_vec(params['orientation_preset']))
    return gains, offsets, params['max_speed'], params['max_accel']


def simulate_tracking(belt_speed: float, params: Optional[Dict] = None,
                      duration: Optional[float] = None, dt: float = config.CONTROL_DT,
                      seed: int = config.DEFAULT_SEED,
                      hyper: GpHyperparams = GpHyperparams()) -> pd.DataFrame:
    """
    Close the loop on an object moving along +x at belt_speed.

    The estimator only sees noisy external centroids; the error column is
    measured against the true tracking position.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    params = {**config.TRACKING_DEFAULTS, **(params or {})}
    duration = params['duration'] if duration is None else duration
    gains, offsets, max_speed, max_accel = _tracking_limits(params)

    rng = np.random.default_rng(seed)
    estimator = ObjectStateEstimator(hyper=hyper)

    def true_target(t: float) -> np.ndarray:
        return np.array([belt_speed * t, 0.0, 0.0]) + offsets.position_offset

    effector = EffectorState(position=true_target(0.0) + _vec(params['start_offset']),
                             orientation=offsets.orientation_preset.copy(),
                             max_speed=max_speed, max_accel=max_accel)

    rows = []
    steps = int(round(duration / dt))
    for k in range(steps + 1):
        t = k * dt
        centroid = np.array([belt_speed * t, 0.0, 0.0])
        estimator.observe(t, centroid + rng.normal(0.0, params['centroid_noise'], size=3))

        goal = true_target(t)
        rows.append([t, *goal, *effector.position, error_norm(goal, effector.position)])

        est_position, est_velocity = estimator.predict(t)
        target = compose_target(tracking_action(est_position, est_velocity, offsets))
        effector = step_effector(effector, target, gains, dt)

    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def summarize_tracking(trace: pd.DataFrame,
                       tol: float = config.TRACKING_DEFAULTS['stable_tol'],
                       hold: float = config.TRACKING_DEFAULTS['stable_hold']) -> Dict:
    times = trace['t'].to_numpy()
    errors = trace['err_norm'].to_numpy()
    stable = is_stable_tracking(list(zip(times, errors)), tol, hold)
    tail = errors[times >= times[-1] - hold + 1e-9]
    return {
        'stable': bool(stable),
        'settle_time_s': settle_time(times, errors, tol, hold) if stable else float('nan'),
        'steady_err_m': float(tail.max()),
    }


def max_stable_speed(params: Optional[Dict] = None, tol: Optional[float] = None,
                     hold: Optional[float] = None, seed: int = config.DEFAULT_SEED) -> float:
    """
    Bisection for the largest belt speed that still reaches stable tracking
    within the search horizon.
    """
    params = {**config.TRACKING_DEFAULTS, **(params or {})}
    tol = params['stable_tol'] if tol is None else tol
    hold = params['stable_hold'] if hold is None else hold
    resolution = params['speed_resolution']

    def stable_at(speed: float) -> bool:
        trace = simulate_tracking(speed, params, duration=params['search_horizon'], seed=seed)
        return summarize_tracking(trace, tol, hold)['stable']

    lo, hi = 0.0, 1.5 * params['max_speed']
    if not stable_at(lo):
        logger.warning("Tracking is not stable even for a static object")
        return 0.0
    if stable_at(hi):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if stable_at(mid):
            lo = mid
        else:
            hi = mid
    logger.info(f"Max stable tracking speed: {lo:.3f} m/s (max_speed {params['max_speed']})")
    return lo


def tracking_sweep(speeds: Sequence[float], params: Optional[Dict] = None,
                   seed: int = config.DEFAULT_SEED) -> Tuple[pd.DataFrame, Dict[float, pd.DataFrame]]:
    """Simulate each belt speed and summarise it; returns the sweep table and the traces."""
    if not speeds:
        raise ValueError("tracking sweep needs at least one speed")
    params = {**config.TRACKING_DEFAULTS, **(params or {})}

    rows: List[Dict] = []
    traces = {}
    for speed in speeds:
        trace = simulate_tracking(float(speed), params, seed=seed)
        summary = summarize_tracking(trace, params['stable_tol'], params['stable_hold'])
        logger.info(f"Belt {speed:.2f} m/s: stable={summary['stable']}, "
                    f"steady error {summary['steady_err_m'] * 1000:.1f} mm")
        rows.append({'belt_speed': float(speed), **summary})
        traces[float(speed)] = trace
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS), traces
