"""
Gaussian-process object state estimation from top-centroid history.

Each axis gets an independent squared-exponential GP over time, fitted on
mean-centred targets. The posterior mean gives the position (including
through short occlusions) and its analytic time derivative gives the
velocity fed forward by the tracking planner.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve

import config

logger = logging.getLogger(__name__)


class GpFitError(ValueError):
    """Raised when a history cannot be fitted; `axis` names the failing axis if any."""

    def __init__(self, message: str, axis: Optional[int] = None):
        super().__init__(message)
        self.axis = axis


@dataclass(frozen=True)
class CentroidSample:
    time: float
    position: Tuple[float, float, float]


@dataclass(frozen=True)
class GpHyperparams:
    length_scale: float = config.GP_DEFAULTS['length_scale']
    signal_variance: float = config.GP_DEFAULTS['signal_variance']
    noise_variance: float = config.GP_DEFAULTS['noise_variance']

    def validate(self):
        if self.length_scale <= 0:
            raise GpFitError(f"length_scale must be > 0, got {self.length_scale}")
        if self.signal_variance < 0 or self.noise_variance < 0:
            raise GpFitError("variances must be >= 0")
        if self.signal_variance + self.noise_variance <= 0:
            raise GpFitError("signal_variance + noise_variance must be > 0")

    def kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        diff = np.subtract.outer(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        return self.signal_variance * np.exp(-0.5 * (diff / self.length_scale) ** 2)


@dataclass(frozen=True)
class GpModel:
    """Fitted per-axis posterior; immutable once built."""
    hyper: GpHyperparams
    times: np.ndarray               # (n,)
    targets: np.ndarray             # (n, 3), raw positions
    target_mean: np.ndarray         # (3,)
    factor: Tuple                   # cho_factor of K + noise I, shared by all axes
    weights: np.ndarray             # (n, 3), (K + noise I)^-1 (y - mean)

    @property
    def num_samples(self) -> int:
        return len(self.times)


def _check_times(times: np.ndarray):
    if times.size == 0:
        raise GpFitError("history is empty")
    if not np.all(np.isfinite(times)):
        raise GpFitError("history contains non-finite times")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise GpFitError("history times must be strictly increasing")


def gp_fit(history: Sequence[CentroidSample],
           hyper: GpHyperparams = GpHyperparams()) -> GpModel:
    """
    Fit an independent GP per axis. The three axes share one Gram matrix,
    so it is factorised once and all centred targets are solved together.

    Raises:
        GpFitError: empty history, non-increasing times, or a kernel matrix
            that cannot be Cholesky-factorised (axis is set).
    """
    hyper.validate()
    times = np.array([s.time for s in history], dtype=float)
    _check_times(times)
    targets = np.array([s.position for s in history], dtype=float).reshape(len(history), 3)

    target_mean = targets.mean(axis=0)
    centred = targets - target_mean
    gram = hyper.kernel(times, times) + hyper.noise_variance * np.eye(len(times))

    try:
        factor = cho_factor(gram, lower=True)
    except LinAlgError as e:
        # Every axis shares the matrix, so the first axis is the one reported
        raise GpFitError(f"kernel matrix not positive definite on axis 0: {e}", axis=0) from e

    return GpModel(hyper=hyper, times=times, targets=targets, target_mean=target_mean,
                   factor=factor, weights=cho_solve(factor, centred))


def gp_predict(model: GpModel, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and marginal (latent) variance per axis at time t."""
    k = model.hyper.kernel(np.array([t]), model.times)[0]      # (n,)
    mean = model.target_mean + k @ model.weights

    # Same kernel on every axis, so the latent variance is shared
    variance = model.hyper.signal_variance - k @ cho_solve(model.factor, k)
    return mean, np.full(3, max(variance, 0.0))


def estimate_velocity(model: GpModel, t: float) -> np.ndarray:
    """Analytic time derivative of the posterior mean."""
    if model.num_samples < 2:
        raise GpFitError("velocity needs at least 2 samples")
    diff = t - model.times
    k = model.hyper.kernel(np.array([t]), model.times)[0]
    dk = -k * diff / model.hyper.length_scale ** 2
    return dk @ model.weights


def sliding_history(buffer: List[CentroidSample], new_sample: CentroidSample,
                    window: float = config.GP_DEFAULTS['window']) -> List[CentroidSample]:
    """Append new_sample and drop samples older than new_sample.time - window."""
    if window <= 0:
        raise GpFitError(f"window must be > 0, got {window}")
    if buffer and new_sample.time <= buffer[-1].time:
        raise GpFitError(f"out-of-order sample at t={new_sample.time} "
                         f"(last t={buffer[-1].time})")
    cutoff = new_sample.time - window
    kept = [s for s in buffer if s.time >= cutoff]
    kept.append(new_sample)
    return kept


@dataclass
class ObjectStateEstimator:
    """
    Streaming estimator for one object.

    observe() feeds external-view centroids; predict() returns position and
    velocity at any time, holding the last estimated velocity past the newest
    sample so occluded intervals are bridged.
    """
    hyper: GpHyperparams = field(default_factory=GpHyperparams)
    window: float = config.GP_DEFAULTS['window']
    history: List[CentroidSample] = field(default_factory=list)
    _model: Optional[GpModel] = field(default=None, repr=False)

    def observe(self, t: float, position: Sequence[float]):
        sample = CentroidSample(float(t), tuple(float(p) for p in position))
        self.history = sliding_history(self.history, sample, self.window)
        self._model = None

    @property
    def ready(self) -> bool:
        return len(self.history) > 0

    @property
    def last_time(self) -> float:
        return self.history[-1].time

    def model(self) -> GpModel:
        if self._model is None:
            self._model = gp_fit(self.history, self.hyper)
        return self._model

    def predict(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        if not self.history:
            raise GpFitError("no observations yet")
        model = self.model()
        if model.num_samples < 2:
            return np.array(self.history[-1].position, dtype=float), np.zeros(3)

        anchor = min(t, self.last_time)
        position, _ = gp_predict(model, anchor)
        velocity = estimate_velocity(model, anchor)
        if t > self.last_time:
            position = position + velocity * (t - self.last_time)
        return position, velocity


def gp_demo(belt_speed: float = 0.1, duration: float = 4.0, noise_std: float = 0.002,
            occlusion: Optional[Sequence[float]] = (1.5, 2.0),
            hyper: GpHyperparams = GpHyperparams(),
            window: float = config.GP_DEFAULTS['window'],
            dt: float = config.CONTROL_DT, seed: int = config.DEFAULT_SEED) -> pd.DataFrame:
    """
    Track an object moving along +x at belt_speed, observed at 20 Hz with
    Gaussian centroid noise and no observations inside the occlusion window.
    """
    rng = np.random.default_rng(seed)
    estimator = ObjectStateEstimator(hyper=hyper, window=window)
    steps = int(round(duration / dt))

    rows = []
    for i in range(steps + 1):
        t = i * dt
        true_x = belt_speed * t
        occluded = occlusion is not None and occlusion[0] <= t < occlusion[1]
        noise = rng.normal(0.0, noise_std, size=3)
        if not occluded:
            estimator.observe(t, np.array([true_x, 0.0, 0.0]) + noise)
        if not estimator.ready:
            continue
        position, velocity = estimator.predict(t)
        _, variance = gp_predict(estimator.model(), t)
        rows.append({
            't': t,
            'x_true': true_x,
            'x_pred': position[0],
            'x_var': variance[0],
            'vx_true': belt_speed,
            'vx_pred': velocity[0],
        })

    logger.info(f"GP demo: {len(rows)} rows, belt {belt_speed} m/s, occlusion {occlusion}")
    return pd.DataFrame(rows, columns=['t', 'x_true', 'x_pred', 'x_var', 'vx_true', 'vx_pred'])
