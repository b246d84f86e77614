"""Gaussian-mixture action distributions, EM fitting and the two-target ambiguity demo."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

import config

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = config.GMM_DEFAULTS['variance_floor']
LOG_2PI = np.log(2.0 * np.pi)


class MixtureError(ValueError):
    """Raised for invalid mixtures or data."""


def _as_data(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise MixtureError(f"data must be a sequence of vectors, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GaussianMixture:
    """K diagonal-covariance components over d-dimensional actions."""
    weights: np.ndarray        # (K,)
    means: np.ndarray          # (K, d)
    variances: np.ndarray      # (K, d)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(len(weights), -1)
        variances = np.asarray(self.variances, dtype=float).reshape(means.shape)

        if len(weights) == 0:
            raise MixtureError("a mixture needs at least one component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise MixtureError(f"weights must be non-negative and sum to 1, got {weights}")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(variances))):
            raise MixtureError("means and variances must be finite")

        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'means', means)
        object.__setattr__(self, 'variances', np.maximum(variances, VARIANCE_FLOOR))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """log(alpha_k N(x | mu_k, sigma_k^2)) for rows of x, shape (n, K)."""
        diff = x[:, None, :] - self.means[None, :, :]
        log_norm = -0.5 * (self.dim * LOG_2PI + np.log(self.variances).sum(axis=1))
        quad = -0.5 * (diff ** 2 / self.variances[None, :, :]).sum(axis=2)
        with np.errstate(divide='ignore'):
            log_w = np.log(self.weights)
        return log_w[None, :] + log_norm[None, :] + quad

    def mixture_mean(self) -> np.ndarray:
        return self.weights @ self.means

    def to_dict(self) -> Dict:
        return {
            'weights': self.weights.tolist(),
            'means': self.means.tolist(),
            'variances': self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'GaussianMixture':
        try:
            return cls(weights=data['weights'], means=data['means'], variances=data['variances'])
        except KeyError as e:
            raise MixtureError(f"mixture JSON is missing {e}") from e


def log_density(gmm: GaussianMixture, x) -> float:
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.shape[0] != gmm.dim:
        raise MixtureError(f"point has dimension {point.shape[0]}, mixture has {gmm.dim}")
    return float(logsumexp(gmm.component_log_densities(point[None, :])[0]))


def sample(gmm: GaussianMixture, rng: np.random.Generator) -> np.ndarray:
    k = rng.choice(gmm.n_components, p=gmm.weights)
    return gmm.means[k] + np.sqrt(gmm.variances[k]) * rng.standard_normal(gmm.dim)


def sample_n(gmm: GaussianMixture, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """n draws and the component index of each."""
    components = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    noise = rng.standard_normal((n, gmm.dim))
    return gmm.means[components] + np.sqrt(gmm.variances[components]) * noise, components


def mode_action(gmm: GaussianMixture) -> np.ndarray:
    """Component mean with the highest mixture density; first index wins ties."""
    scores = logsumexp(gmm.component_log_densities(gmm.means), axis=1)
    return gmm.means[int(np.argmax(scores))].copy()


def fit_unimodal(data) -> Tuple[np.ndarray, np.ndarray]:
    """Gaussian MLE: sample mean and per-dimension (ddof=0) variance, floored."""
    x = _as_data(data)
    if len(x) < 2:
        raise MixtureError(f"unimodal fit needs at least 2 points, got {len(x)}")
    mean = x.mean(axis=0)
    variance = np.maximum(((x - mean) ** 2).mean(axis=0), VARIANCE_FLOOR)
    return mean, variance


def mean_log_likelihood(gmm: GaussianMixture, data) -> float:
    x = _as_data(data)
    return float(logsumexp(gmm.component_log_densities(x), axis=1).mean())


def _kmeans_init(x: np.ndarray, k: int, rng: np.random.Generator, iters: int) -> np.ndarray:
    """k-means++ seeding followed by a few Lloyd iterations; returns centres (k, d)."""
    centres = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.array(centres)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centres.append(x[rng.integers(len(x))])
        else:
            centres.append(x[rng.choice(len(x), p=d2 / total)])
    centres = np.array(centres)

    for _ in range(iters):
        labels = np.argmin(((x[:, None, :] - centres[None]) ** 2).sum(axis=2), axis=1)
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centres[j] = members.mean(axis=0)
    return centres


@dataclass
class EmTrace:
    mixture: GaussianMixture
    log_likelihood: List[float] = field(default_factory=list)
    reseeds: int = 0

    @property
    def converged_ll(self) -> float:
        return self.log_likelihood[-1]


def fit_em_trace(data, k: int, init_seed: int = config.DEFAULT_SEED,
                 max_iters: int = config.GMM_DEFAULTS['max_iters'],
                 tol: float = config.GMM_DEFAULTS['tol'],
                 kmeans_iters: int = config.GMM_DEFAULTS['kmeans_iters']) -> EmTrace:
    """
    Diagonal-covariance EM, returning the per-iteration mean log-likelihood.

    Raises:
        MixtureError: if k < 1 or there are fewer points than components
    """
    x = _as_data(data)
    n, d = x.shape
    if k < 1:
        raise MixtureError(f"K must be >= 1, got {k}")
    if n < k:
        raise MixtureError(f"need at least K={k} points, got {n}")

    if k == 1:
        mean, variance = fit_unimodal(x) if n >= 2 else (x[0], np.full(d, VARIANCE_FLOOR))
        gmm = GaussianMixture(np.ones(1), mean[None, :], variance[None, :])
        return EmTrace(mixture=gmm, log_likelihood=[mean_log_likelihood(gmm, x)])

    rng = np.random.default_rng(init_seed)
    centres = _kmeans_init(x, k, rng, kmeans_iters)
    labels = np.argmin(((x[:, None, :] - centres[None]) ** 2).sum(axis=2), axis=1)
    responsibilities = np.zeros((n, k))
    responsibilities[np.arange(n), labels] = 1.0

    trace = EmTrace(mixture=None)
    previous = -np.inf
    for iteration in range(max_iters):
        # M step
        nk = responsibilities.sum(axis=0)
        collapsed = np.flatnonzero(nk < 1e-10)
        if collapsed.size:
            # Worst-explained points first; each collapsed component restarts on its own point
            if trace.mixture is None:
                ranking = np.argsort(-((x - x.mean(axis=0)) ** 2).sum(axis=1), kind='stable')
            else:
                fit = logsumexp(trace.mixture.component_log_densities(x), axis=1)
                ranking = np.argsort(fit, kind='stable')
            for j, point in zip(collapsed, ranking):
                logger.warning(f"EM iteration {iteration}: component {j} collapsed, "
                               f"re-seeding from point {point}")
                responsibilities[:, j] = 0.0
                responsibilities[point, j] = 1.0
                trace.reseeds += 1
        nk = responsibilities.sum(axis=0)
        weights = nk / n
        means = (responsibilities.T @ x) / nk[:, None]
        variances = (responsibilities.T @ x ** 2) / nk[:, None] - means ** 2
        gmm = GaussianMixture(weights / weights.sum(), means, np.maximum(variances, VARIANCE_FLOOR))

        # E step
        log_joint = gmm.component_log_densities(x)
        log_norm = logsumexp(log_joint, axis=1, keepdims=True)
        responsibilities = np.exp(log_joint - log_norm)
        current = float(log_norm.mean())

        trace.mixture = gmm
        trace.log_likelihood.append(current)
        if current - previous < tol:
            break
        previous = current

    logger.debug(f"EM K={k}: {len(trace.log_likelihood)} iterations, "
                 f"mean log-likelihood {trace.converged_ll:.6f}")
    return trace


def fit_em(data, k: int = config.GMM_DEFAULTS['components'], init_seed: int = config.DEFAULT_SEED,
           max_iters: int = config.GMM_DEFAULTS['max_iters'],
           tol: float = config.GMM_DEFAULTS['tol']) -> GaussianMixture:
    return fit_em_trace(data, k, init_seed, max_iters, tol).mixture


@dataclass
class ContextualPolicyTable:
    """Mixture over action offsets per quantised observation (relative pose)."""
    cell_size: float = 0.01
    components: int = 2
    mixtures: Dict[Tuple[int, ...], GaussianMixture] = field(default_factory=dict)

    def key(self, observation) -> Tuple[int, ...]:
        obs = np.asarray(observation, dtype=float).reshape(-1)
        return tuple(int(v) for v in np.floor(obs / self.cell_size + 0.5))

    def fit(self, observations, actions, seed: int = config.DEFAULT_SEED) -> 'ContextualPolicyTable':
        acts = _as_data(actions)
        grouped: Dict[Hashable, List[np.ndarray]] = {}
        for obs, act in zip(observations, acts):
            grouped.setdefault(self.key(obs), []).append(act)

        for key, group in sorted(grouped.items()):
            data = np.array(group)
            k = min(self.components, len(data))
            self.mixtures[key] = fit_em(data, k=k, init_seed=seed)
        logger.debug(f"Policy table fitted on {len(acts)} pairs, {len(self.mixtures)} contexts")
        return self

    def action_for(self, observation) -> Optional[np.ndarray]:
        gmm = self.mixtures.get(self.key(observation))
        return None if gmm is None else mode_action(gmm)

    def to_dict(self) -> Dict:
        return {
            'cell_size': self.cell_size,
            'components': self.components,
            'mixtures': [{'key': list(key), **gmm.to_dict()} for key, gmm in self.mixtures.items()],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ContextualPolicyTable':
        table = cls(cell_size=data['cell_size'], components=data['components'])
        for entry in data['mixtures']:
            table.mixtures[tuple(entry['key'])] = GaussianMixture.from_dict(entry)
        return table


DEMO_COLUMNS = ['model', 'success_rate', 'mean_offset_m']


def two_target_demo(separation: float = 0.2, noise: float = 0.01, episodes: int = 200,
                    seed: int = config.DEFAULT_SEED,
                    demos_per_episode: int = config.GMM_DEFAULTS['demos_per_episode']) -> pd.DataFrame:
    """
    Contrast a unimodal mean-regression controller with a two-component
    mixture controller when demonstrations reach one of two targets.

    Each episode draws a balanced demonstration batch, fits both models and
    commands one 1-D endpoint from each. The mixture controller is a policy
    table with a single context, since every demonstration starts from the
    same relative pose. A reach succeeds when the endpoint lies within
    3 * noise of either target.
    """
    if separation <= 4 * noise:
        raise MixtureError(f"separation {separation} must exceed 4 * noise ({4 * noise})")
    if episodes < 1:
        raise MixtureError("episodes must be >= 1")

    targets = np.array([-separation / 2, separation / 2])
    tolerance = 3.0 * noise
    streams = np.random.SeedSequence(seed).spawn(episodes)

    unimodal_endpoints, mixture_endpoints = [], []
    for child in streams:
        rng = np.random.default_rng(child)
        chosen = targets[np.arange(demos_per_episode) % 2]
        demos = chosen + rng.normal(0.0, noise, size=demos_per_episode)

        mean, _ = fit_unimodal(demos)
        start = np.zeros((demos_per_episode, 1))
        policy = ContextualPolicyTable(components=2).fit(start, demos[:, None],
                                                         seed=int(rng.integers(2 ** 32)))
        unimodal_endpoints.append(mean[0])
        mixture_endpoints.append(policy.action_for(start[0])[0])

    rows = []
    for name, endpoints in (('unimodal', unimodal_endpoints), ('mixture', mixture_endpoints)):
        endpoints = np.array(endpoints)
        hits = np.min(np.abs(endpoints[:, None] - targets[None, :]), axis=1) <= tolerance
        rows.append({
            'model': name,
            'success_rate': float(hits.mean()),
            'mean_offset_m': float(abs(endpoints.mean())),
        })
        logger.info(f"{name}: success {hits.mean():.2%} over {episodes} episodes")
    return pd.DataFrame(rows, columns=DEMO_COLUMNS)
