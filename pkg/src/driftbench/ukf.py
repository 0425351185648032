"""Unscented Kalman filtering for the yield / return model.

Sigma points follow the symmetric-set construction with a tunable center
weight w0: the mean carries w0, and 2*nx points sit at the mean plus and
minus scaled Cholesky columns of the covariance, each weighted
(1 - w0) / (2 nx). nx may exceed the state dimension, in which case the
columns are cycled and each displacement is divided by the square root of
its column's multiplicity, keeping the weighted moment reconstruction
exact for any point count.

Process noise enters in one of two ways. With noise_injection off, points
move through the deterministic transition, the scaled noise shape is added
to the predicted covariance, and a fresh cloud is drawn from that belief
for the observation stage (the standard additive-noise transform). With it
on, every point is propagated through the full noisy transition with its
own draws and the same cloud feeds the observation stage, which is what
large sigma sets are for: the noise contribution is estimated empirically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import substream
from .kalman import GaussianBelief
from .numerics import NumericsError, cholesky_psd, sym_inverse, symmetrize
from .statespace import Observation, State, SystemMatrices, YIELD_FLOOR, observe, step_state

__all__ = [
    "UkfConfig",
    "SigmaSet",
    "generate_sigma_points",
    "unscented_transform",
    "ukf_step",
    "ukf_run",
]


@dataclass(frozen=True)
class UkfConfig:
    """Sigma-point filter settings.

    w0 is the center weight, open interval (-1, 1). nx is the half-count
    of displaced points (2 * nx + 1 points total); the default matches the
    state dimension. p0_jitter scales the identity used as the initial
    covariance, keeping the first sigma cloud non-degenerate when noise
    injection is off; zero is fine when it is on.
    """

    w0: float = 1.0 / 3.0
    nx: int = 2
    noise_injection: bool = False
    seed: int = 0
    p0_jitter: float = 1e-6

    def __post_init__(self):
        if not -1.0 < self.w0 < 1.0:
            raise ValueError(f"w0 must lie in (-1, 1), got {self.w0:g}")
        if self.nx < 1:
            raise ValueError(f"nx must be >= 1, got {self.nx}")
        if self.p0_jitter < 0.0:
            raise ValueError(f"p0_jitter must be nonnegative, got {self.p0_jitter:g}")


@dataclass(frozen=True)
class SigmaSet:
    """Sigma points (rows) with their weights."""

    points: np.ndarray
    weights: np.ndarray
    nx: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("point and weight counts differ")

    def __len__(self) -> int:
        return self.points.shape[0]


def generate_sigma_points(belief: GaussianBelief, cfg: UkfConfig) -> SigmaSet:
    """Symmetric sigma set reproducing the belief's mean and covariance."""
    d = belief.dim
    if cfg.nx < d:
        raise ValueError(f"nx must be at least the state dimension {d}, got {cfg.nx}")
    scale = cfg.nx / (1.0 - cfg.w0)
    factor = cholesky_psd(symmetrize(scale * belief.cov), jitter=1e-12)
    multiplicity = np.bincount(np.arange(cfg.nx) % d, minlength=d)
    points = np.empty((2 * cfg.nx + 1, d))
    points[0] = belief.mean
    for i in range(1, cfg.nx + 1):
        col = (i - 1) % d
        delta = factor[:, col] / np.sqrt(multiplicity[col])
        points[i] = belief.mean + delta
        points[cfg.nx + i] = belief.mean - delta
    weights = np.full(2 * cfg.nx + 1, (1.0 - cfg.w0) / (2.0 * cfg.nx))
    weights[0] = cfg.w0
    return SigmaSet(points, weights, cfg.nx)


def unscented_transform(points, weights) -> GaussianBelief:
    """Weighted mean and covariance of a transformed point set."""
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
        raise ValueError(
            f"need matching point rows and weights, got {pts.shape} and {w.shape}"
        )
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to one, got {total:.12g}")
    mean = w @ pts
    centered = pts - mean
    cov = symmetrize((centered * w[:, None]).T @ centered)
    return GaussianBelief(mean, cov)


def ukf_step(
    m: SystemMatrices,
    belief: GaussianBelief,
    y: Observation,
    cfg: UkfConfig,
    rng: np.random.Generator | None = None,
) -> GaussianBelief:
    """Assimilate one observation, returning the new posterior belief."""
    sigma = generate_sigma_points(belief, cfg)
    n_points = len(sigma)
    if cfg.noise_injection:
        if rng is None:
            raise ValueError("noise injection requires a generator")
        draws = rng.standard_normal((n_points, 2))
    else:
        draws = np.zeros((n_points, 2))

    propagated = np.empty_like(sigma.points)
    for i in range(n_points):
        state = State(max(float(sigma.points[i, 0]), YIELD_FLOOR), float(sigma.points[i, 1]))
        propagated[i] = step_state(m, state, draws[i]).as_vector()

    predicted = unscented_transform(propagated, sigma.weights)
    if cfg.noise_injection:
        # the propagated cloud already carries the process noise, so it
        # doubles as the source for the observation stage
        obs_source = propagated
        obs_weights = sigma.weights
    else:
        yield_hat = max(float(belief.mean[0]), YIELD_FLOOR)
        predicted = GaussianBelief(
            predicted.mean, symmetrize(predicted.cov + yield_hat * m.cct)
        )
        # redraw the cloud so the observation stage sees the noise-inflated
        # predicted covariance, not just the transported one
        refreshed = generate_sigma_points(predicted, cfg)
        obs_source = refreshed.points
        obs_weights = refreshed.weights

    zero_obs_noise = np.zeros(2)
    projected = np.empty_like(obs_source)
    for i in range(obs_source.shape[0]):
        projected[i] = observe(
            m, State(float(obs_source[i, 0]), float(obs_source[i, 1])), zero_obs_noise
        ).as_vector()
    predicted_obs = unscented_transform(projected, obs_weights)
    innovation_cov = symmetrize(predicted_obs.cov + m.v2)

    centered_state = obs_source - predicted.mean
    centered_obs = projected - predicted_obs.mean
    cross_cov = (centered_state * obs_weights[:, None]).T @ centered_obs
    gain = cross_cov @ sym_inverse(innovation_cov)

    y_vec = y.as_vector() if isinstance(y, Observation) else np.asarray(y, dtype=float)
    mean = predicted.mean + gain @ (y_vec - predicted_obs.mean)
    cov = symmetrize(predicted.cov - gain @ innovation_cov @ gain.T)
    return GaussianBelief(mean, cov)


def ukf_run(
    m: SystemMatrices,
    observations: Sequence[Observation],
    cfg: UkfConfig,
) -> list[GaussianBelief]:
    """Filter a whole series, returning one belief per observation.

    The first belief is the initialization itself: mean at the first
    observation, covariance p0_jitter * I. Later observations each get a
    full sigma-point step seeded from their own noise substream.
    """
    observations = list(observations)
    if not observations:
        raise ValueError("at least one observation is required")
    first = observations[0]
    first_vec = first.as_vector() if isinstance(first, Observation) else np.asarray(first, dtype=float)
    belief = GaussianBelief(first_vec, cfg.p0_jitter * np.eye(2))
    beliefs = [belief]
    for n, y in enumerate(observations[1:], start=1):
        rng = substream(cfg.seed, "ukf_inject", n)
        try:
            belief = ukf_step(m, belief, y, cfg, rng)
        except NumericsError as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
        beliefs.append(belief)
    return beliefs
