"""Linear Kalman filtering, generic and specialized to the yield model.

generic_lkf_step is the dimension-generic textbook recursion for
x' = Phi x + w, y = H x + v with fixed noise covariances Q and R. The
kf_* functions specialize it to the yield / return model, where the
process noise covariance is the shape matrix CC^T scaled by the previous
posterior yield estimate and the predicted mean picks up the drift term.

A run is seeded with the first observation and a zero prior covariance:
the first record updates that prior directly, without a transition in
front of it, which pins the first posterior to the first observation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import NumericsError, is_psd, sym_inverse, symmetrize
from .statespace import YIELD_FLOOR, Observation, SystemMatrices

__all__ = [
    "GaussianBelief",
    "KalmanGain",
    "KalmanRecord",
    "generic_lkf_step",
    "kf_predict",
    "kf_gain",
    "kf_update",
    "kf_run",
]


def _observation_vector(y) -> np.ndarray:
    if isinstance(y, Observation):
        return y.as_vector()
    arr = np.asarray(y, dtype=float)
    return arr.reshape(-1)


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a Gaussian state estimate.

    Construction enforces the covariance hygiene every filter step relies
    on: square shape matching the mean, symmetry to 1e-10, and positive
    semidefiniteness to 1e-8.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.ndim != 2 or cov.shape != (mean.size, mean.size):
            raise NumericsError(
                f"covariance shape {cov.shape} does not match mean of size {mean.size}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if float(np.abs(cov - cov.T).max()) > 1e-10 * scale:
            raise NumericsError("belief covariance is not symmetric")
        if not is_psd(cov, 1e-8):
            raise NumericsError("belief covariance is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class KalmanGain:
    gain: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))


@dataclass(frozen=True)
class KalmanRecord:
    """Prior, gain, and posterior produced for one observation."""

    prior: GaussianBelief
    gain: KalmanGain
    posterior: GaussianBelief


def generic_lkf_step(phi, q, h, r, belief: GaussianBelief, z):
    """One predict / gain / update cycle of the textbook linear filter.

    Returns (prior, gain, posterior). The update uses the plain form
    (I - KH) P, whose agreement with the Joseph form is one of the test
    oracles for this module.
    """
    phi = np.asarray(phi, dtype=float)
    q = np.asarray(q, dtype=float)
    h = np.asarray(h, dtype=float)
    r = np.asarray(r, dtype=float)
    z = _observation_vector(z)
    prior_cov = symmetrize(phi @ belief.cov @ phi.T + q)
    prior = GaussianBelief(phi @ belief.mean, prior_cov)
    innovation_cov = symmetrize(h @ prior_cov @ h.T + r)
    gain = prior_cov @ h.T @ sym_inverse(innovation_cov)
    innovation = z - h @ prior.mean
    eye = np.eye(prior.dim)
    posterior = GaussianBelief(
        prior.mean + gain @ innovation,
        symmetrize((eye - gain @ h) @ prior_cov),
    )
    return prior, KalmanGain(gain), posterior


def kf_predict(m: SystemMatrices, posterior: GaussianBelief) -> GaussianBelief:
    """Transition a posterior through the model dynamics.

    The process noise is CC^T scaled by the posterior yield estimate,
    floored at YIELD_FLOOR so the noise never vanishes entirely.
    """
    yield_hat = max(float(posterior.mean[0]), YIELD_FLOOR)
    mean = m.phi @ posterior.mean + m.drift
    cov = symmetrize(m.phi @ posterior.cov @ m.phi.T + yield_hat * m.cct)
    return GaussianBelief(mean, cov)


def kf_gain(m: SystemMatrices, prior: GaussianBelief) -> KalmanGain:
    """Optimal gain for the current prior."""
    innovation_cov = symmetrize(m.h @ prior.cov @ m.h.T + m.v2)
    return KalmanGain(prior.cov @ m.h.T @ sym_inverse(innovation_cov))


def kf_update(m: SystemMatrices, prior: GaussianBelief, gain: KalmanGain, y) -> GaussianBelief:
    """Fold one observation into the prior."""
    z = _observation_vector(y)
    innovation = z - m.h @ prior.mean
    eye = np.eye(prior.dim)
    return GaussianBelief(
        prior.mean + gain.gain @ innovation,
        symmetrize((eye - gain.gain @ m.h) @ prior.cov),
    )


def kf_run(
    m: SystemMatrices,
    observations: Sequence[Observation],
    init: GaussianBelief | None = None,
) -> list[KalmanRecord]:
    """Filter a whole series, returning one record per observation."""
    observations = list(observations)
    if not observations:
        raise ValueError("at least one observation is required")
    if init is None:
        init = GaussianBelief(_observation_vector(observations[0]), np.zeros((2, 2)))
    records: list[KalmanRecord] = []
    posterior = init
    for n, y in enumerate(observations):
        try:
            prior = init if n == 0 else kf_predict(m, posterior)
            gain = kf_gain(m, prior)
            posterior = kf_update(m, prior, gain, y)
        except NumericsError as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
        records.append(KalmanRecord(prior, gain, posterior))
    return records
