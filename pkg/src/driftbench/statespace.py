"""Two-dimensional dividend-yield / real-return state-space model.

The state is Z_n = (X_n, dR_n): the dividend yield and the real return. One
step of the dynamics is

    Z_n = Phi Z_{n-1} + drift + sqrt(X_{n-1}) * C W_n,

with W_n a standard normal pair, so the process noise scale rides on the
previous yield. Observations add diagonal noise on top of the state:

    Y_n = H Z_n + V B_n,  H = I,  V = diag(Q1, Q2).

The noise geometry is carried as CC^T rather than C itself because CC^T is
a real polynomial in the parameters for any rho, while C picks up an
imaginary entry as soon as |rho| > 1. Positive semidefiniteness of CC^T is
the honest validity condition and is enforced at load time; the stock
parameter set shipped with the CLI fails it, which is surfaced as an error
rather than silently repaired.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import substream
from .numerics import cholesky_psd, is_psd, symmetrize

__all__ = [
    "YIELD_FLOOR",
    "PARAM_NAMES",
    "ParameterError",
    "ModelParams",
    "SystemMatrices",
    "State",
    "Observation",
    "TrajectoryRecord",
    "Trajectory",
    "load_params",
    "build_matrices",
    "process_noise_shape",
    "step_state",
    "observe",
    "simulate",
]

# Yields sit under a square root in the dynamics; estimates and simulated
# states are floored here instead of being allowed to touch zero.
YIELD_FLOOR = 1e-8

PARAM_NAMES = ("k", "theta", "sigma", "mu", "a", "rho", "Q1", "Q2")


class ParameterError(ValueError):
    """Model parameters are missing or describe an invalid model."""


@dataclass(frozen=True)
class ModelParams:
    """Raw model parameters in the data's units.

    k and theta shape the yield mean reversion, sigma its noise, mu couples
    the return to the yield, a and rho shape the return-specific noise, and
    Q1, Q2 scale the observation noise per component.
    """

    k: float
    theta: float
    sigma: float
    mu: float
    a: float
    rho: float
    Q1: float
    Q2: float


@dataclass(frozen=True)
class SystemMatrices:
    """Dense matrices of the linearized system.

    phi:      (2, 2) state transition
    drift:    (2,) additive drift
    cct:      (2, 2) process-noise shape CC^T (scaled by the running yield)
    cct_chol: lower Cholesky factor of cct
    h:        (2, 2) observation matrix (identity)
    v:        (2, 2) observation noise scale diag(Q1, Q2)
    v2:       (2, 2) observation noise covariance V^2
    """

    phi: np.ndarray
    drift: np.ndarray
    cct: np.ndarray
    cct_chol: np.ndarray
    h: np.ndarray
    v: np.ndarray
    v2: np.ndarray


@dataclass(frozen=True)
class State:
    X: float
    dR: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.X, self.dR], dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "State":
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (2,):
            raise ValueError(f"state vector must have shape (2,), got {arr.shape}")
        return cls(float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class Observation:
    Y1: float
    Y2: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.Y1, self.Y2], dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "Observation":
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (2,):
            raise ValueError(f"observation vector must have shape (2,), got {arr.shape}")
        return cls(float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class TrajectoryRecord:
    index: int
    state: State
    observation: Observation


@dataclass(frozen=True)
class Trajectory:
    records: tuple[TrajectoryRecord, ...]

    def __post_init__(self):
        for expected, record in enumerate(self.records):
            if record.index != expected:
                raise ValueError(
                    f"trajectory indices must run 0..n-1, got {record.index} at position {expected}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def states(self) -> list[State]:
        return [record.state for record in self.records]

    def observations(self) -> list[Observation]:
        return [record.observation for record in self.records]


def process_noise_shape(params: ModelParams) -> np.ndarray:
    """CC^T written out as real polynomials in the parameters."""
    c11 = params.sigma / (1.0 + params.k)
    c21 = params.mu * params.sigma / (1.0 + params.k) + params.a * params.rho
    tail = params.a ** 2 * (1.0 - params.rho ** 2)
    return np.array(
        [
            [c11 * c11, c11 * c21],
            [c11 * c21, c21 * c21 + tail],
        ]
    )


def load_params(raw: Mapping[str, float], rho_policy: str = "reject") -> ModelParams:
    """Validate a raw parameter mapping into ModelParams.

    rho_policy decides what happens when |rho| > 1, which makes CC^T
    indefinite: "reject" raises, "clamp" pulls rho to sign(rho) * 1 and
    records a warning.
    """
    if rho_policy not in ("reject", "clamp"):
        raise ParameterError(f"rho_policy must be 'reject' or 'clamp', got {rho_policy!r}")
    missing = [name for name in PARAM_NAMES if name not in raw]
    if missing:
        raise ParameterError(f"missing parameter(s): {', '.join(missing)}")
    values = {}
    for name in PARAM_NAMES:
        try:
            values[name] = float(raw[name])
        except (TypeError, ValueError):
            raise ParameterError(f"parameter {name!r} is not a number: {raw[name]!r}") from None
        if not math.isfinite(values[name]):
            raise ParameterError(f"parameter {name!r} must be finite")
    if values["k"] == -1.0:
        raise ParameterError("k = -1 makes the transition weight 1/(1+k) undefined")
    if not values["sigma"] > 0.0:
        raise ParameterError(f"sigma must be positive, got {values['sigma']:g}")
    if values["a"] < 0.0:
        raise ParameterError(f"a must be nonnegative, got {values['a']:g}")
    rho = values["rho"]
    if abs(rho) > 1.0:
        if rho_policy == "reject":
            raise ParameterError(
                f"rho={rho:g}: |rho| > 1 makes the process-noise shape CC^T indefinite "
                f"(its determinant c11^2 * a^2 * (1 - rho^2) goes negative), so no real "
                f"noise loading C exists; supply |rho| <= 1 or use rho_policy='clamp'"
            )
        clamped = math.copysign(1.0, rho)
        warnings.warn(
            f"rho={rho:g} clamped to {clamped:g}; the return-specific noise "
            f"a^2*(1-rho^2) collapses to zero",
            stacklevel=2,
        )
        values["rho"] = clamped
    params = ModelParams(**values)
    if not is_psd(process_noise_shape(params), 1e-10):
        raise ParameterError(
            "process-noise shape CC^T is not positive semidefinite for these parameters"
        )
    return params


def build_matrices(params: ModelParams) -> SystemMatrices:
    """Assemble the dense system matrices for a validated parameter set."""
    denom = 1.0 + params.k
    if denom == 0.0:
        raise ParameterError("k = -1 makes the transition weight 1/(1+k) undefined")
    phi = np.array(
        [
            [1.0 / denom, 0.0],
            [params.mu / denom, 0.0],
        ]
    )
    drift = np.array(
        [
            params.k * params.theta / denom,
            params.mu * params.k * params.theta / denom,
        ]
    )
    cct = process_noise_shape(params)
    if not is_psd(cct, 1e-10):
        raise ParameterError(
            "process-noise shape CC^T is not positive semidefinite for these parameters"
        )
    cct_chol = cholesky_psd(symmetrize(cct), jitter=1e-14)
    h = np.eye(2)
    v = np.diag([params.Q1, params.Q2])
    return SystemMatrices(
        phi=phi,
        drift=drift,
        cct=cct,
        cct_chol=cct_chol,
        h=h,
        v=v,
        v2=v @ v,
    )


def step_state(m: SystemMatrices, z_prev: State, noise) -> State:
    """One transition step; noise is the standard-normal pair W_n."""
    if z_prev.X < 0.0:
        raise ValueError(f"state yield must be nonnegative, got {z_prev.X:g}")
    w = np.asarray(noise, dtype=float)
    if w.shape != (2,):
        raise ValueError(f"transition noise must have shape (2,), got {w.shape}")
    vec = m.phi @ z_prev.as_vector() + m.drift + math.sqrt(z_prev.X) * (m.cct_chol @ w)
    return State(max(float(vec[0]), YIELD_FLOOR), float(vec[1]))


def observe(m: SystemMatrices, z: State, noise) -> Observation:
    """Observation of a state; noise is the standard-normal pair B_n."""
    b = np.asarray(noise, dtype=float)
    if b.shape != (2,):
        raise ValueError(f"observation noise must have shape (2,), got {b.shape}")
    vec = m.h @ z.as_vector() + m.v @ b
    return Observation(float(vec[0]), float(vec[1]))


def simulate(m: SystemMatrices, z0: State, n_steps: int, seed: int) -> Trajectory:
    """Simulate n_steps transitions starting from (but not recording) z0.

    Noise comes from the per-record substreams of the given seed, so record
    n is reproducible on its own and independent of every other consumer of
    the same seed.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if z0.X < 0.0:
        raise ValueError(f"initial yield must be nonnegative, got {z0.X:g}")
    records = []
    z = z0
    for n in range(n_steps):
        w = substream(seed, "sim_state", n).standard_normal(2)
        b = substream(seed, "sim_obs", n).standard_normal(2)
        z = step_state(m, z, w)
        y = observe(m, z, b)
        records.append(TrajectoryRecord(n, z, y))
    return Trajectory(tuple(records))
