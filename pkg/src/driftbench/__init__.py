"""State estimation on a dividend-yield / real-return state-space model.

Three filters share one model and one seeded-randomness contract: a linear
Kalman filter specialized to the model, a sigma-point filter with optional
process-noise injection, and a stochastic particle-flow filter that moves
an ensemble from prior to posterior in pseudo-time. The cli module ties
them to a simulator, CSV input and output, and figure rendering.
"""

from .data import (
    DataError,
    ResultFrame,
    ResultRow,
    SeriesFrame,
    SeriesRow,
    load_results,
    load_series,
    substream,
    write_results,
    write_series,
)
from .kalman import GaussianBelief, KalmanGain, KalmanRecord, kf_run
from .numerics import NumericsError, cholesky_psd, sym_inverse, symmetrize
from .pflow import FlowConfig, ParticleEnsemble, pff_assimilate, pff_run
from .statespace import (
    ModelParams,
    Observation,
    ParameterError,
    State,
    SystemMatrices,
    Trajectory,
    build_matrices,
    load_params,
    simulate,
)
from .ukf import UkfConfig, ukf_run

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ResultFrame",
    "ResultRow",
    "SeriesFrame",
    "SeriesRow",
    "load_results",
    "load_series",
    "substream",
    "write_results",
    "write_series",
    "GaussianBelief",
    "KalmanGain",
    "KalmanRecord",
    "kf_run",
    "NumericsError",
    "cholesky_psd",
    "sym_inverse",
    "symmetrize",
    "FlowConfig",
    "ParticleEnsemble",
    "pff_assimilate",
    "pff_run",
    "ModelParams",
    "Observation",
    "ParameterError",
    "State",
    "SystemMatrices",
    "Trajectory",
    "build_matrices",
    "load_params",
    "simulate",
    "UkfConfig",
    "ukf_run",
    "__version__",
]
