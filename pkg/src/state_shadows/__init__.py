"""Classical shadows from random auxiliary states and Bell measurements."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimMismatchError,
    LengthMismatchError,
    NoConvergenceError,
    NonHermitianError,
    NonPositiveObservableError,
    NotEnumerableError,
    ShadowError,
    SizeLimitError,
    SupportLeakError,
)
from .moments import (
    BinaryPhaseEnsemble,
    Ensemble,
    FiniteEnsemble,
    HaarEnsemble,
    MixtureEnsemble,
    MomentOperator,
    RealHaarEnsemble,
    StabilizerEnsemble,
    adversarial_mixture,
    conversion_report,
    ensemble_moment,
    haar_moment,
    sym_dim,
)
from .observables import Observable, Snapshot, pauli_string, shadow_estimate
from .rng import make_rng
from .shadows import (
    EstimatorConfig,
    channel_apply,
    estimate_observable,
    generate_snapshot,
    generate_snapshots,
    median_of_means,
    plan,
)
from .states import DensityMatrix, PauliMask, PureState

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
