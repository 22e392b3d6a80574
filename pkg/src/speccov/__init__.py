"""speccov: high-dimensional covariance estimation by spectrum correction."""

__version__ = "0.1.0"

from .core import (
    DataMatrix,
    EigenDecomposition,
    MeanMode,
    NumericalError,
    SpectrumModel,
    SymmetricMatrix,
    eigendecompose,
    random_rotation,
    sample_gaussian,
)
from .estimators import (
    ESTIMATOR_IDS,
    CovarianceEstimate,
    ShrinkageEstimate,
    buggy_loo_cvc,
    estimate,
    isotonic_correct,
    kfold_cvc,
    loo_cvc,
    lw_shrinkage,
    precision_oracle,
    rebuild,
    sample_covariance,
    spectrum_oracle,
)
from .metrics import SeprialResult, ese, seprial

__all__ = [
    "__version__",
    "DataMatrix",
    "EigenDecomposition",
    "MeanMode",
    "NumericalError",
    "SpectrumModel",
    "SymmetricMatrix",
    "eigendecompose",
    "random_rotation",
    "sample_gaussian",
    "ESTIMATOR_IDS",
    "CovarianceEstimate",
    "ShrinkageEstimate",
    "buggy_loo_cvc",
    "estimate",
    "isotonic_correct",
    "kfold_cvc",
    "loo_cvc",
    "lw_shrinkage",
    "precision_oracle",
    "rebuild",
    "sample_covariance",
    "spectrum_oracle",
    "SeprialResult",
    "ese",
    "seprial",
]
