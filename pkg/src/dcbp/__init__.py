"""Decomposable continuous-time branching processes.

Closed-form analytics (expected populations, martingales, extinction
probabilities, share curves) and an exact event-driven simulator to check
them against.
"""

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    ConvergenceError,
    DcbpError,
    DegenerateEnsembleError,
    DegenerateSpectrumError,
    ModelError,
    NotMMatrixError,
    NotPositiveRegularError,
    SingularityError,
)
from .model import (
    OffspringLaw,
    SdcbpModel,
    SocialNetworkParams,
    TcvdbpModel,
    VdcbpModel,
    build_social_network_model,
    generator_matrix,
    model_a,
    pgf_eval,
    validate,
)

__all__ = [
    "ArgumentError",
    "ConvergenceError",
    "DcbpError",
    "DegenerateEnsembleError",
    "DegenerateSpectrumError",
    "ModelError",
    "NotMMatrixError",
    "NotPositiveRegularError",
    "OffspringLaw",
    "SdcbpModel",
    "SingularityError",
    "SocialNetworkParams",
    "TcvdbpModel",
    "VdcbpModel",
    "build_social_network_model",
    "generator_matrix",
    "model_a",
    "pgf_eval",
    "validate",
    "__version__",
]
