"""INT8 post-training quantization, compilation and DPU simulation."""

from ._vdpu import *  # noqa: F401,F403
from ._vdpu import (
    Error,
    FingerprintMismatch,
    FormatError,
    ResourceFailure,
    SubgraphGateViolation,
    ValidationError,
)

__version__ = "0.1.0"
