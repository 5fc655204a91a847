"""Leaky private information retrieval with side information.

Multi-server PIR schemes in which a user who already knows ``M`` of the ``K``
replicated messages retrieves one more while each server's view of the demand
is allowed to leak by a bounded likelihood ratio ``exp(epsilon)``.  The
package covers the query/answer/decode core, the W-private and (W, S)-private
randomized schemes, exact leakage certification by enumeration, download-cost
analysis, a TCP wire protocol and a command-line front end.
"""

from .core import (
    EMPTY,
    Database,
    Message,
    RandomPattern,
    RetrievalRequest,
    SchemeParams,
    Variant,
    build_queries,
    compute_answer,
    decode,
)
from .errors import (
    InfeasibleError,
    LPIRSIError,
    ParameterError,
    ProtocolError,
    SelfCheckError,
    TransportError,
    ValidationError,
)
from .schemes import CostModel, enumerate_patterns, leakage_exponent_bound, reference_cost, reference_cost_exact, sample_pattern

__version__ = "0.1.0"

__all__ = [
    "EMPTY",
    "CostModel",
    "Database",
    "InfeasibleError",
    "LPIRSIError",
    "Message",
    "ParameterError",
    "ProtocolError",
    "RandomPattern",
    "RetrievalRequest",
    "SchemeParams",
    "SelfCheckError",
    "TransportError",
    "ValidationError",
    "Variant",
    "build_queries",
    "compute_answer",
    "decode",
    "enumerate_patterns",
    "leakage_exponent_bound",
    "reference_cost",
    "reference_cost_exact",
    "sample_pattern",
]
