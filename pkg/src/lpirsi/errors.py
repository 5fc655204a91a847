"""Exception hierarchy shared by every layer of the package."""


class LPIRSIError(Exception):
    """Base class for all package errors."""


class ParameterError(LPIRSIError, ValueError):
    """Parameters fall outside the domain where a scheme or formula is defined."""


class ValidationError(LPIRSIError, ValueError):
    """Inputs are structurally inconsistent (mismatched index sets, lengths)."""


class ProtocolError(LPIRSIError):
    """A peer violated the retrieval protocol or sent a malformed frame."""


class TransportError(LPIRSIError):
    """A server endpoint could not be reached or dropped the connection."""


class InfeasibleError(LPIRSIError):
    """Exact enumeration would exceed the configured work guard."""


class SelfCheckError(LPIRSIError):
    """The decoded message differs from the locally known reference copy."""
