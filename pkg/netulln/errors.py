"""Error types raised by netulln operations."""

from __future__ import annotations


class NetullnError(ValueError):
    """Base class for argument and validation errors."""


class NetworkError(NetullnError):
    """A network, node id, node set or generator parameter is invalid."""


class NetworkTooLargeError(NetworkError):
    """All-pairs distance storage was requested above the size limit."""


class ProcessSpecError(NetullnError):
    """A process spec, decay profile or oracle argument is invalid."""


class FunctionSpaceError(NetullnError):
    """A parameter space, delta-net or function family argument is invalid."""


class OracleError(NetullnError):
    """An oracle standard error exceeds the configured ceiling."""


class IdentificationError(NetullnError):
    """An estimation config does not identify a unique true parameter."""


class EstimationError(NetullnError):
    """An estimator or weighting argument is invalid."""


class ConfigError(NetullnError):
    """A run config is invalid."""


class VerificationError(NetullnError):
    """A verification engine argument is invalid."""
