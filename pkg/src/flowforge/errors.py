"""Exception hierarchy shared across the toolkit."""


class FlowforgeError(Exception):
    """Base class for all toolkit errors."""


class ConstructionError(FlowforgeError):
    """Geometry or mesh construction failed; message names the violated constraint."""


class ConfigurationError(FlowforgeError):
    """Invalid configuration value or missing prerequisite data."""


class AssemblyError(FlowforgeError):
    """Finite-element assembly could not be carried out."""


class SolverError(FlowforgeError):
    """Linear or nonlinear solve failed.

    Carries optional diagnostics: ``history`` is the list of residual norms
    seen before the failure, ``pivot`` the zero-pivot location for singular
    factorizations.
    """

    def __init__(self, message, history=None, pivot=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.pivot = pivot


class DeformationError(FlowforgeError):
    """A mesh deformation was rejected (invalid field or inverted elements)."""


class EvaluationError(FlowforgeError):
    """A cost functional could not be evaluated on the given state."""
