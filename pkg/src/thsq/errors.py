"""Exception hierarchy shared by every module.

Two families matter to callers: ConfigError (bad input description,
CLI exit status 1) and NumericalError (a model/computation failure on
valid input, CLI exit status 2).
"""


class ThsqError(Exception):
    """Base class for all library errors."""


class ConfigError(ThsqError):
    """Scenario description is malformed or inconsistent."""


class ParseError(ConfigError):
    """Config text is not syntactically valid; carries a location."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}" + (
                f", column {column})" if column is not None else ")"
            )
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    """Config parsed but violates an invariant (bad reference, dims, ...)."""


class NumericalError(ThsqError):
    """Computation failed on well-formed input."""


class NonConvergence(NumericalError):
    """Iterative solver exhausted its budget."""


class DegenerateSpectrum(NumericalError):
    """Two eigenvalues closer than the degeneracy tolerance."""


class NotPositiveDefinite(NumericalError):
    """Matrix required to be positive-definite has an eigenvalue <= tol."""


class ComplexSpectrum(NumericalError):
    """Operator has complex eigenvalues; no positive metric exists."""


class SingularMap(NumericalError):
    """Dyson map failed the condition-number bound at some time."""


class NonHermitianInput(NumericalError):
    """Operator required to be Hermitian is not, beyond tolerance."""


class NormDrift(NumericalError):
    """Propagator norm conservation broke the failure threshold."""


class NonFiniteState(NumericalError):
    """State overflowed to NaN/Inf during propagation."""


class PositivityLoss(NumericalError):
    """Propagated metric lost positive-definiteness."""


class CountMismatch(NumericalError):
    """Number of control fields does not match number of control operators."""


class DegenerateState(NumericalError):
    """State has (near-)zero metric norm; fidelity undefined."""


class NoImprovement(NumericalError):
    """Optimizer found no ascent direction at the initial guess."""


class ConditionsViolated(NumericalError):
    """Operator family fails the elementwise quasi-Hermiticity conditions."""


class VerificationFailed(NumericalError):
    """A verify-mode residual exceeded its tolerance."""


class IoError(ThsqError):
    """Output file could not be written."""
