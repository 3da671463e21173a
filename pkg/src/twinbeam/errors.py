"""Error taxonomy shared across the package.

Two families matter to callers: configuration problems (bad input values,
malformed files) and numerical contract violations (a residual above its
tolerance, a decomposition that failed to pair).  The CLI maps the former to
exit code 2 and the latter to exit code 3.
"""


class TwinbeamError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TwinbeamError):
    """Invalid configuration: bad sizes, signs, schema violations, file syntax."""


class ContractError(TwinbeamError):
    """A numerical contract was violated (residual above tolerance, non-finite data)."""


class RegimeError(ContractError):
    """A structure-exploiting route was invoked outside its regime of validity.

    Carries the measured residual that broke the precondition when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DecompositionError(ContractError):
    """Eigenvalue pairing or factor assembly failed inside a decomposition."""
