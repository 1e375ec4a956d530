"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """Caller violated a shape or length contract."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class ResourceError(RuntimeError):
    """Requested work or storage exceeds a configured cap."""


class DivergenceError(ArithmeticError):
    """Time integration produced non-finite values."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite wave function at step {step}")
