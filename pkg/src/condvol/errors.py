class DimensionError(ValueError):
    """Dimensions are invalid or do not match."""


class InvalidStateError(ValueError):
    """Input is not Hermitian, not unit trace or not positive."""


class SingularTransformError(ValueError):
    """The X-state coordinate transform is undefined at ``|a3| = 1``."""


class InsufficientBinsError(ValueError):
    """Too few usable histogram bins for an envelope fit."""
