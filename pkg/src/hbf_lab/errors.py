"""Exception types raised by hbf_lab.

Every error carries a short machine-readable ``code`` which is also the
first token of its message, so callers can match on either.
"""


class HbfError(ValueError):
    """Base class for all library errors."""

    code = "hbf-error"

    def __init__(self, detail="", code=None):
        if code is not None:
            self.code = code
        msg = self.code if not detail else f"{self.code}: {detail}"
        super().__init__(msg)


class ShapeError(HbfError):
    code = "shape"


class NotPositiveDefiniteError(HbfError):
    code = "indefinite-matrix"


class SingularSystemError(HbfError):
    code = "singular-precoder-system"


class ConfigError(HbfError):
    code = "invalid-config"


class InfeasibleSweepPointError(ConfigError):
    code = "infeasible-sweep-point"
