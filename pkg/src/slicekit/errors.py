"""Exception types shared across the package."""


class SliceKitError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(SliceKitError):
    """The schema config is malformed or references missing columns."""


class IngestionError(SliceKitError):
    """The input table could not be converted into a coded matrix."""


class RuleSyntaxError(SliceKitError):
    """Rule text failed to parse. Carries the character position of the fault."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class RuleValueError(SliceKitError):
    """A rule references an unknown feature or vocabulary value."""


class UndefinedScoreError(SliceKitError):
    """A ranking function is undefined for the given subgroup/split."""


class ConfigError(SliceKitError):
    """Invalid discovery, oracle, or CLI configuration."""


class CandidateSpaceError(SliceKitError):
    """The exhaustive candidate space exceeds the configured cap."""

    def __init__(self, estimate, cap):
        super().__init__(
            f"estimated candidate count {estimate:,} exceeds cap {cap:,}"
        )
        self.estimate = estimate
        self.cap = cap
