class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class DegenerateFitError(DomainError):
    """The null model cannot be fitted to the data (e.g. zero spread)."""


class IllPosedProjectionError(DomainError):
    """The information matrix of the null scores is singular."""
