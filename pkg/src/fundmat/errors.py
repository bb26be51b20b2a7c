"""Exception hierarchy shared by the estimators and the evaluation pipeline.

The CLI maps the two base classes onto exit codes 3 and 4.
"""


class DegenerateDataError(ValueError):
    """Input points do not determine the requested quantity."""


class SolverFailure(RuntimeError):
    """A numerical procedure broke down."""


class TooFewMatches(DegenerateDataError):
    pass


class DegenerateConfiguration(DegenerateDataError):
    pass


class DegenerateCloud(DegenerateDataError):
    pass


class RankDeficientInput(DegenerateDataError):
    pass


class RankDeficiencyViolated(DegenerateDataError):
    pass


class PointAtInfinity(SolverFailure):
    pass


class TriangulationFailure(SolverFailure):
    pass
