"""Exception hierarchy for the package."""


class CausalCoveringError(Exception):
    pass


class GraphError(CausalCoveringError, ValueError):
    pass


class CycleDetected(GraphError):
    pass


class RewardNotLast(GraphError):
    pass


class BadEdge(GraphError):
    pass


class LatentHasParents(GraphError):
    pass


class LatentSingleChild(GraphError):
    pass


class TooLargeForExactOracle(CausalCoveringError):
    pass


class CoverConstructionFailed(CausalCoveringError):
    pass


class InsufficientCoverage(CausalCoveringError):
    pass


class TreewidthCapExceeded(CausalCoveringError):
    pass


class HorizonTooSmall(CausalCoveringError, ValueError):
    pass


class BudgetExceeded(CausalCoveringError):
    pass


class ArmOutsideFamily(CausalCoveringError, ValueError):
    pass


class EmptyReport(CausalCoveringError):
    pass
