class BellboundError(Exception):
    pass


class UsageError(BellboundError, ValueError):
    pass


class RankOutOfRange(BellboundError, ValueError):
    pass


class DimensionMismatch(BellboundError, ValueError):
    pass


class ScenarioMismatch(BellboundError, ValueError):
    pass


class AsymmetricScenario(BellboundError, ValueError):
    pass


class InvalidStrategy(BellboundError, ValueError):
    pass


class UnsupportedOutcomes(BellboundError, ValueError):
    pass


class ObjectiveNotRepresentable(BellboundError, ValueError):
    pass


class BudgetExceeded(BellboundError):
    pass


class InfeasiblePin(BellboundError):
    pass


class SolverFailure(BellboundError):
    pass


class ConfigError(UsageError):
    pass
