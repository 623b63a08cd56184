"""Exception hierarchy shared by all modules."""


class EMMaslovError(Exception):
    """Base class for every error raised by the package."""


class DegenerateMetric(EMMaslovError):
    pass


class DerivativeUnavailable(EMMaslovError):
    pass


class NotClosed(EMMaslovError):
    """The 2-form fails the dσ = 0 check at a sampled point."""


class ChartExit(EMMaslovError):
    pass


class IntegratorFailure(EMMaslovError):
    pass


class GramSchmidtFailure(EMMaslovError):
    pass


class ZeroEnergy(EMMaslovError):
    """Energy-constrained machinery was invoked with kappa == 0."""


class DegenerateCrossing(EMMaslovError):
    pass


class NotTransversal(EMMaslovError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class RefinementExhausted(EMMaslovError):
    pass


class NonIntegerResult(EMMaslovError):
    pass


class EndpointOnCycle(EMMaslovError):
    pass


class SingularTransfer(EMMaslovError):
    pass


class ConjugateEndpoint(EMMaslovError):
    pass


class DegenerateEndpoint(EMMaslovError):
    pass


class NotConverged(EMMaslovError):
    pass


class EndpointConjugate(EMMaslovError):
    def __init__(self, message, flavor=None, nearest=None):
        super().__init__(message)
        self.flavor = flavor
        self.nearest = nearest


class ConsistencyError(EMMaslovError):
    """Two independent routes to the same integer disagree."""


class ConfigError(EMMaslovError):
    pass


class NoBranchFound(EMMaslovError):
    """The bifurcation probe found no distinct same-energy branch."""
