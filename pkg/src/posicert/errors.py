"""Exception hierarchy shared by all posicert modules."""


class PosicertError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PosicertError, ValueError):
    pass


class NotRealValued(PosicertError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"coefficients at {index} and its mirror are not conjugate")


# region
class EmptyRegion(PosicertError):
    pass


class HypothesisViolation(PosicertError):
    pass


class RedundantHole(PosicertError):
    pass


# bounds / pipeline budgets
class BudgetExceeded(PosicertError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonpositiveLowerBound(PosicertError):
    pass


class SearchExhausted(BudgetExceeded):
    pass


class TermBudgetExceeded(BudgetExceeded):
    pass


class NegativeCoefficientAtBound(PosicertError):
    pass


class SelfVerificationFailed(PosicertError):
    pass


# matrix harness
class InfeasibleSpec(PosicertError):
    pass


class Singular(PosicertError):
    pass


class MissingCertificate(PosicertError):
    pass


class ResolventConditionFailed(PosicertError):
    pass


class DeltaTooLarge(PosicertError):
    pass


class GammaTooLarge(PosicertError):
    pass
