"""Exception hierarchy shared by all hrigid modules."""


class HRigidError(Exception):
    """Base class for every error raised by this package."""


class ParseError(HRigidError, ValueError):
    """Malformed expression text.

    Carries the character offset where parsing stopped and a short
    description of what was expected there.
    """

    def __init__(self, message, position=None, expected=None):
        self.position = position
        self.expected = expected
        detail = message
        if position is not None:
            detail = f"{message} at offset {position}"
        if expected:
            detail = f"{detail} (expected {expected})"
        super().__init__(detail)


class UnknownIdentifier(ParseError):
    pass


class DomainError(HRigidError, ArithmeticError):
    """Evaluation left the real domain (ln of non-positive, 1/0, overflow...)."""


class DegenerateChord(HRigidError, ValueError):
    pass


class TooFewSamples(HRigidError, ValueError):
    pass


class EmptyDirectionSet(HRigidError, ValueError):
    pass


class ZeroScaleFactor(HRigidError, ZeroDivisionError):
    pass


class NonPositiveScale(HRigidError, ValueError):
    pass


class NotPowerLaw(HRigidError):
    """The (c, h) pairs are not of the form h = c**-s within tolerance."""

    def __init__(self, s, max_log_residual, tol):
        self.s = s
        self.max_log_residual = max_log_residual
        self.tol = tol
        super().__init__(
            f"best exponent s={s:.6g} leaves log-residual "
            f"{max_log_residual:.3g} > {tol:.3g}"
        )


class NotCoherent(HRigidError):
    """The shifts u_c are not of the form d*(1 - c) within tolerance."""

    def __init__(self, d, max_residual, tol):
        self.d = d
        self.max_residual = max_residual
        self.tol = tol
        super().__init__(
            f"best centre d={d:.6g} leaves residual {max_residual:.3g} > {tol:.3g}"
        )


class AllScalesOne(HRigidError, ValueError):
    pass


class InsufficientScales(HRigidError, ValueError):
    pass


class SystemViolated(HRigidError):
    def __init__(self, residual, tol):
        self.residual = residual
        self.tol = tol
        super().__init__(f"system residual {residual:.3g} exceeds {tol:.3g}")


class ExtractionFailure(HRigidError):
    pass


class FitFailure(HRigidError):
    pass


class ConfigError(HRigidError, ValueError):
    pass
