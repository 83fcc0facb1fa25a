"""Exception types raised by the library."""


class CFBergmanError(Exception):
    """Base class for all library-specific failures."""


class PerturbationTooLarge(CFBergmanError):
    """The C2 perturbation destroys strict plurisubharmonicity on the calibration grid."""


class CalibrationFailed(CFBergmanError):
    """No cutoff radius in the scan grid satisfies the support-function lower bounds."""


class NoAdmissibleDelta(CFBergmanError):
    """The sampled modulus of continuity never drops below the requested level."""


class SingularKernel(CFBergmanError):
    """The support function is below the underflow guard (boundary-coincident pair)."""


class DegenerateGeneratingForm(CFBergmanError):
    """The generating-form pairing vanishes where the lower bounds say it cannot."""


class UnsupportedDomain(CFBergmanError):
    """The domain lacks the parametrization hook required by this quadrature rule."""


class NonIntegrable(CFBergmanError):
    """Refinement indicates a divergent integral (weight exponent misuse)."""


class IllConditionedGram(CFBergmanError):
    """The monomial Gram matrix is too ill-conditioned to orthonormalize."""


class NotInLp(CFBergmanError):
    """The sample function fails the declared L^p integrability requirement."""


class ConfigError(CFBergmanError):
    """A run configuration is malformed; message points at the offending key."""
