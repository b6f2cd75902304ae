"""Exception types raised across the package."""


class PseudoVoiceError(Exception):
    """Base class for all package errors."""


class DomainExceeded(PseudoVoiceError, ValueError):
    """A box coordinate lies outside ``[0, 2*pi*xi_i)``."""


class NotOnTorus(PseudoVoiceError, ValueError):
    """A vector does not lie on the flat torus of the given profile."""


class ZeroPair(PseudoVoiceError, ValueError):
    """A coordinate pair is (numerically) zero and has no defined angle."""


class SingularMatrix(PseudoVoiceError, ValueError):
    pass


class NotNested(PseudoVoiceError, ValueError):
    """The coarse lattice is not a sublattice of the fine lattice."""


class NotOrthogonal(PseudoVoiceError, ValueError):
    pass


class IndexOutOfRange(PseudoVoiceError, IndexError):
    pass


class IllConditioned(PseudoVoiceError, ArithmeticError):
    pass


class DegenerateFrame(PseudoVoiceError):
    """Received frame carries too little energy to be decoded."""


class CodecFailure(PseudoVoiceError, RuntimeError):
    pass


class BadInputFormat(PseudoVoiceError, ValueError):
    pass


class EntropyUnavailable(PseudoVoiceError, RuntimeError):
    pass


class ConfigError(PseudoVoiceError, ValueError):
    pass
