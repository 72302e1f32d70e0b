"""Exception hierarchy shared by all modules."""


class RKMORError(Exception):
    """Base class for package errors."""


class SingularShift(RKMORError):
    """A shifted pencil ``A - sigma*E`` is numerically singular."""

    def __init__(self, sigma, rcond=None, indices=None):
        self.sigma = sigma
        self.rcond = rcond
        self.indices = indices
        msg = f'pencil is singular at sigma={sigma!r}'
        if rcond is not None:
            msg += f' (rcond={rcond:.3e})'
        if indices is not None:
            msg += f' at sample indices {list(indices)}'
        super().__init__(msg)


class SingularMass(RKMORError):
    """The mass matrix of a pencil is numerically singular."""


class SingularReducedMass(SingularMass):
    """The projected mass matrix ``W^H E V`` is numerically singular."""


class RankDeficient(RKMORError):
    """A new basis vector lies (numerically) in the span of the old ones."""


class Breakdown(RKMORError):
    """Lanczos biorthogonalization broke down."""

    def __init__(self, step, value=None):
        self.step = step
        self.value = value
        super().__init__(f'Lanczos breakdown at step {step}'
                         + ('' if value is None else f' (|w^H v|={value:.3e})'))


class PoleAtZ(RKMORError):
    """Evaluation point coincides with a Ritz value."""


class RepeatedNode(RKMORError):
    """Recursive divided difference was given coincident nodes."""


class ParseError(RKMORError):
    """A data file could not be parsed."""


class DimensionMismatch(RKMORError):
    """Operands have inconsistent shapes."""


class NonConvergence(RKMORError):
    """An iterative method failed to converge."""


class DeadlockNoCandidate(RKMORError):
    """Every candidate of a greedy scan was excluded."""


class ConfigError(RKMORError):
    """Invalid benchmark configuration."""
