"""Exception hierarchy shared across the library and the CLI exit-code mapping."""


class RotalithError(Exception):
    """Base class for all library errors."""


class InputFormatError(RotalithError):
    """Malformed or out-of-contract external input (CLI exit status 2)."""


class OutOfBallError(InputFormatError):
    """A point lies outside the unit ball beyond tolerance."""


class CloudFormatError(InputFormatError):
    """A cloud file could not be parsed."""


class ArchiveFormatError(InputFormatError):
    """A tensor archive is corrupt, truncated, or has the wrong version."""


class InvalidRotationError(InputFormatError):
    """A matrix fails the orthonormality/determinant check."""


class SingularCosetError(RotalithError):
    """The coset angle is undefined because the rotated direction sits at a pole.

    Callers that hit this during randomized runs should retry with a perturbed
    rotation; the configuration has measure zero.
    """


class NumericError(RotalithError):
    """Numerical failure such as NaN loss or divergence (CLI exit status 3)."""
