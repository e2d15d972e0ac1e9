"""Exception hierarchy.

Every failure mode that callers are expected to catch gets its own class;
the CLI maps them onto exit codes (validation 2, precision 3, budget 4).
"""


class SSModpError(Exception):
    """Base class for all package errors."""


class ValidationError(SSModpError):
    """Malformed or inconsistent input data."""


class NotAdmissible(ValidationError):
    """Filtered module fails the Newton-above-Hodge admissibility test."""


class NotEffective(ValidationError):
    """Filtered module has a negative Hodge weight and no twist was requested."""


class PreconditionViolated(SSModpError):
    """A documented precondition of an algorithm does not hold."""


class PrecisionError(SSModpError):
    """Base class for precision-related failures."""


class IndistinguishableFromZero(PrecisionError):
    """A quantity is zero to working precision where a nonzero value is needed."""


class DivisionByIndistinguishableZero(PrecisionError):
    """Division by an element that is zero to working precision."""


class NotCertifiable(PrecisionError):
    """The requested exact quantity cannot be certified at current precision."""


class InsufficientPrecision(PrecisionError):
    """Working precision was exhausted before the result could be produced."""


class SingularAtPrecision(PrecisionError):
    """A matrix is singular to working precision."""


class PrecisionExhausted(PrecisionError):
    """An intermediate step dropped the tracked precision below one digit."""


class LUFailure(SSModpError):
    """A principal minor is indistinguishable from zero in a simultaneous
    LU decomposition; callers redraw the random row-mixing matrix."""


class GuaranteeViolated(SSModpError):
    """A computed coordinate exceeds its promised denominator bound."""


class DivisionNotExact(SSModpError):
    """An exactness-required division left a nonzero remainder."""


class BudgetError(SSModpError):
    """Base class for iteration-budget failures."""


class IterationBudgetExceeded(BudgetError):
    """A loop exceeded its proven iteration bound."""


class NonConvergence(BudgetError):
    """An iteration failed to converge within its allotted steps."""


class TruncationTooShort(SSModpError):
    """The u-adic truncation order is too small to decide the question."""


class OracleScaleExceeded(SSModpError):
    """A brute-force oracle was invoked outside its feasible parameter range."""


class NotEtale(SSModpError):
    """The Frobenius matrix is not invertible over the Laurent series field,
    so the module has no unramified classification."""
