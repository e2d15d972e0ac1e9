"""Semi-stable Galois representations: from filtered (phi, N)-modules to
the mod-p semi-simplification, in exact p-adic arithmetic.

The pipeline has three stages: construction of the Hodge-Pink / Breuil-
Kisin data from a filtered module, descent of the Frobenius matrix to an
integral lattice by slope-graded reduction, and classification of the
reduction mod p into simple factors (tame level, exponent, unramified
part).  See the cli module for the command-line entry points.
"""

from .errors import (
    BudgetError,
    DivisionByIndistinguishableZero,
    DivisionNotExact,
    GuaranteeViolated,
    IndistinguishableFromZero,
    InsufficientPrecision,
    IterationBudgetExceeded,
    LUFailure,
    NonConvergence,
    NotAdmissible,
    NotCertifiable,
    NotEffective,
    NotEtale,
    OracleScaleExceeded,
    PrecisionError,
    PrecisionExhausted,
    PreconditionViolated,
    SingularAtPrecision,
    SSModpError,
    TruncationTooShort,
    ValidationError,
)
from .padic import KPoly, PadicContext, RamElem, UnramElem
from .series import NuSeries
from .filtered import FilteredPhiNModule, HodgeNewtonData
from .linalg import (
    EPowerQuot,
    MatK,
    MatNu,
    det,
    hermite_form,
    plu_integral,
    simultaneous_lu,
    taylor_at_pi,
    triangular_inverse,
)
from .stage1 import (
    KisinModule,
    Stage1Constants,
    beta_oracle,
    big_lambda,
    compute_phibk,
    compute_tm,
    compute_Wm,
    compute_Yn,
    height_certificate,
    hodge_pink_basis,
    releve_hp,
)
from .stage2 import (
    GradedBasisState,
    Stage2Params,
    ajout_vecteur,
    change_base,
    descend_integral,
    iteration_frobenius,
    liberte,
    run_stage2,
    select_parameters,
    span_coordinates,
)

__version__ = "0.1.0"

__all__ = [
    "PadicContext", "UnramElem", "KPoly", "RamElem", "NuSeries",
    "FilteredPhiNModule", "HodgeNewtonData",
    "MatK", "MatNu", "EPowerQuot", "plu_integral", "simultaneous_lu",
    "hermite_form", "triangular_inverse", "taylor_at_pi", "det",
    "KisinModule", "Stage1Constants", "releve_hp", "hodge_pink_basis",
    "compute_Wm", "compute_tm", "compute_Yn", "compute_phibk",
    "height_certificate", "beta_oracle", "big_lambda",
    "Stage2Params", "GradedBasisState", "select_parameters", "span_coordinates",
    "ajout_vecteur", "change_base", "iteration_frobenius", "liberte",
    "run_stage2", "descend_integral",
    "SSModpError", "ValidationError", "NotAdmissible", "NotEffective",
    "PreconditionViolated", "PrecisionError", "IndistinguishableFromZero",
    "DivisionByIndistinguishableZero", "NotCertifiable", "InsufficientPrecision",
    "SingularAtPrecision", "PrecisionExhausted", "LUFailure",
    "GuaranteeViolated", "DivisionNotExact", "BudgetError",
    "IterationBudgetExceeded", "NonConvergence", "TruncationTooShort",
    "OracleScaleExceeded", "NotEtale",
]
