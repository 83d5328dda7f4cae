"""Numerical verification of operator Hardy, Carleman and related inequalities."""

from .means import (
    NumericalIntegrityError,
    PSchedule,
    StrictPositivityError,
    TGLimit,
    phi,
    power_mean,
    tg_limit,
    tg_logexp,
)
from .probe import (
    ProbeResult,
    carleman_constant_probe,
    extremal_family_ratio,
    search_loewner_violation,
    sharpness_optimize,
)
from .reports import InequalityReport
from .sequence import OperatorSequence, hardy_transform, power_sum, truncate_extend
from .stepfun import QuadratureSpec, StepOperatorFunction, Weight, hardy_constant
from .symcore import (
    ConvergenceError,
    DomainError,
    NotPSDError,
    ToleranceSpec,
    eigh,
    loewner_leq,
    power,
    random_psd,
)
from .verify import (
    SuiteSpec,
    TGMode,
    check_carleman,
    check_discrete_hardy,
    check_phi_bound,
    check_tracial_hardy,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "InequalityReport",
    "NotPSDError",
    "NumericalIntegrityError",
    "OperatorSequence",
    "PSchedule",
    "ProbeResult",
    "QuadratureSpec",
    "StepOperatorFunction",
    "StrictPositivityError",
    "SuiteSpec",
    "TGLimit",
    "TGMode",
    "ToleranceSpec",
    "Weight",
    "carleman_constant_probe",
    "check_carleman",
    "check_discrete_hardy",
    "check_phi_bound",
    "check_tracial_hardy",
    "eigh",
    "extremal_family_ratio",
    "hardy_constant",
    "hardy_transform",
    "loewner_leq",
    "phi",
    "power",
    "power_mean",
    "power_sum",
    "random_psd",
    "run_suite",
    "search_loewner_violation",
    "sharpness_optimize",
    "tg_limit",
    "tg_logexp",
    "truncate_extend",
]
