"""Summing constants and dominating measures for finite summing instances."""

__version__ = "0.1.0"

from .core_model import InstanceError, SummingInstance, build_instance, validate_axioms
from .domination import (
    DominationCertificate,
    NotSummingError,
    check_equivalence,
    dominating_measure,
    easy_direction,
    summing_constant,
    verify_certificate,
)
from .lp_core import LpProblem, solve_lp
from .semi_infinite import solve_with_oracle

__all__ = [
    "InstanceError",
    "SummingInstance",
    "build_instance",
    "validate_axioms",
    "DominationCertificate",
    "NotSummingError",
    "check_equivalence",
    "dominating_measure",
    "easy_direction",
    "summing_constant",
    "verify_certificate",
    "LpProblem",
    "solve_lp",
    "solve_with_oracle",
]
