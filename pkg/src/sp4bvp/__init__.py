"""Fourth-order singularly perturbed two-point problems with clamped ends.

Solves ``eps^2 u'''' - (alpha u')' + beta u = f`` on (0, 1) with
``u = u' = 0`` at both ends, builds its asymptotic decomposition into a
smooth part, two boundary layers and a remainder, and checks the analytic
regularity estimates numerically.
"""

from .analytic import AnalyticFunction1D, parse, validate_analyticity
from .closed_form import ConstantCoefficientSolution
from .decomposition import BoundConstants, Decomposition, build, choose_M, defect, eval_expansion, remainder
from .errors import Sp4Error
from .problem import Problem
from .verify import VerificationReport, run_checks

__all__ = [
    "AnalyticFunction1D",
    "BoundConstants",
    "ConstantCoefficientSolution",
    "Decomposition",
    "Problem",
    "Sp4Error",
    "VerificationReport",
    "build",
    "choose_M",
    "defect",
    "eval_expansion",
    "parse",
    "remainder",
    "run_checks",
    "validate_analyticity",
]
