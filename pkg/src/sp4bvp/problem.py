"""The fourth-order model problem on (0, 1).

    eps^2 u'''' - (alpha u')' + beta u = f,   u(0) = u'(0) = u(1) = u'(1) = 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticFunction1D
from .errors import DomainError

POSITIVITY_GRID = 1024


def _as_function(v) -> AnalyticFunction1D:
    if isinstance(v, AnalyticFunction1D):
        return v
    if isinstance(v, (int, float)):
        return AnalyticFunction1D.constant(v)
    return AnalyticFunction1D(v)


@dataclass(frozen=True)
class Problem:
    """Coefficient data ``alpha > 0``, ``beta >= 0`` and load ``f``.

    Strings, numbers and expression trees are converted to
    :class:`AnalyticFunction1D`.  Sign conditions are checked on a
    1024-point grid at construction time.
    """

    alpha: AnalyticFunction1D
    beta: AnalyticFunction1D
    f: AnalyticFunction1D

    def __init__(self, alpha, beta, f):
        object.__setattr__(self, "alpha", _as_function(alpha))
        object.__setattr__(self, "beta", _as_function(beta))
        object.__setattr__(self, "f", _as_function(f))
        grid = np.linspace(0.0, 1.0, POSITIVITY_GRID)
        a = self.alpha(grid)
        if np.min(a) <= 0.0:
            raise DomainError(f"alpha must be positive on [0, 1]; min sampled value {np.min(a):.3g}")
        b = self.beta(grid)
        if np.min(b) < 0.0:
            raise DomainError(f"beta must be non-negative on [0, 1]; min sampled value {np.min(b):.3g}")

    @property
    def sqrt_alpha_ends(self) -> tuple[float, float]:
        return float(np.sqrt(self.alpha(0.0))), float(np.sqrt(self.alpha(1.0)))

    def describe(self) -> dict[str, str]:
        return {"alpha": self.alpha.source, "beta": self.beta.source, "f": self.f.source}
