"""Exact solution of the model problem with constant data.

For constant ``alpha = a``, ``beta = b``, ``f = c`` the solution is a
particular part plus decaying exponentials built from the roots of
``eps^2 m^4 - a m^2 + b = 0``; every exponential is written relative to the
endpoint it decays away from, so nothing overflows for small ``eps``.
"""

from __future__ import annotations

import math

import numpy as np


B_NEGLIGIBLE = 1e-14


class ConstantCoefficientSolution:
    """Callable ``u^(n)(x)`` for ``eps^2 u'''' - a u'' + b u = c`` with clamped ends."""

    def __init__(self, a: float, b: float, c: float, eps: float):
        if a <= 0 or b < 0 or eps <= 0:
            raise ValueError("need a > 0, b >= 0, eps > 0")
        self.a, self.b, self.c, self.eps = float(a), float(b), float(c), float(eps)
        e2 = eps * eps
        if b <= B_NEGLIGIBLE * a:
            # double root at 0: homogeneous part A + B x; a reaction this weak
            # changes u by O(b / a) relative and would underflow the slow rate
            self.b = 0.0
            self.rates = [math.sqrt(a) / eps]
            self.poly_part = True
        else:
            disc = np.sqrt(complex(a * a - 4.0 * e2 * b))
            big = (a + disc) / (2.0 * e2)
            m2 = [big, b / (e2 * big)]  # product of the roots avoids cancellation
            self.rates = [np.sqrt(v) for v in m2]
            if abs(self.rates[0] - self.rates[1]) < 1e-12 * abs(self.rates[0]):
                raise ValueError("repeated characteristic roots are not supported")
            self.poly_part = False
        self._coeffs = self._fit()

    def _basis(self, x, n):
        """Columns: homogeneous modes (n-th derivative) at points x."""
        x = np.asarray(x, dtype=float)
        cols = []
        if self.poly_part:
            cols.append(np.ones_like(x) * (1.0 if n == 0 else 0.0))
            cols.append(x if n == 0 else np.ones_like(x) * (1.0 if n == 1 else 0.0))
        for m in self.rates:
            cols.append((-m) ** n * np.exp(-m * x))
            cols.append(m**n * np.exp(-m * (1.0 - x)))
        return np.array(cols, dtype=complex).T

    def _particular(self, x, n):
        x = np.asarray(x, dtype=float)
        if self.poly_part:
            k = -self.c / (2.0 * self.a)
            return {0: k * x * x, 1: 2 * k * x, 2: 2 * k * np.ones_like(x)}.get(n, 0.0 * x)
        return (self.c / self.b if n == 0 else 0.0) * np.ones_like(x)

    def _fit(self):
        ends = np.array([0.0, 1.0])
        A = np.vstack([self._basis(ends, 0), self._basis(ends, 1)])
        rhs = -np.concatenate([self._particular(ends, 0), self._particular(ends, 1)]).astype(complex)
        # equilibrate: slope rows carry the fast rate, columns differ in scale
        col = np.max(np.abs(A), axis=0)
        A = A / col
        row = np.max(np.abs(A), axis=1)
        return np.linalg.solve(A / row[:, None], rhs / row) / col

    def __call__(self, x, n: int = 0):
        vals = self._basis(x, n) @ self._coeffs + self._particular(x, n)
        return np.real(vals)

    def residual(self, x):
        """``eps^2 u'''' - a u'' + b u - c`` at x (should vanish)."""
        return self.eps**2 * self(x, 4) - self.a * self(x, 2) + self.b * self(x, 0) - self.c
