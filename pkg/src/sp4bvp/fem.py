"""C^1-conforming hp finite elements for the clamped fourth-order problem.

Each element carries the four cubic Hermite modes (value and slope at both
ends, shared between neighbours) and interior bubbles whose second
derivatives are Legendre polynomials, so the element space is all
polynomials of degree ``p``.  The clamped boundary conditions remove the four
end dofs.  Meshes are the three-element spectral boundary layer meshes
``{0, tau, 1 - tau, 1}``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import legendre as L

from .errors import AssemblyError, DomainError
from .problem import Problem

log = logging.getLogger(__name__)

CONDITION_WARN = 1e13
DEFAULT_LAMBDA0 = 1.0  # times 1/min(sqrt(alpha(0)), sqrt(alpha(1)))


class ConditioningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LayerMesh:
    nodes: np.ndarray
    transition: tuple[float, float]

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        if n.size < 4 or np.any(np.diff(n) <= 0) or n[0] != 0.0 or n[-1] != 1.0:
            raise DomainError("mesh nodes must increase strictly from 0 to 1 with >= 3 elements")
        object.__setattr__(self, "nodes", n)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1


def default_lambda0(problem: Problem) -> float:
    return DEFAULT_LAMBDA0 / min(problem.sqrt_alpha_ends)


def build_layer_mesh(eps: float, p: int, lambda0: float = DEFAULT_LAMBDA0, lambda0_right: float | None = None) -> LayerMesh:
    """Spectral boundary layer mesh with ``tau = min(1/4, lambda0 * p * eps)``.

    When ``tau`` hits the cap the mesh is the uniform four-element mesh.
    """
    if p < 3:
        raise ValueError("p must be at least 3")
    if eps <= 0 or lambda0 <= 0:
        raise ValueError("eps and lambda0 must be positive")
    tl = min(0.25, lambda0 * p * eps)
    tr = min(0.25, (lambda0 if lambda0_right is None else lambda0_right) * p * eps)
    if tl >= 0.25 and tr >= 0.25:
        return LayerMesh(np.linspace(0.0, 1.0, 5), (0.25, 0.25))
    return LayerMesh(np.array([0.0, tl, 1.0 - tr, 1.0]), (tl, tr))


@lru_cache(maxsize=64)
def _reference_basis(p: int):
    """Legendre-series coefficients (in xi on [-1, 1]) of the p + 1 local shape functions.

    Order: value at -1, slope at -1, value at +1, slope at +1, then bubbles.
    Slopes are with respect to xi; the element map rescales them.  Keeping
    everything in the Legendre basis avoids the cancellation that monomial
    coefficients suffer at high degree.
    """
    herm = [
        np.array([2.0, -3.0, 0.0, 1.0]) / 4.0,   # (1-xi)^2 (2+xi) / 4
        np.array([1.0, -1.0, -1.0, 1.0]) / 4.0,  # (1-xi)^2 (1+xi) / 4
        np.array([2.0, 3.0, 0.0, -1.0]) / 4.0,   # (1+xi)^2 (2-xi) / 4
        np.array([-1.0, -1.0, 1.0, 1.0]) / 4.0,  # -(1+xi)^2 (1-xi) / 4
    ]
    funcs = [L.poly2leg(h) for h in herm]
    for k in range(4, p + 1):
        m = k - 2
        c = np.zeros(m + 1)
        c[m] = math.sqrt((2 * m + 1) / 2.0)
        funcs.append(L.legint(c, 2, lbnd=-1))
    return tuple(funcs)


def _tabulate(p: int, xi: np.ndarray, nder: int) -> np.ndarray:
    """Array ``(nder + 1, p + 1, len(xi))`` of xi-derivatives of the shape functions."""
    funcs = _reference_basis(p)
    out = np.zeros((nder + 1, len(funcs), xi.size))
    for i, c in enumerate(funcs):
        for d in range(nder + 1):
            out[d, i] = L.legval(xi, L.legder(c, d) if d else c)
    return out


@lru_cache(maxsize=64)
def _gauss(n: int):
    return L.leggauss(n)


def _local_dof_scale(h: float, p: int) -> np.ndarray:
    s = np.ones(p + 1)
    s[1] = s[3] = h / 2.0
    return s


class _Dofs:
    """Global numbering: node i -> (2 + nb) i + {0, 1}; element e bubbles follow node e."""

    def __init__(self, n_el: int, p: int):
        self.nb = p - 3
        self.stride = 2 + self.nb
        self.n_el = n_el
        self.size = n_el * self.stride + 2

    def element(self, e: int) -> np.ndarray:
        base = e * self.stride
        nxt = (e + 1) * self.stride
        return np.concatenate([[base, base + 1, nxt, nxt + 1], base + 2 + np.arange(self.nb)]).astype(int)

    def free(self) -> np.ndarray:
        fixed = {0, 1, self.size - 2, self.size - 1}
        return np.array([i for i in range(self.size) if i not in fixed], dtype=int)


@dataclass
class DiscreteSolution:
    problem: Problem
    eps: float
    mesh: LayerMesh
    p: int
    dofs: np.ndarray
    error_estimate: float = float("nan")
    condition: float = float("nan")
    orthogonality_residual: float = float("nan")
    notes: list[str] = field(default_factory=list)

    def __call__(self, xs, n: int = 0) -> np.ndarray:
        return self.evaluate(xs, n)

    def evaluate(self, xs, n: int = 0) -> np.ndarray:
        """n-th x-derivative of the discrete solution at ``xs``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        nodes = self.mesh.nodes
        el = np.clip(np.searchsorted(nodes, xs, side="right") - 1, 0, nodes.size - 2)
        out = np.zeros_like(xs)
        numbering = _Dofs(self.mesh.n_elements, self.p)
        for e in np.unique(el):
            mask = el == e
            a, b = nodes[e], nodes[e + 1]
            h = b - a
            xi = 2.0 * (xs[mask] - a) / h - 1.0
            tab = _tabulate(self.p, xi, n)[n]
            coef = self.dofs[numbering.element(e)] * _local_dof_scale(h, self.p)
            out[mask] = (coef @ tab) * (2.0 / h) ** n
        return out

    def samples(self, xs) -> np.ndarray:
        """Columns x, u, u', u'' for the CSV export."""
        xs = np.asarray(xs, dtype=float)
        return np.column_stack([xs, self(xs, 0), self(xs, 1), self(xs, 2)])


def _assemble(problem: Problem, eps: float, mesh: LayerMesh, p: int, nq: int):
    num = _Dofs(mesh.n_elements, p)
    K = np.zeros((num.size, num.size))
    rhs = np.zeros(num.size)
    t, w = _gauss(nq)
    tab = _tabulate(p, t, 2)
    for e in range(mesh.n_elements):
        a, b = mesh.nodes[e], mesh.nodes[e + 1]
        h = b - a
        jac = h / 2.0
        xq = a + jac * (t + 1.0)
        s = _local_dof_scale(h, p)
        N0 = tab[0] * s[:, None]
        N1 = tab[1] * s[:, None] / jac
        N2 = tab[2] * s[:, None] / jac**2
        al, be, f = problem.alpha(xq), problem.beta(xq), problem.f(xq)
        wq = w * jac
        Ke = (eps * eps) * (N2 * wq) @ N2.T + (N1 * (wq * al)) @ N1.T + (N0 * (wq * be)) @ N0.T
        fe = N0 @ (wq * f)
        idx = num.element(e)
        K[np.ix_(idx, idx)] += Ke
        rhs[idx] += fe
    return K, rhs, num


def _banded_upper(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    rows, cols = np.nonzero(A)
    u = int(np.max(cols - rows)) if rows.size else 0
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        ab[u - d, d:] = np.diagonal(A, d)
    return ab


def _solve_raw(problem: Problem, eps: float, mesh: LayerMesh, p: int, nq: int | None = None):
    if p < 3:
        raise ValueError("p must be at least 3")
    nq = nq or p + 4
    K, rhs, num = _assemble(problem, eps, mesh, p, nq)
    free = num.free()
    A = K[np.ix_(free, free)]
    b = rhs[free]
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * np.max(np.abs(A))):
        raise AssemblyError("stiffness matrix is not symmetric")
    d = np.sqrt(np.diag(A))
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise AssemblyError("stiffness matrix has a non-positive diagonal")
    As = A / d[:, None] / d[None, :]
    bs = b / d
    try:
        ys = sla.solveh_banded(_banded_upper(As), bs, lower=False)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("stiffness matrix is not positive definite") from exc
    y = ys / d
    full = np.zeros(num.size)
    full[free] = y
    scale = max(np.max(np.abs(A @ y)), np.max(np.abs(b)), np.finfo(float).tiny)
    ortho = float(np.max(np.abs(A @ y - b)) / scale) if b.size else 0.0
    cond = float(np.linalg.cond(As)) if As.size else 1.0
    return full, cond, ortho


def solve(problem: Problem, eps: float, mesh: LayerMesh, p: int, nq: int | None = None,
          estimate: bool = True) -> DiscreteSolution:
    """Galerkin solution in the degree-``p`` C^1 space on ``mesh``.

    The error estimate is the max-norm difference to the degree ``p + 2``
    solution on the same mesh, sampled on 401 points.
    """
    dofs, cond, ortho = _solve_raw(problem, eps, mesh, p, nq)
    sol = DiscreteSolution(problem, eps, mesh, p, dofs, condition=cond, orthogonality_residual=ortho)
    if cond > CONDITION_WARN:
        msg = f"condition number {cond:.2e} at p={p}, eps={eps:g}"
        sol.notes.append(msg)
        warnings.warn(msg, ConditioningWarning, stacklevel=2)
    if estimate:
        hi_dofs, _, _ = _solve_raw(problem, eps, mesh, p + 2, None if nq is None else nq + 2)
        hi = DiscreteSolution(problem, eps, mesh, p + 2, hi_dofs)
        xs = sample_points(mesh)
        sol.error_estimate = float(np.max(np.abs(hi(xs) - sol(xs))))
    return sol


def sample_points(mesh: LayerMesh, per_element: int = 100) -> np.ndarray:
    pts = [np.linspace(mesh.nodes[e], mesh.nodes[e + 1], per_element + 1) for e in range(mesh.n_elements)]
    return np.unique(np.concatenate(pts))


def solve_to_accuracy(problem: Problem, eps: float, target: float, p0: int = 8, p_max: int = 30,
                      lambda0: float | None = None) -> DiscreteSolution:
    """Raise ``p`` (rebuilding the mesh) until the error estimate is below ``target``.

    Returns the most accurate solution found even when ``target`` is not met;
    callers compare ``error_estimate`` themselves.
    """
    lam0 = default_lambda0(problem) if lambda0 is None else lambda0
    best = None
    p = p0
    while p <= p_max:
        mesh = build_layer_mesh(eps, p, lam0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditioningWarning)
            sol = solve(problem, eps, mesh, p)
        if best is None or sol.error_estimate < best.error_estimate:
            best = sol
        if sol.error_estimate <= target:
            return sol
        p += 2
    log.info("target %.2e not reached; best estimate %.2e at p=%d", target, best.error_estimate, best.p)
    return best


def energy_error(u_h: DiscreteSolution, u, du, d2u, nq: int | None = None, breaks=None) -> float:
    """Energy-norm distance between ``u_h`` and an exact solution given by callables.

    ``breaks`` adds quadrature breakpoints, e.g. the nodes of a reference
    solution on another mesh whose second derivative jumps there.
    """
    prob, eps = u_h.problem, u_h.eps
    nodes = u_h.mesh.nodes
    if breaks is not None:
        nodes = np.unique(np.concatenate([nodes, np.clip(np.asarray(breaks, dtype=float), 0.0, 1.0)]))
    nq = nq or u_h.p + 30
    t, w = _gauss(nq)
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        if b <= a:
            continue
        jac = (b - a) / 2.0
        xq = a + jac * (t + 1.0)
        e0 = u_h(xq, 0) - u(xq)
        e1 = u_h(xq, 1) - du(xq)
        e2 = u_h(xq, 2) - d2u(xq)
        integrand = eps * eps * e2**2 + prob.alpha(xq) * e1**2 + prob.beta(xq) * e0**2
        total += jac * np.dot(w, integrand)
    return float(math.sqrt(max(total, 0.0)))


def weak_residual(u_h: DiscreteSolution, nq: int | None = None) -> float:
    """Relative residual of the Galerkin equations against every free basis function."""
    K, rhs, num = _assemble(u_h.problem, u_h.eps, u_h.mesh, u_h.p, nq or u_h.p + 4)
    free = num.free()
    r = K[np.ix_(free, free)] @ u_h.dofs[free] - rhs[free]
    return float(np.max(np.abs(r)) / max(np.max(np.abs(rhs[free])), np.finfo(float).tiny))
