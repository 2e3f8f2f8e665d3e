"""Core geometric data types: metric fields, scalar fields, phase points, charts.

All types are immutable after construction and hold pure callables; they are
safe to evaluate concurrently.  Analytic derivative suppliers are optional:
when absent, central finite differences with a step proportional to the local
coordinate scale are used and the field is flagged as non-analytic so callers
can record the fallback in their reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ChartError, ContractViolation

# Relative step for central finite differences; O(h^2) error is far below
# the certification tolerances used downstream.
FD_REL_STEP = 1e-4


def _fd_step(x: np.ndarray, rel: float = FD_REL_STEP) -> float:
    return rel * max(1.0, float(np.max(np.abs(x))))


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim != 1:
        raise ContractViolation(f"point must be a 1-d vector, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class PhasePoint:
    """A position/covector pair (x, xi)."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_point(self.x))
        object.__setattr__(self, "xi", as_point(self.xi))
        if self.x.shape != self.xi.shape:
            raise ContractViolation(
                f"x and xi must have equal dimension, got {self.x.shape} vs {self.xi.shape}"
            )

    @property
    def dim(self) -> int:
        return self.x.size


class MetricField:
    """x  ->  symmetric n x n coefficient matrix of a second-order symbol.

    ``deriv(x, j)`` returns the partial derivative of the matrix along axis j,
    either from an analytic supplier or by central differences on ``eval``.
    """

    def __init__(
        self,
        dim: int,
        eval_fn: Callable[[np.ndarray], np.ndarray],
        deriv_fn: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
        domain_box: Optional[np.ndarray] = None,
        name: str = "",
    ):
        if dim < 1:
            raise ContractViolation("dim must be >= 1")
        self.dim = int(dim)
        self._eval = eval_fn
        self._deriv = deriv_fn
        self.analytic = deriv_fn is not None
        self.domain_box = None if domain_box is None else np.asarray(domain_box, dtype=float)
        self.name = name
        self.is_constant = False

    def __call__(self, x) -> np.ndarray:
        q = np.asarray(self._eval(as_point(x)), dtype=float)
        if q.shape != (self.dim, self.dim):
            raise ContractViolation(f"metric eval returned shape {q.shape}, expected ({self.dim},{self.dim})")
        return q

    def deriv(self, x, j: int) -> np.ndarray:
        x = as_point(x)
        if self._deriv is not None:
            return np.asarray(self._deriv(x, j), dtype=float)
        h = _fd_step(x)
        e = np.zeros_like(x)
        e[j] = h
        return (self(x + e) - self(x - e)) / (2.0 * h)

    def deriv_all(self, x) -> np.ndarray:
        """Stack of matrix partials, shape (n, n, n); entry [j] is d/dx_j."""
        x = as_point(x)
        return np.stack([self.deriv(x, j) for j in range(self.dim)])

    def symmetry_defect(self, x) -> float:
        q = self(x)
        scale = max(1.0, float(np.max(np.abs(q))))
        return float(np.max(np.abs(q - q.T))) / scale

    def in_domain(self, x) -> bool:
        if self.domain_box is None:
            return True
        x = as_point(x)
        return bool(np.all(x >= self.domain_box[:, 0]) and np.all(x <= self.domain_box[:, 1]))


def constant_metric(matrix, domain_box=None, name: str = "") -> MetricField:
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    zero = np.zeros((n, n))
    out = MetricField(n, lambda x: m, lambda x, j: zero, domain_box=domain_box, name=name)
    out.is_constant = True
    return out


class ScalarField:
    """x -> psi(x) with gradient and Hessian suppliers.

    Missing suppliers fall back to central finite differences on ``eval``
    (gradient) or on ``grad`` (Hessian, symmetrized).
    """

    def __init__(
        self,
        eval_fn: Callable[[np.ndarray], float],
        grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        hess_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "",
    ):
        self._eval = eval_fn
        self._grad = grad_fn
        self._hess = hess_fn
        self.analytic = grad_fn is not None and hess_fn is not None
        self.name = name

    def __call__(self, x) -> float:
        return float(self._eval(as_point(x)))

    def grad(self, x) -> np.ndarray:
        x = as_point(x)
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        h = _fd_step(x)
        g = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            g[j] = (self(x + e) - self(x - e)) / (2.0 * h)
        return g

    def hess(self, x) -> np.ndarray:
        x = as_point(x)
        if self._hess is not None:
            return np.asarray(self._hess(x), dtype=float)
        h = _fd_step(x)
        n = x.size
        m = np.empty((n, n))
        for j in range(n):
            e = np.zeros_like(x)
            e[j] = h
            m[:, j] = (self.grad(x + e) - self.grad(x - e)) / (2.0 * h)
        return 0.5 * (m + m.T)


def constant_field(value: float, dim: int, name: str = "") -> ScalarField:
    g = np.zeros(dim)
    h = np.zeros((dim, dim))
    return ScalarField(lambda x: value, lambda x: g, lambda x: h, name=name)


def coordinate_field(dim: int, axis: int, name: str = "") -> ScalarField:
    g = np.zeros(dim)
    g[axis] = 1.0
    h = np.zeros((dim, dim))
    return ScalarField(lambda x: float(x[axis]), lambda x: g, lambda x: h,
                       name=name or f"x{axis + 1}")


def linear_combination(terms: Sequence[tuple], name: str = "") -> ScalarField:
    """Weighted sum of scalar fields; gradients and Hessians add linearly."""
    terms = [(float(c), f) for c, f in terms]

    def ev(x):
        return sum(c * f(x) for c, f in terms)

    def gr(x):
        return sum(c * f.grad(x) for c, f in terms)

    def he(x):
        return sum(c * f.hess(x) for c, f in terms)

    sf = ScalarField(ev, gr, he, name=name)
    sf.analytic = all(f.analytic for _, f in terms)
    return sf


def product_field(f: ScalarField, g: ScalarField, name: str = "") -> ScalarField:
    """Pointwise product with exact Leibniz gradient/Hessian assembly."""

    def ev(x):
        return f(x) * g(x)

    def gr(x):
        return f(x) * g.grad(x) + g(x) * f.grad(x)

    def he(x):
        df, dg = f.grad(x), g.grad(x)
        return (f(x) * g.hess(x) + g(x) * f.hess(x)
                + np.outer(df, dg) + np.outer(dg, df))

    sf = ScalarField(ev, gr, he, name=name)
    sf.analytic = f.analytic and g.analytic
    return sf


def squared_field(f: ScalarField, name: str = "") -> ScalarField:
    return product_field(f, f, name=name or (f.name + "^2" if f.name else ""))


class Chart:
    """Local diffeomorphism y -> x with Jacobian and inverse.

    ``jacobian(y)`` has columns dx/dy_i.  When no analytic Jacobian is given
    it is produced by central differences on ``forward``.  Second derivatives
    of the component maps (needed to transport Hessians) always come from
    central differences on the Jacobian.
    """

    def __init__(
        self,
        forward: Callable[[np.ndarray], np.ndarray],
        inverse: Callable[[np.ndarray], np.ndarray],
        jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "",
    ):
        self._forward = forward
        self._inverse = inverse
        self._jacobian = jacobian
        self.name = name

    def forward(self, y) -> np.ndarray:
        return np.asarray(self._forward(as_point(y)), dtype=float)

    def inverse(self, x) -> np.ndarray:
        return np.asarray(self._inverse(as_point(x)), dtype=float)

    def jacobian(self, y) -> np.ndarray:
        y = as_point(y)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(y), dtype=float)
        h = _fd_step(y)
        n = y.size
        cols = []
        for j in range(n):
            e = np.zeros_like(y)
            e[j] = h
            cols.append((self.forward(y + e) - self.forward(y - e)) / (2.0 * h))
        return np.stack(cols, axis=1)

    def jacobian_partial(self, y, j: int) -> np.ndarray:
        """d/dy_j of the Jacobian matrix, by central differences."""
        y = as_point(y)
        h = _fd_step(y)
        e = np.zeros_like(y)
        e[j] = h
        return (self.jacobian(y + e) - self.jacobian(y - e)) / (2.0 * h)

    def condition_number(self, y) -> float:
        return float(np.linalg.cond(self.jacobian(y)))

    def roundtrip_defect(self, y) -> float:
        y = as_point(y)
        return float(np.max(np.abs(self.inverse(self.forward(y)) - y)))


def identity_chart(dim: int) -> Chart:
    eye = np.eye(dim)
    return Chart(lambda y: y.copy(), lambda x: x.copy(), lambda y: eye, name="identity")


def linear_chart(matrix) -> Chart:
    a = np.asarray(matrix, dtype=float)
    if abs(np.linalg.det(a)) < 1e-14:
        raise ChartError("linear chart matrix is singular")
    ainv = np.linalg.inv(a)
    return Chart(lambda y: a @ y, lambda x: ainv @ x, lambda y: a, name="linear")


def pullback_scalar(f: ScalarField, chart: Chart, name: str = "") -> ScalarField:
    """Compose a scalar field with a chart, transporting gradient and Hessian.

    grad(f o k)(y) = J(y)^T grad f(k(y));  the Hessian picks up the extra
    curvature term sum_k (d_k f) Hess(k_k) from the chart's second derivatives.
    """

    def ev(y):
        return f(chart.forward(y))

    def gr(y):
        return chart.jacobian(y).T @ f.grad(chart.forward(y))

    def he(y):
        x = chart.forward(y)
        jac = chart.jacobian(y)
        hout = jac.T @ f.hess(x) @ jac
        df = f.grad(x)
        n = y.size if hasattr(y, "size") else len(y)
        for j in range(n):
            # jacobian_partial[:, i][k] = d^2 k_k / dy_j dy_i
            dj = chart.jacobian_partial(y, j)
            hout[j, :] += dj.T @ df
        return 0.5 * (hout + hout.T)

    sf = ScalarField(ev, gr, he, name=name or (f.name + "_chart" if f.name else ""))
    sf.analytic = f.analytic
    return sf
