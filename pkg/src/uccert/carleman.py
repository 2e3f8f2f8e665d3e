"""Desk-scale weighted-inequality experiments for the certified surface.

Builds the convexified weight phi = exp(mu * psi) - 1 from a certified
surface field, discretizes the operator P = <Q d, d> + b . d + c on a uniform
grid, and measures the inequality ratio

    ||e^{-lam phi} P w||  /  ( lam^{1/2} ||e^{-lam phi} grad w||
                               + lam^{3/2} ||e^{-lam phi} w|| )

over a reproducible corpus of compactly supported bumps and a geometric
ladder of lam values.  The sweep reports the per-lam minimum ratio (a
positive floor is the empirical face of the weighted estimate) and enough
raw norms to audit the wired lam exponents from log-log slopes.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ContractViolation, RangeError
from .fields import MetricField, ScalarField
from .grids import Grid, d1, d1d1, d2, trapezoid

EXP_LIMIT = 700.0     # largest magnitude we allow in the weight exponent


@dataclass(frozen=True)
class WeightSpec:
    psi: ScalarField
    mu: float
    phi: ScalarField

    def phi_on_grid(self, grid: Grid) -> np.ndarray:
        mesh = grid.meshgrid()
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([self.phi(p) for p in pts])
        return vals.reshape(grid.shape)


def build_weight(psi: ScalarField, mu: float) -> WeightSpec:
    """Convexified weight phi = exp(mu * psi) - 1.

    Shares the zero level set (and hence the sublevel sets) with psi exactly,
    and its differential is mu * exp(mu psi) * dpsi, nonzero wherever dpsi is.
    """
    if mu <= 0:
        raise ContractViolation("mu must be positive")

    def ev(x):
        return float(np.expm1(mu * psi(x)))

    def gr(x):
        return mu * np.exp(mu * psi(x)) * psi.grad(x)

    def he(x):
        g = psi.grad(x)
        return mu * np.exp(mu * psi(x)) * (mu * np.outer(g, g) + psi.hess(x))

    phi = ScalarField(ev, gr, he, name=f"expm1({mu:g}*psi)")
    phi.analytic = psi.analytic
    return WeightSpec(psi=psi, mu=float(mu), phi=phi)


def metric_on_grid(Q: MetricField, grid: Grid) -> np.ndarray:
    """Entries of Q at every node, shape (dim, dim) + grid.shape."""
    if getattr(Q, "is_constant", False):
        center = grid.box.mean(axis=1)
        q = Q(center)
        out = np.empty((grid.dim, grid.dim) + grid.shape)
        for j in range(grid.dim):
            for k in range(grid.dim):
                out[j, k].fill(q[j, k])
        return out
    mesh = grid.meshgrid()
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    out = np.empty((grid.dim, grid.dim, pts.shape[0]))
    for i, p in enumerate(pts):
        out[:, :, i] = Q(p)
    return out.reshape((grid.dim, grid.dim) + grid.shape)


def apply_operator(Q: MetricField, w_values: np.ndarray, grid: Grid,
                   b: Optional[np.ndarray] = None, c: Optional[np.ndarray] = None,
                   q_arrays: Optional[np.ndarray] = None) -> np.ndarray:
    """Second-order centered discretization of P w.

    Pure second derivatives use the three-point stencil; mixed terms use
    successive centered first differences.  ``b`` has shape (dim,) + grid
    shape, ``c`` grid shape; both default to zero.  Consistency is O(h^2) on
    smooth compactly supported w.
    """
    w = np.asarray(w_values, dtype=float)
    h = grid.h
    if q_arrays is None:
        q_arrays = metric_on_grid(Q, grid)
    out = np.zeros_like(w)
    for j in range(grid.dim):
        out += q_arrays[j, j] * d2(w, j, h[j])
        for k in range(j + 1, grid.dim):
            out += 2.0 * q_arrays[j, k] * d1d1(w, j, k, h[j], h[k])
    if b is not None:
        for j in range(grid.dim):
            out += b[j] * d1(w, j, h[j])
    if c is not None:
        out += c * w
    return out


def _weighted_norm(values: np.ndarray, weight_sq: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(trapezoid(values * values * weight_sq, grid)))


def carleman_ratio(Q: MetricField, weight: WeightSpec, w_values: np.ndarray,
                   grid: Grid, lam: float,
                   b: Optional[np.ndarray] = None, c: Optional[np.ndarray] = None,
                   q_arrays: Optional[np.ndarray] = None,
                   phi_values: Optional[np.ndarray] = None) -> dict:
    """Weighted norms and their ratio for one test function and one lam.

    The weight exponent is shifted so its minimum over the (slightly dilated)
    support of w is zero; this changes every norm by the same factor and
    keeps the exponential representable.  A zero test function yields NaN
    ratio with an "empty" flag.
    """
    if lam <= 0:
        raise ContractViolation("lam must be positive")
    w = np.asarray(w_values, dtype=float)
    if phi_values is None:
        phi_values = weight.phi_on_grid(grid)
    support = np.abs(w) > 0.0
    if not np.any(support):
        return {"lhs": 0.0, "rhs1": 0.0, "rhs2": 0.0, "ratio": float("nan"),
                "wnorm_grad": 0.0, "wnorm_w": 0.0, "empty": True}
    region = ndimage.binary_dilation(support, iterations=2)
    shift = float(np.min(phi_values[region]))
    exponent = -lam * (phi_values - shift)
    if float(np.max(np.abs(exponent[region]))) > EXP_LIMIT:
        raise RangeError(f"weight exponent exceeds representable range at lam={lam:g}")
    wsq = np.where(region, np.exp(2.0 * np.clip(exponent, -EXP_LIMIT, 0.0)), 0.0)

    pw = apply_operator(Q, w, grid, b=b, c=c, q_arrays=q_arrays)
    grad_sq = np.zeros_like(w)
    for a in range(grid.dim):
        grad_sq += d1(w, a, grid.h[a]) ** 2
    lhs = _weighted_norm(pw, wsq, grid)
    wnorm_grad = float(np.sqrt(trapezoid(grad_sq * wsq, grid)))
    wnorm_w = _weighted_norm(w, wsq, grid)
    rhs1 = np.sqrt(lam) * wnorm_grad
    rhs2 = lam ** 1.5 * wnorm_w
    denom = rhs1 + rhs2
    return {"lhs": lhs, "rhs1": rhs1, "rhs2": rhs2,
            "ratio": lhs / denom if denom > 0 else float("nan"),
            "wnorm_grad": wnorm_grad, "wnorm_w": wnorm_w, "empty": False}


@dataclass
class CarlemanReport:
    mu: float
    lambdas: list
    rows: list                      # per (testfn, lam) dict
    r_min: dict                     # lam -> min ratio over corpus
    h: float
    decreasing_flags: list = dc_field(default_factory=list)

    def r_floor(self, lam_from: float) -> float:
        vals = [r for lam, r in self.r_min.items() if lam >= lam_from]
        return float(min(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "h": self.h,
            "lambdas": [float(v) for v in self.lambdas],
            "r_min": {str(k): float(v) for k, v in self.r_min.items()},
            "decreasing_flags": list(self.decreasing_flags),
            "n_rows": len(self.rows),
        }

    def csv_rows(self) -> list:
        return [[r["testfn"], r["lam"], r["lhs"], r["rhs1"], r["rhs2"], r["ratio"]]
                for r in self.rows]


def lambda_sweep(Q: MetricField, weight: WeightSpec, corpus: Sequence[np.ndarray],
                 lambdas: Sequence[float], grid: Grid,
                 b: Optional[np.ndarray] = None, c: Optional[np.ndarray] = None) -> CarlemanReport:
    """Full (testfn x lam) ratio table with the per-lam corpus minimum.

    Flags any lam step where the corpus minimum drops by more than half,
    which would signal the ratio decreasing toward zero instead of leveling
    at a positive floor.
    """
    if not len(corpus):
        raise ContractViolation("corpus must be nonempty")
    lambdas = [float(v) for v in lambdas]
    if any(l2 <= l1 for l1, l2 in zip(lambdas, lambdas[1:])):
        raise ContractViolation("lambdas must be strictly increasing")
    q_arrays = metric_on_grid(Q, grid)
    phi_values = weight.phi_on_grid(grid)
    rows = []
    r_min = {}
    for lam in lambdas:
        best = np.inf
        for t_id, w in enumerate(corpus):
            r = carleman_ratio(Q, weight, w, grid, lam, b=b, c=c,
                               q_arrays=q_arrays, phi_values=phi_values)
            r["testfn"] = t_id
            r["lam"] = lam
            rows.append(r)
            if not r["empty"] and np.isfinite(r["ratio"]):
                best = min(best, r["ratio"])
        r_min[lam] = float(best)
    flags = []
    for l1, l2 in zip(lambdas, lambdas[1:]):
        if r_min[l2] < 0.5 * r_min[l1]:
            flags.append((l1, l2))
    return CarlemanReport(mu=weight.mu, lambdas=lambdas, rows=rows,
                          r_min=r_min, h=float(np.max(grid.h)),
                          decreasing_flags=flags)


def exponent_slopes(report: CarlemanReport, testfn: int = 0) -> tuple:
    """Log-log slopes of rhs1 and rhs2 against lam, normalized by the bare norms.

    rhs1 = lam^{1/2} ||e^{-lam phi} grad w|| and rhs2 = lam^{3/2} ||..w||, so
    the slopes of rhs/bare-norm recover the wired exponents 1/2 and 3/2.
    """
    lams, s1, s2 = [], [], []
    for r in report.rows:
        if r["testfn"] == testfn and not r["empty"]:
            if r["wnorm_grad"] > 0 and r["wnorm_w"] > 0:
                lams.append(np.log(r["lam"]))
                s1.append(np.log(r["rhs1"] / r["wnorm_grad"]))
                s2.append(np.log(r["rhs2"] / r["wnorm_w"]))
    if len(lams) < 2:
        raise ContractViolation("need at least two lam values for a slope")
    a = np.vstack([np.ones(len(lams)), lams]).T
    c1 = np.linalg.lstsq(a, np.array(s1), rcond=None)[0][1]
    c2 = np.linalg.lstsq(a, np.array(s2), rcond=None)[0][1]
    return float(c1), float(c2)
