"""Pointwise pseudo-convexity certification for the bent surface family.

At a base point x0 on the surface intersection, the certifier

  1. samples the tangent null set  {xi on the unit sphere : p(x0, xi) = 0,
     hp(psi1)(x0, xi) = 0}  by projected Newton refinement of quasi-uniform
     sphere seeds,
  2. takes the floor m0 of |hp(psi0)| over that set (strictly positive for
     consistent inputs),
  3. computes the bending threshold lambda0 = max_sphere hp2(psi1) / (2 m0^2),
  4. certifies that hp2(psi1 - lam * psi0^2) < 0 on every sampled constraint
     direction, evaluating the margin through two independent routes that are
     required to agree: the algebraic reduction
         hp2(psi1) - 2 lam hp(psi0)^2     (valid since psi0(x0) = 0)
     and a direct hp2 of the composed field.

Standalone second-order (tangential curvature) and first-order (transversal
drift) condition checkers are provided for arbitrary scalar fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import (ContractViolation, DegenerateConstraintSet,
                     InternalInconsistency, NondegeneracyViolation)
from .fields import MetricField, PhasePoint, ScalarField, as_point, linear_combination, squared_field
from .hypotheses import GeometrySpec, build_psi
from .symbols import hp, hp2, hp2_matrix, quadratic_form_values

DEFAULT_EPS_C = 1e-10
DEFAULT_TOL_POS = 1e-6
MERGE_ANGLE = 1e-3          # rad; constraint samples closer than this are duplicates
KEY_IDENTITY_RTOL = 1e-6    # required agreement between the two margin routes


def unit_sphere_seeds(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors.

    dim 3 uses the Fibonacci spiral lattice; other dimensions fall back to
    seeded normalized Gaussians (the spiral has no canonical analog there).
    """
    if n <= 0:
        return np.empty((0, dim))
    if dim == 3:
        i = np.arange(n, dtype=float)
        z = 1.0 - 2.0 * (i + 0.5) / n
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        theta = i * math.pi * (3.0 - math.sqrt(5.0))
        return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _restricted_definite(a: np.ndarray, b1: np.ndarray) -> bool:
    """True when the quadratic form a is definite on the hyperplane b1 . xi = 0."""
    nb = np.linalg.norm(b1)
    if nb < 1e-300:
        ev = np.linalg.eigvalsh(a)
        return bool(np.all(ev > 0) or np.all(ev < 0))
    basis = np.linalg.svd(b1.reshape(1, -1) / nb)[2][1:]
    ev = np.linalg.eigvalsh(basis @ a @ basis.T)
    return bool(np.all(ev > 1e-12) or np.all(ev < -1e-12))


def _newton_on_sphere(a: np.ndarray, b1: Optional[np.ndarray], seeds: np.ndarray,
                      eps_c: float, max_iter: int = 30) -> np.ndarray:
    """Projected Newton for {xi^T a xi = 0} (and optionally {b1 . xi = 0}) on the sphere.

    Batched least-norm Newton steps followed by renormalization, with one
    level of step halving when a step fails to reduce the residual.  Returns
    the converged unit vectors.
    """
    xi = seeds / np.linalg.norm(seeds, axis=1, keepdims=True)

    def residuals(v):
        g1 = np.einsum("ki,ij,kj->k", v, a, v)
        if b1 is None:
            return g1[:, None]
        return np.stack([g1, v @ b1], axis=1)

    for _ in range(max_iter):
        g = residuals(xi)
        rnorm = np.max(np.abs(g), axis=1)
        active = rnorm > eps_c
        if not np.any(active):
            break
        j1 = 2.0 * xi @ a
        if b1 is None:
            jj = np.einsum("ki,ki->k", j1, j1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = -(g[:, 0] / jj)[:, None] * j1
        else:
            aa = np.einsum("ki,ki->k", j1, j1)
            bb = j1 @ b1
            cc = float(b1 @ b1)
            det = aa * cc - bb * bb
            with np.errstate(divide="ignore", invalid="ignore"):
                mu1 = (-g[:, 0] * cc + g[:, 1] * bb) / det
                mu2 = (-g[:, 1] * aa + g[:, 0] * bb) / det
            step = mu1[:, None] * j1 + mu2[:, None] * b1[None, :]
        step = np.where(np.isfinite(step), step, 0.0)
        cand = xi + np.where(active[:, None], step, 0.0)
        norms = np.linalg.norm(cand, axis=1, keepdims=True)
        cand = np.where(norms > 1e-12, cand / norms, xi)
        worse = np.max(np.abs(residuals(cand)), axis=1) > rnorm
        half = xi + np.where((active & worse)[:, None], 0.5 * step, 0.0)
        hn = np.linalg.norm(half, axis=1, keepdims=True)
        half = np.where(hn > 1e-12, half / hn, xi)
        xi = np.where((active & worse)[:, None], half, np.where(active[:, None], cand, xi))

    g = residuals(xi)
    ok = np.max(np.abs(g), axis=1) <= eps_c
    return xi[ok]


def _merge_directions(xis: np.ndarray, angle: float = MERGE_ANGLE) -> np.ndarray:
    """Greedy angular deduplication (signs are kept distinct)."""
    cos_tol = math.cos(angle)
    kept = np.empty((0, xis.shape[1]))
    for v in xis:
        if kept.shape[0] == 0 or float(np.max(kept @ v)) < cos_tol:
            kept = np.vstack([kept, v])
    return kept


@dataclass(frozen=True)
class ConstraintSample:
    xi: np.ndarray
    res_p: float
    res_hp: float


def constraint_samples(Q: MetricField, psi1: ScalarField, x0, n: int,
                       eps_c: float = DEFAULT_EPS_C, seed: int = 0,
                       tol_pos: float = DEFAULT_TOL_POS) -> list:
    """Unit covectors satisfying p = 0 and hp(psi1) = 0 at x0, to eps_c.

    Quasi-uniform sphere seeds are refined by projected Newton onto the two
    constraint surfaces; converged directions are deduplicated by angular
    distance, then locally densified around the survivors so that minima of
    smooth objectives over the set are well resolved.  The number of distinct
    directions returned is whatever the geometry admits (the set can be a
    finite point set), with n controlling the seeding density.
    """
    x0 = as_point(x0)
    if n == 0:
        return []
    a = Q(x0)
    g1 = psi1.grad(x0)
    if float(g1 @ a @ g1) <= tol_pos:
        raise ContractViolation(
            "surface field is not space-like at x0 (<Q dpsi1, dpsi1> <= 0); "
            "the base surface must be non-characteristic")
    b1 = 2.0 * a @ g1
    seeds = unit_sphere_seeds(n, Q.dim, seed=seed)
    conv = _newton_on_sphere(a, b1, seeds, eps_c)
    if len(conv) == 0:
        if _restricted_definite(a, b1):
            raise DegenerateConstraintSet(
                "the null cone does not meet the tangent hyperplane: empty constraint set")
        raise DegenerateConstraintSet("constraint sampling failed to converge")
    reps = _merge_directions(conv)
    # local densification: perturb survivors tangentially and re-refine
    rng = np.random.default_rng(seed + 1)
    extra_seeds = []
    for v in reps:
        for scale in (3e-2, 3e-3):
            t = rng.standard_normal((4, Q.dim))
            t -= np.outer(t @ v, v)
            extra_seeds.append(v[None, :] + scale * t)
    if extra_seeds:
        conv2 = _newton_on_sphere(a, b1, np.concatenate(extra_seeds), eps_c)
        if len(conv2):
            reps = _merge_directions(np.concatenate([reps, conv2]))
    out = []
    for v in reps:
        out.append(ConstraintSample(
            xi=v,
            res_p=abs(float(v @ a @ v)),
            res_hp=abs(float(b1 @ v))))
    return out


def compute_m0(Q: MetricField, psi0: ScalarField, x0, samples,
               tol_pos: float = DEFAULT_TOL_POS) -> float:
    """Floor of |hp(psi0)| over the sampled constraint directions.

    hp(psi0) is linear in xi at fixed x0, so the batch evaluation through the
    drift covector 2 Q dpsi0 is exact.  The value is strictly positive for
    consistent inputs; at or below tolerance it flags an inconsistency in the
    geometry feeding the samples.
    """
    if not samples:
        raise ContractViolation("compute_m0 requires a nonempty sample set")
    x0 = as_point(x0)
    drift = 2.0 * Q(x0) @ psi0.grad(x0)
    xis = np.array([s.xi for s in samples])
    m0 = float(np.min(np.abs(xis @ drift)))
    if m0 <= tol_pos:
        raise NondegeneracyViolation(
            f"constrained drift floor m0 = {m0:.3e} <= {tol_pos:g}: "
            "inputs violate the strict-sign facts the certificate relies on")
    return m0


def compute_lambda0(Q: MetricField, psi1: ScalarField, x0, m0: float,
                    n_dense: int = 4096, seed: int = 0) -> float:
    """Bending threshold: (max over the whole unit sphere of hp2(psi1)) / (2 m0^2).

    hp2 is a quadratic form in xi, so the dense sphere sample is refined by
    the exact quadratic maximum (largest eigenvalue of the polarized form);
    the sampled and refined maxima are required to be consistent.
    """
    if m0 <= 0:
        raise ContractViolation("m0 must be positive")
    x0 = as_point(x0)
    m = hp2_matrix(Q, psi1, x0)
    refined = float(np.linalg.eigvalsh(m)[-1])
    if n_dense > 0:
        sampled = float(np.max(quadratic_form_values(m, unit_sphere_seeds(n_dense, Q.dim, seed))))
        if sampled > refined + 1e-9 * max(1.0, abs(refined)):
            raise InternalInconsistency("sampled sphere maximum exceeds the eigenvalue bound")
    return refined / (2.0 * m0 * m0)


@dataclass
class Certificate:
    x0: np.ndarray
    m0: float
    lambda0: float
    lambda_used: float
    worst_margin: float
    n_samples: int
    status: str                         # "certified" | "failed" | "degenerate"
    margins: np.ndarray = dc_field(default_factory=lambda: np.empty(0))
    margins_direct: np.ndarray = dc_field(default_factory=lambda: np.empty(0))
    samples: list = dc_field(default_factory=list)
    route_disagreement: float = 0.0
    fd_fallback: bool = False
    notes: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x0": [float(v) for v in np.atleast_1d(self.x0)],
            "m0": float(self.m0) if np.isfinite(self.m0) else None,
            "lambda0": float(self.lambda0) if np.isfinite(self.lambda0) else None,
            "lambda_used": float(self.lambda_used) if np.isfinite(self.lambda_used) else None,
            "worst_margin": float(self.worst_margin) if np.isfinite(self.worst_margin) else None,
            "n_samples": int(self.n_samples),
            "status": self.status,
            "route_disagreement": float(self.route_disagreement),
            "fd_fallback": bool(self.fd_fallback),
            "notes": dict(self.notes),
        }

    def sample_rows(self) -> list:
        """Rows (xi..., res_p, res_hp, margin, margin_direct) for CSV export."""
        rows = []
        for k, s in enumerate(self.samples):
            rows.append(list(map(float, s.xi))
                        + [float(s.res_p), float(s.res_hp),
                           float(self.margins[k]), float(self.margins_direct[k])])
        return rows


def certify_fields(Q: MetricField, psi0: ScalarField, psi1: ScalarField, x0,
                   lam: Optional[float] = None, n: int = 2000,
                   eps_c: float = DEFAULT_EPS_C, tol_pos: float = DEFAULT_TOL_POS,
                   seed: int = 0) -> Certificate:
    """Certify the bent surface psi1 - lam * psi0^2 at x0 from explicit fields."""
    x0 = as_point(x0)
    a = Q(x0)
    g1 = psi1.grad(x0)
    if float(g1 @ a @ g1) <= tol_pos:
        return Certificate(x0=x0, m0=float("nan"), lambda0=float("nan"),
                           lambda_used=float("nan"), worst_margin=float("nan"),
                           n_samples=0, status="degenerate",
                           notes={"reason": "base surface characteristic or time-like at x0"})
    samples = constraint_samples(Q, psi1, x0, n, eps_c=eps_c, seed=seed, tol_pos=tol_pos)
    m0 = compute_m0(Q, psi0, x0, samples, tol_pos=tol_pos)
    lambda0 = compute_lambda0(Q, psi1, x0, m0, seed=seed)
    lam_used = float(lam) if lam is not None else 2.0 * max(lambda0, 0.0) + 1.0
    if lam is not None and lam <= 0:
        raise ContractViolation("lam must be positive")

    bent = linear_combination([(1.0, psi1), (-lam_used, squared_field(psi0))],
                              name="bent_surface")
    xis = np.array([s.xi for s in samples])
    drift = 2.0 * a @ psi0.grad(x0)
    # both routes are quadratic forms in xi; evaluate them in batch through
    # their polarized matrices, then spot-check the full nonlinear evaluators
    m_surface = hp2_matrix(Q, psi1, x0)
    m_bent = hp2_matrix(Q, bent, x0)
    margins = quadratic_form_values(m_surface, xis) - 2.0 * lam_used * (xis @ drift) ** 2
    margins_direct = quadratic_form_values(m_bent, xis)
    worst_rel = float(np.max(np.abs(margins - margins_direct) / (1.0 + np.abs(margins))))
    spot = np.linspace(0, len(samples) - 1, min(len(samples), 25)).astype(int)
    for k in spot:
        pp = PhasePoint(x0, samples[k].xi)
        h2 = hp2(Q, psi1, pp)
        d0 = hp(Q, psi0, pp)
        via_identity = h2 - 2.0 * lam_used * d0 * d0
        via_direct = hp2(Q, bent, pp)
        worst_rel = max(
            worst_rel,
            abs(via_identity - margins[k]) / (1.0 + abs(margins[k])),
            abs(via_direct - margins_direct[k]) / (1.0 + abs(margins[k])),
            abs(via_identity - via_direct) / (1.0 + abs(via_identity)))
    if worst_rel > KEY_IDENTITY_RTOL:
        raise InternalInconsistency(
            f"margin routes disagree by {worst_rel:.3e} relative "
            f"(> {KEY_IDENTITY_RTOL:g}); derivative suppliers are inconsistent")
    worst = float(np.max(margins))
    status = "certified" if (worst < -tol_pos and lam_used > lambda0) else "failed"
    return Certificate(
        x0=x0, m0=m0, lambda0=lambda0, lambda_used=lam_used,
        worst_margin=worst, n_samples=len(samples), status=status,
        margins=margins, margins_direct=margins_direct, samples=samples,
        route_disagreement=worst_rel,
        fd_fallback=not (Q.analytic and psi0.analytic and psi1.analytic),
        notes={"seed": seed, "eps_c": eps_c, "n_seeds": n})


def certify(spec: GeometrySpec, x0, lam: Optional[float] = None, n: int = 2000,
            eps_c: float = DEFAULT_EPS_C, tol_pos: float = DEFAULT_TOL_POS,
            seed: int = 0) -> Certificate:
    """Certify pseudo-convexity of the bent surface built from a surface pair."""
    psi0, psi1 = build_psi(spec)
    return certify_fields(spec.Q, psi0, psi1, x0, lam=lam, n=n,
                          eps_c=eps_c, tol_pos=tol_pos, seed=seed)


def check_hormander(Q: MetricField, psi: ScalarField, x0, n: int = 2000,
                    eps_c: float = DEFAULT_EPS_C, tol_pos: float = DEFAULT_TOL_POS,
                    seed: int = 0) -> dict:
    """Second-order condition: hp2(psi) < 0 on {p = 0, hp(psi) = 0} at x0.

    An empty constraint set (possible for definite or transversally-drifting
    geometries) is a vacuous pass and is reported distinctly.
    """
    x0 = as_point(x0)
    if np.linalg.norm(psi.grad(x0)) <= tol_pos:
        raise ContractViolation("psi must have a nonzero differential at x0")
    a = Q(x0)
    b1 = 2.0 * a @ psi.grad(x0)
    conv = _newton_on_sphere(a, b1, unit_sphere_seeds(n, Q.dim, seed=seed), eps_c)
    if len(conv) == 0:
        vac = _restricted_definite(a, b1)
        return {"status": "vacuous" if vac else "no_samples",
                "passed": bool(vac), "max_hp2": None, "witness": None, "n_samples": 0}
    reps = _merge_directions(conv)
    vals = np.array([hp2(Q, psi, PhasePoint(x0, v)) for v in reps])
    k = int(np.argmax(vals))
    return {
        "status": "pass" if vals.max() < -tol_pos else "fail",
        "passed": bool(vals.max() < -tol_pos),
        "max_hp2": float(vals.max()),
        "witness": [float(v) for v in reps[k]],
        "n_samples": int(len(reps)),
    }


def check_calderon(Q: MetricField, psi: ScalarField, x0, n: int = 2000,
                   tol_pos: float = DEFAULT_TOL_POS, seed: int = 0,
                   eps_c: float = DEFAULT_EPS_C) -> dict:
    """First-order condition: hp(psi) != 0 on the unit null directions at x0.

    hp(psi) is linear in xi, so its zeros on the null cone are found exactly
    by solving the two-constraint system; plain cone sampling would never
    see the measure-zero vanishing set.  When that system has no solution,
    the minimum of |hp(psi)| over sampled cone directions is reported.
    """
    x0 = as_point(x0)
    if np.linalg.norm(psi.grad(x0)) <= tol_pos:
        raise ContractViolation("psi must have a nonzero differential at x0")
    a = Q(x0)
    b1 = 2.0 * a @ psi.grad(x0)
    seeds = unit_sphere_seeds(n, Q.dim, seed=seed)
    zeros = _newton_on_sphere(a, b1, seeds, eps_c)
    if len(zeros):
        reps = _merge_directions(zeros)
        vals = np.array([abs(hp(Q, psi, PhasePoint(x0, v))) for v in reps])
        k = int(np.argmin(vals))
        return {"status": "fail", "passed": False,
                "min_abs_hp": float(vals.min()),
                "witness": [float(v) for v in reps[k]],
                "n_samples": int(len(reps))}
    conv = _newton_on_sphere(a, None, seeds, eps_c)
    if len(conv) == 0:
        ev = np.linalg.eigvalsh(a)
        vac = bool(np.all(ev > 0) or np.all(ev < 0))
        return {"status": "vacuous" if vac else "no_samples",
                "passed": vac, "min_abs_hp": None, "witness": None, "n_samples": 0}
    reps = _merge_directions(conv)
    vals = np.array([abs(hp(Q, psi, PhasePoint(x0, v))) for v in reps])
    k = int(np.argmin(vals))
    return {
        "status": "pass" if vals.min() > tol_pos else "fail",
        "passed": bool(vals.min() > tol_pos),
        "min_abs_hp": float(vals.min()),
        "witness": [float(v) for v in reps[k]],
        "n_samples": int(len(reps)),
    }
