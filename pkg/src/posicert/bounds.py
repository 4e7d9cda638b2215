"""Certified rational bounds for polynomials on S, the unit disk or the box.

The square ``[-1, 1]^2`` is cut into a uniform grid of cells that is
refined by halving.  On each cell the polynomial is expanded around the
cell center, ``p(m + t) = sum c_a t^a``, and bounded below by
``c_0 - sum_{a != 0} |c_a| h^|a|`` where ``h`` is the cell half-width.
Cells lying entirely outside S (decided exactly per circle) are dropped.
The Taylor coefficients are computed in float64 for all cells at once; a
rigorous a-priori bound on the rounding error is subtracted, so the
returned rational value is a guaranteed bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import BudgetExceeded
from .polyalg import BivarPoly, HermPoly, herm_to_real, modulus_squared, sqrt_lower, sqrt_upper
from .region import Region, classify_point

Domain = Union[Region, None, str]

DEFAULT_EVAL_CAP = 10**7
START_LEVEL = 3
MAX_CELLS_TIMES_TERMS = 6 * 10**7
_U = 2.0**-53


@dataclass(frozen=True)
class CertifiedBound:
    value: Fraction
    kind: str  # "lower" | "upper"
    domain: str  # "S" | "box" | "disk"
    grid_step: Fraction
    evaluations: int
    sample_value: Optional[Fraction] = None  # attained value at a domain point
    converged: bool = True

    @property
    def gap(self) -> Optional[Fraction]:
        if self.sample_value is None:
            return None
        return abs(self.sample_value - self.value)


def _domain_label(domain: Domain) -> str:
    if domain is None or domain == "box":
        return "box"
    if isinstance(domain, Region):
        return "S" if domain.holes else "disk"
    if domain == "disk":
        return "disk"
    raise ValueError(f"unknown domain {domain!r}")


def _as_region(domain: Domain) -> Optional[Region]:
    if isinstance(domain, Region):
        return domain
    if domain == "disk":
        return Region()
    return None


def _keep_mask(region: Optional[Region], m: np.ndarray, h: float) -> np.ndarray:
    """Cells that may meet S (float test with a conservative margin)."""
    n = m.size
    if region is None:
        return np.ones((n, n), dtype=bool)
    tol = 1e-12
    near = np.maximum(0.0, np.abs(m) - h) ** 2
    keep = (near[:, None] + near[None, :]) <= 1.0 + tol
    for hole in region.holes:
        cx, cy = float(hole.center[0]), float(hole.center[1])
        fx = (np.abs(m - cx) + h) ** 2
        fy = (np.abs(m - cy) + h) ** 2
        keep &= (fx[:, None] + fy[None, :]) >= float(hole.radius) ** 2 - tol
    return keep


def _center_inside(region: Optional[Region], m: np.ndarray) -> np.ndarray:
    """Grid centers that lie in S by a float test with a small safety margin."""
    n = m.size
    if region is None:
        return np.ones((n, n), dtype=bool)
    tol = 1e-12
    ok = (m[:, None] ** 2 + m[None, :] ** 2) <= 1.0 - tol
    for hole in region.holes:
        cx, cy = float(hole.center[0]), float(hole.center[1])
        ok &= ((m - cx)[:, None] ** 2 + (m - cy)[None, :] ** 2) >= float(hole.radius) ** 2 + tol
    return ok


def _taylor_lower(P: np.ndarray, m: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell Taylor-form lower bounds and center values on an n x n grid."""
    d1 = P.shape[0]
    # A[a, b, i] = C(b, a) m_i^(b - a)
    powers = np.vstack([m**k for k in range(d1)])
    A = np.zeros((d1, d1, m.size))
    for a in range(d1):
        for b in range(a, d1):
            A[a, b] = math.comb(b, a) * powers[b - a]
    C = np.einsum("abi,bc,dcj->adij", A, P, A, optimize=True)
    center = C[0, 0]
    lower = center.copy()
    for a in range(d1):
        for c in range(d1 - a):
            if a == 0 and c == 0:
                continue
            lower -= np.abs(C[a, c]) * h ** (a + c)
    return lower, center


def _rounding_allowance(p: BivarPoly) -> Fraction:
    d1 = p.degree + 1
    weighted = sum(abs(v) * 2 ** sum(mono) for mono, v in p.items())
    k = 4 * d1 + d1 * d1 + 10
    gamma = Fraction(k) * Fraction(_U) / (1 - k * Fraction(_U))
    return 4 * gamma * (weighted + 1)


def _dense(p: BivarPoly) -> np.ndarray:
    d1 = p.degree + 1
    P = np.zeros((d1, d1))
    for (a, b), v in p.items():
        P[a, b] = float(v)
    return P


def certified_min(
    p: BivarPoly,
    domain: Domain = None,
    target_gap=None,
    *,
    threshold=None,
    eval_cap: int = DEFAULT_EVAL_CAP,
    raise_on_budget: bool = True,
) -> CertifiedBound:
    """Rational lower bound of ``p`` over ``domain`` (a Region, ``"disk"`` or the box).

    Refinement stops when the gap to an attained sample value is at most
    ``target_gap`` or, if ``threshold`` is given, as soon as the bound is
    known to be above it or a sample is below it.
    """
    label = _domain_label(domain)
    region = _as_region(domain)
    if p.degree == 0:
        v = p.coeff((0, 0))
        return CertifiedBound(v, "lower", label, Fraction(2), 1, v)
    if target_gap is None and threshold is None:
        target_gap = sum(abs(v) for _, v in p.items()) / 100
    target_gap = None if target_gap is None else Fraction(target_gap)
    threshold = None if threshold is None else Fraction(threshold)

    P = _dense(p)
    allowance = _rounding_allowance(p)
    best_lower: Optional[Fraction] = None
    best_sample: Optional[Fraction] = None
    evaluations = 0
    level = START_LEVEL
    step = Fraction(2, 1 << level)
    while True:
        n = 1 << level
        if evaluations + n * n > eval_cap or n * n * P.size > MAX_CELLS_TIMES_TERMS:
            bound = CertifiedBound(
                best_lower, "lower", label, step, evaluations, best_sample, converged=False
            )
            if raise_on_budget:
                raise BudgetExceeded(
                    f"evaluation cap {eval_cap} reached at grid step {step} before the gap was met",
                    best=bound,
                )
            return bound
        evaluations += n * n
        h = 1.0 / n
        step = Fraction(2, n)
        m = -1.0 + (2.0 * np.arange(n) + 1.0) / n
        keep = _keep_mask(region, m, h)
        lower, center = _taylor_lower(P, m, h)
        if not keep.any():
            raise ValueError("domain has no cells; region is empty")
        lo = Fraction(float(lower[keep].min())) - allowance
        best_lower = lo if best_lower is None else max(best_lower, lo)

        inside = keep & _center_inside(region, m)
        masked = np.where(inside, center, np.inf).ravel()
        order = np.argsort(masked, kind="stable")[:8]
        for idx in order:
            if not np.isfinite(masked[idx]):
                break
            i, j = divmod(int(idx), n)
            x = (Fraction(2 * i + 1, n) - 1, Fraction(2 * j + 1, n) - 1)
            if region is not None and not classify_point(region, x).inside:
                continue
            val = p.evaluate(x)
            if best_sample is None or val < best_sample:
                best_sample = val
            break

        done = False
        if threshold is not None:
            done = best_lower >= threshold or (best_sample is not None and best_sample < threshold)
        if target_gap is not None and best_sample is not None:
            done = done or best_sample - best_lower <= target_gap
        if done:
            return CertifiedBound(best_lower, "lower", label, step, evaluations, best_sample)
        level += 1


def certified_max(p: BivarPoly, domain: Domain = None, target_gap=None, **kw) -> CertifiedBound:
    lb = certified_min(-p, domain, target_gap, **kw)
    return CertifiedBound(
        -lb.value,
        "upper",
        lb.domain,
        lb.grid_step,
        lb.evaluations,
        None if lb.sample_value is None else -lb.sample_value,
        lb.converged,
    )


def certified_max_abs(p: HermPoly, domain: Domain = "disk", target_gap=None, **kw) -> CertifiedBound:
    """Rational upper bound of ``|p(z)|`` over the domain."""
    label = _domain_label(domain)
    if p.degree == 0:
        c = p.coeff((0, 0))
        return CertifiedBound(c.abs_upper(), "upper", label, Fraction(2), 1, c.abs_upper())
    sq = herm_to_real(modulus_squared(p))
    gap2 = None
    if target_gap is not None:
        # |p|^2 gap translating to roughly target_gap on |p|
        scale = sum(v.abs_upper() for _, v in p.items())
        gap2 = Fraction(target_gap) * Fraction(target_gap + 2 * scale)
    ub = certified_max(sq, domain, gap2, **kw)
    top = max(ub.value, Fraction(0))
    sample = None
    if ub.sample_value is not None:
        sample = sqrt_lower(max(ub.sample_value, Fraction(0)))
    return CertifiedBound(
        sqrt_upper(top), "upper", label, ub.grid_step, ub.evaluations, sample, ub.converged
    )
