"""Explicit weighted sum-of-squares certificates on S.

Pipeline: subtract the hole terms ``c * sum (1 - g_i)^(2k) g_i`` so the
rest is positive on the whole square, lift to a homogeneous polynomial on
the 4-simplex via ``y_i -> gamma_i(x)``, add a multiple of a polynomial
vanishing under that substitution, multiply by ``(y1+y2+y3+y4)^N`` until
the coefficients are nonnegative, and rewrite every ``gamma_i`` as a
weighted sum of squares plus ``g0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .bounds import DEFAULT_EVAL_CAP, certified_min
from .errors import (
    BudgetExceeded,
    NegativeCoefficientAtBound,
    NonpositiveLowerBound,
    SearchExhausted,
    SelfVerificationFailed,
    TermBudgetExceeded,
)
from .polyalg import BivarPoly, Poly, QuadHomPoly, as_fraction, poly_norm, sqrt_upper
from .region import Region

MODES = ("search", "paper")
C_LADDER = tuple(
    Fraction(v)
    for v in ("1", "2", "1/2", "3", "3/2", "3/4", "4", "1/4", "6", "8", "12", "16", "1/8", "24", "32")
)
MAX_K = 8
DEFAULT_TERM_CAP = 10**6
DEFAULT_N_CAP = 96
SIMPLEX_SAMPLES = 2000

IntPoly = Dict[Tuple[int, ...], int]


@dataclass(frozen=True)
class CertTerm:
    weight: Fraction
    square: BivarPoly
    constraint: Optional[int] = None  # None means the bare square


@dataclass(frozen=True)
class HoleTerms:
    c: Fraction
    k: int
    terms: Tuple[CertTerm, ...]

    def total(self, region: Region) -> BivarPoly:
        """``c * sum_i (1 - g_i)^(2k) g_i``."""
        out = BivarPoly.zero()
        for g in region.constraints:
            out = out + (1 - g) ** (2 * self.k) * g
        return out * self.c


@dataclass(frozen=True)
class PositiveComb:
    N: int
    degree: int  # N + d_hat
    entries: Tuple[Tuple[Tuple[int, int, int, int], Fraction], ...]

    def to_poly(self) -> QuadHomPoly:
        if not self.entries:
            return QuadHomPoly.zero()
        return QuadHomPoly(dict(self.entries))


@dataclass
class Certificate:
    target: BivarPoly
    region: Region
    terms: List[CertTerm]
    mode: str = "search"
    params: dict = field(default_factory=dict)

    @property
    def term_count(self) -> int:
        return len(self.terms)


# ---------------------------------------------------------------------------
# integer polynomial helpers (generator side)


def _int_scale(p: Poly) -> Tuple[IntPoly, int]:
    """``(L * p as integer dict, L)`` with L the lcm of the denominators."""
    L = 1
    for _, v in p.items():
        L = L * v.denominator // math.gcd(L, v.denominator)
    return {m: int(v * L) for m, v in p.items()}, L


def _imul(a: IntPoly, b: IntPoly) -> IntPoly:
    out: IntPoly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            key = tuple(i + j for i, j in zip(ma, mb))
            out[key] = out.get(key, 0) + ca * cb
    return {m: v for m, v in out.items() if v}


def _times_simplex_sum(a: IntPoly, nvars: int) -> IntPoly:
    out: IntPoly = {}
    for m, v in a.items():
        for i in range(nvars):
            key = m[:i] + (m[i] + 1,) + m[i + 1 :]
            out[key] = out.get(key, 0) + v
    return out


def _primitive(poly: IntPoly) -> Tuple[IntPoly, int]:
    """Divide by the content; the leading (graded-lex) coefficient becomes positive."""
    g = 0
    for v in poly.values():
        g = math.gcd(g, v)
    lead = poly[min(poly, key=lambda m: (sum(m), m))]
    if lead < 0:
        g = -g
    return {m: v // g for m, v in poly.items()}, g


# ---------------------------------------------------------------------------
# stage 1: hole terms


def _hole_terms(region: Region, c: Fraction, k: int) -> Tuple[CertTerm, ...]:
    if c == 0:
        return ()
    out = []
    for i, g in enumerate(region.constraints):
        sq = (1 - g) ** k
        ints, L = _int_scale(sq)
        prim, content = _primitive(ints)
        w = c * Fraction(content, L) ** 2
        out.append(CertTerm(w, BivarPoly(prim), i))
    return tuple(out)


def paper_hole_constants(p: BivarPoly, region: Region, pstar) -> Tuple[Fraction, int]:
    """``c >= c0 d^2 2^(d - 1/2) ||p||`` and the least k with ``(2k+1) p* >= 2 m c``."""
    pstar = as_fraction(pstar)
    d = p.degree
    c = region.c0_bound * d * d * 2**d * sqrt_upper(Fraction(1, 2)) * poly_norm(p)
    need = 2 * region.m * c / pstar
    k = max(0, math.ceil((need - 1) / 2))
    return c, k


def hole_reduction(
    p: BivarPoly,
    region: Region,
    pstar,
    mode: str = "search",
    *,
    ladder: Sequence[Fraction] = C_LADDER,
    max_k: int = MAX_K,
    eval_cap: int = DEFAULT_EVAL_CAP,
) -> Tuple[BivarPoly, HoleTerms]:
    """Return ``phat = p - c sum (1-g_i)^(2k) g_i`` with ``phat >= pstar/2`` on the square."""
    pstar = as_fraction(pstar)
    if pstar <= 0:
        raise NonpositiveLowerBound(f"lower bound on S is {pstar}; p must be strictly positive on S")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if p.degree == 0:
        return p, HoleTerms(Fraction(0), 0, ())
    if mode == "paper":
        c, k = paper_hole_constants(p, region, pstar)
        holes = HoleTerms(c, k, _hole_terms(region, c, k))
        return p - holes.total(region), holes
    half = pstar / 2
    for k in range(max_k + 1):
        base = HoleTerms(Fraction(1), k, ()).total(region)
        for c in ladder:
            phat = p - base * c
            b = certified_min(phat, None, threshold=half, eval_cap=eval_cap, raise_on_budget=False)
            if b.value is not None and b.value >= half:
                return phat, HoleTerms(c, k, _hole_terms(region, c, k))
    raise SearchExhausted(f"no (c, k) with k <= {max_k} on the ladder makes phat >= p*/2 on the square")


# ---------------------------------------------------------------------------
# stage 2: lift to the simplex


def _lift_parts():
    Y = [QuadHomPoly.var(i) for i in range(4)]
    return Y[0] - Y[1], Y[2] - Y[3], QuadHomPoly.simplex_sum()


def square_lift(phat: BivarPoly) -> QuadHomPoly:
    """Homogeneous ``p1`` of degree ``deg phat`` with ``p1(gamma(x)) = phat(x)``."""
    d = phat.degree
    u, v, s = _lift_parts()
    upow, vpow, spow = [QuadHomPoly.constant(1)], [QuadHomPoly.constant(1)], [QuadHomPoly.constant(1)]
    for _ in range(d):
        upow.append(upow[-1] * u)
        vpow.append(vpow[-1] * v)
        spow.append(spow[-1] * s)
    out = QuadHomPoly.zero()
    for (i, j), coef in phat.items():
        out = out + upow[i] * vpow[j] * spow[d - i - j] * (coef * 2 ** (i + j))
    return out


def correction_term(d_hat: int) -> QuadHomPoly:
    """``(y1+y2+y3+y4)^(d-2) (y1+y2-y3-y4)^2``; vanishes under ``y -> gamma(x)``."""
    Y = [QuadHomPoly.var(i) for i in range(4)]
    return QuadHomPoly.simplex_sum() ** (d_hat - 2) * (Y[0] + Y[1] - Y[2] - Y[3]) ** 2


def paper_correction_coeff(p1: QuadHomPoly, pstar_box) -> Fraction:
    d = p1.degree
    return Fraction(2) ** (4 * d - 4) * d**4 * poly_norm(p1) ** 2 / as_fraction(pstar_box)


def add_correction(p1: QuadHomPoly, pstar_box, coeff=None) -> QuadHomPoly:
    """``p1 + coeff * correction_term``; ``coeff`` defaults to the explicit constant."""
    pstar_box = as_fraction(pstar_box)
    if pstar_box <= 0:
        raise NonpositiveLowerBound(f"box lower bound is {pstar_box}")
    d = p1.degree
    if d < 2 or p1.is_zero():
        return p1
    if coeff is None:
        coeff = paper_correction_coeff(p1, pstar_box)
    coeff = as_fraction(coeff)
    if coeff == 0:
        return p1
    return p1 + correction_term(d) * coeff


# ---------------------------------------------------------------------------
# stage 3: Polya


def _least_exceeding(x: Fraction) -> int:
    """Least nonnegative integer strictly greater than ``x``."""
    return max(0, math.floor(x) + 1)


def polya_exponent_bound(f: Poly, fmin) -> int:
    """Least N with ``N > d(d-1)||f|| / (2 f_min) - d``."""
    d = f.degree
    return _least_exceeding(Fraction(d * (d - 1)) * poly_norm(f) / (2 * as_fraction(fmin)) - d)


def remark_polya_bound(p2: QuadHomPoly, pstar_box) -> int:
    """Least N with ``N > 2 d(d-1) ||p2|| / p* - d`` (the larger of the two explicit bounds)."""
    d = p2.degree
    return _least_exceeding(Fraction(2 * d * (d - 1)) * poly_norm(p2) / as_fraction(pstar_box) - d)


def _all_present_positive(poly: IntPoly, degree: int, nvars: int) -> bool:
    if len(poly) != math.comb(degree + nvars - 1, nvars - 1):
        return False
    return all(v > 0 for v in poly.values())


def polya_search(f: Poly, strict: bool = False, n_max: int = DEFAULT_N_CAP) -> Tuple[int, Poly]:
    """Least N such that ``(sum y)^N f`` has nonnegative coefficients.

    With ``strict`` every monomial of the final degree must appear with a
    positive coefficient.  Returns ``(N, expanded polynomial)``.
    """
    ints, L = _int_scale(f)
    n = f.nvars
    d = f.degree
    cur = ints
    if not strict and isinstance(f, QuadHomPoly):
        est = polya_screen(f, n_max)
        if est is None:
            raise SearchExhausted(f"no Polya exponent N <= {n_max}")
        return _exact_from(f, est, n_max)
    for N in range(n_max + 1):
        if strict:
            ok = _all_present_positive(cur, N + d, n)
        else:
            ok = all(v >= 0 for v in cur.values())
        if ok:
            return N, type(f)({m: Fraction(v, L) for m, v in cur.items()}, n)
        cur = _times_simplex_sum(cur, n)
    raise SearchExhausted(f"no Polya exponent N <= {n_max}")


def polya_power(f: Poly, N: int) -> Poly:
    ints, L = _int_scale(f)
    for _ in range(N):
        ints = _times_simplex_sum(ints, f.nvars)
    return type(f)({m: Fraction(v, L) for m, v in ints.items()}, f.nvars)


def polya_screen(f: QuadHomPoly, n_max: int, tol: float = 1e-9) -> Optional[int]:
    """Float estimate of the least Polya exponent (None if above ``n_max``).

    Dense ``(D+1)^3`` array indexed by the first three exponents, rescaled by
    1/4 each step.  A float coefficient below ``-tol * max`` is certainly
    negative, so every N below the returned value is genuinely infeasible;
    the exact expansion decides the returned N itself.
    """
    import numpy as np

    if f.is_zero():
        return 0
    D = f.degree
    arr = np.zeros((D + 1,) * 3)
    scale = max(abs(v) for _, v in f.items())
    for m, v in f.items():
        arr[m[0], m[1], m[2]] = float(v / scale)
    for N in range(n_max + 1):
        top = np.abs(arr).max()
        if arr.min() >= -tol * top:
            return N
        if N == n_max:
            return None
        nxt = np.zeros((arr.shape[0] + 1,) * 3)
        nxt[1:, :-1, :-1] += arr
        nxt[:-1, 1:, :-1] += arr
        nxt[:-1, :-1, 1:] += arr
        nxt[:-1, :-1, :-1] += arr
        arr = nxt * 0.25
    return None


def _exact_from(f: Poly, start: int, n_max: int) -> Tuple[int, Poly]:
    """Exact least N >= start with nonnegative coefficients."""
    ints, L = _int_scale(f)
    for _ in range(start):
        ints = _times_simplex_sum(ints, f.nvars)
    for N in range(start, n_max + 1):
        if all(v >= 0 for v in ints.values()):
            return N, type(f)({m: Fraction(v, L) for m, v in ints.items()}, f.nvars)
        ints = _times_simplex_sum(ints, f.nvars)
    raise SearchExhausted(f"no Polya exponent N <= {n_max}")


def _to_comb(N: int, expanded: Poly) -> PositiveComb:
    neg = [(m, v) for m, v in expanded.items() if v < 0]
    if neg:
        raise NegativeCoefficientAtBound(f"coefficient {neg[0][1]} at {neg[0][0]} after N = {N}")
    return PositiveComb(N, expanded.degree if not expanded.is_zero() else N, tuple(expanded.items()))


def polya_expand(p2: QuadHomPoly, pstar_box, mode: str = "search", n_cap: int = DEFAULT_N_CAP) -> PositiveComb:
    if as_fraction(pstar_box) <= 0:
        raise NonpositiveLowerBound(f"box lower bound is {pstar_box}")
    if mode == "paper":
        N = remark_polya_bound(p2, pstar_box)
        if N > n_cap:
            raise BudgetExceeded(f"explicit Polya exponent N = {N} exceeds the cap {n_cap}")
        return _to_comb(N, polya_power(p2, N))
    N, expanded = polya_search(p2, strict=False, n_max=n_cap)
    return _to_comb(N, expanded)


# ---------------------------------------------------------------------------
# stage 4: gamma substitution
#
# Factor basis: 1+x1, 1-x1, 1+x2, 1-x2, x1, x2, g0.  gamma_i is factor i
# over 4, and 8 gamma_i = s_i^2 + w_i^2 + g0 with s_i = factor i and
# w_i = x2 (i = 0, 1) or x1 (i = 2, 3).

_W_INDEX = (5, 5, 4, 4)
_G0 = 6
_FACTORS: Tuple[IntPoly, ...] = (
    {(0, 0): 1, (1, 0): 1},
    {(0, 0): 1, (1, 0): -1},
    {(0, 0): 1, (0, 1): 1},
    {(0, 0): 1, (0, 1): -1},
    {(1, 0): 1},
    {(0, 1): 1},
    {(0, 0): 1, (2, 0): -1, (0, 2): -1},
)


class _KeyExpander:
    """Memoized expansion of factor-exponent keys, one factor at a time."""

    def __init__(self):
        self.cache: Dict[Tuple[int, ...], IntPoly] = {(0,) * len(_FACTORS): {(0, 0): 1}}

    def __call__(self, key: Tuple[int, ...]) -> IntPoly:
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        j = max(i for i, e in enumerate(key) if e)
        parent = key[:j] + (key[j] - 1,) + key[j + 1 :]
        out = _imul(self(parent), _FACTORS[j])
        self.cache[key] = out
        return out


def gamma_substitute(comb: PositiveComb, region: Optional[Region] = None, term_cap: int = DEFAULT_TERM_CAP) -> List[CertTerm]:
    """Rewrite ``sum b_a gamma^a`` as weighted squares, some multiplied by g0.

    ``gamma^(2 beta)`` is already a square; each leftover odd factor is
    replaced by ``(s^2 + w^2 + g0)/8``, giving at most 81 terms per entry.
    Terms with the same square and constraint are merged.
    """
    merged: Dict[Tuple[Tuple[int, ...], Optional[int]], Fraction] = {}
    produced = 0
    for alpha, b in comb.entries:
        beta = [a // 2 for a in alpha]
        odd = [i for i, a in enumerate(alpha) if a % 2]
        produced += 3 ** len(odd)
        if produced > term_cap:
            raise TermBudgetExceeded(
                f"gamma substitution exceeds the term budget {term_cap}; "
                "use search mode or lower the degree"
            )
        base = Fraction(b) / (16 ** sum(beta) * 8 ** len(odd))
        for choice in range(3 ** len(odd)):
            key = list(beta) + [0, 0, 0]
            t = 0
            c = choice
            for i in odd:
                c, pick = divmod(c, 3)
                if pick == 0:
                    key[i] += 1
                elif pick == 1:
                    key[_W_INDEX[i]] += 1
                else:
                    t += 1
            key[_G0] = t // 2
            ident = (tuple(key), 0 if t % 2 else None)
            merged[ident] = merged.get(ident, 0) + base
    expand = _KeyExpander()
    out = []
    for (key, cons), w in sorted(merged.items(), key=lambda kv: (kv[0][0], kv[0][1] is not None)):
        prim, content = _primitive(expand(key))
        square = BivarPoly._trusted({m: Fraction(v) for m, v in prim.items()})
        out.append(CertTerm(w * content * content, square, cons))
    return out


# ---------------------------------------------------------------------------
# full pipeline


def lower_bound_on_S(p: BivarPoly, region: Region, gap=None, eval_cap: int = DEFAULT_EVAL_CAP):
    """Certified ``p*``; refines once more if the first bound is not positive."""
    b = certified_min(p, region, gap, eval_cap=eval_cap, raise_on_budget=False)
    if gap is None and b.sample_value is not None and b.sample_value > 0 and b.value < b.sample_value * 7 / 8:
        # the default gap is relative to the coefficients; tighten it relative to the minimum
        b = certified_min(p, region, b.sample_value / 8, eval_cap=eval_cap, raise_on_budget=False)
    if b.value is not None and b.value <= 0 and b.sample_value is not None and b.sample_value > 0:
        b = certified_min(p, region, threshold=b.sample_value / 2, eval_cap=eval_cap, raise_on_budget=False)
    if b.value is None or b.value <= 0:
        raise NonpositiveLowerBound(
            f"certified lower bound of p on S is {b.value} (sample value {b.sample_value}); "
            "the construction needs p > 0 on S"
        )
    return b


def _simplex_points(count: int):
    """Deterministic rational points of the 4-simplex, vertices and centroids first."""
    pts = []
    for i in range(4):
        pts.append(tuple(Fraction(int(i == j)) for j in range(4)))
    denom = 12
    for a in range(denom + 1):
        for b in range(denom + 1 - a):
            for c in range(denom + 1 - a - b):
                pts.append((Fraction(a, denom), Fraction(b, denom), Fraction(c, denom), Fraction(denom - a - b - c, denom)))
    return pts[:count]


def simplex_sample_min(f: QuadHomPoly, count: int = SIMPLEX_SAMPLES) -> Fraction:
    return min(f.evaluate(y) for y in _simplex_points(count))


def _search_correction(p1: QuadHomPoly, pstar_box: Fraction, n_cap: int):
    """Correction coefficient on a dyadic ladder giving the smallest Polya exponent."""
    d = p1.degree
    if d < 2:
        return Fraction(0), p1, polya_expand(p1, pstar_box, "search", n_cap)
    r = correction_term(d)
    paper = paper_correction_coeff(p1, pstar_box)
    ladder = [Fraction(0)]
    lam = Fraction(1, 16)
    while lam < paper:
        ladder.append(lam)
        lam *= 2
    ladder.append(paper)
    best = None
    cap = n_cap
    for lam in ladder:
        p2 = p1 + r * lam if lam else p1
        if simplex_sample_min(p2, 400) <= 0:
            continue  # Polya can never succeed if p2 is not positive on the simplex
        est = polya_screen(p2, cap)
        if est is None:
            if best is not None:
                break  # past the sweet spot
            continue
        if best is None or est < best[0]:
            best = (est, lam, p2)
            cap = est
        elif est > best[0]:
            break
    if best is None:
        raise SearchExhausted(f"no correction on the ladder gives a Polya exponent <= {n_cap}")
    est, lam, p2 = best
    N, expanded = _exact_from(p2, est, n_cap)
    return lam, p2, _to_comb(N, expanded)


def paper_polya_lower_estimate(phat: BivarPoly, pstar_box) -> int:
    """Cheap lower bound for the explicit Polya exponent.

    ``||p1|| >= |p1(e_i)|`` and ``p1(e_1) = phat(2, 0)`` etc.; the same holds
    for p2, whose coefficient at ``y1^d`` is ``p1(e_1) + correction``.
    """
    d = phat.degree
    if d < 2:
        return remark_polya_bound(square_lift(phat), pstar_box)
    two = Fraction(2)
    vals = [phat.evaluate(x) for x in ((two, 0), (-two, 0), (0, two), (0, -two))]
    n1 = max(abs(v) for v in vals)
    corr = Fraction(2) ** (4 * d - 4) * d**4 * n1**2 / as_fraction(pstar_box)
    n2 = max(abs(v + corr) for v in vals)
    return remark_polya_bound_from_norm(d, n2, pstar_box)


def _magnitude(n: int) -> str:
    """``n`` itself when short, else a power of ten not exceeding it."""
    if n < 10**12:
        return str(n)
    return f"10^{math.floor((n.bit_length() - 1) * math.log10(2))}"


def paper_estimate_before_reduction(p: BivarPoly, region: Region, c: Fraction, k: int, pstar_box) -> Optional[int]:
    """``paper_polya_lower_estimate`` without expanding ``(1 - g_i)^(2k)``.

    phat is evaluated pointwise; its degree is ``2(2k+1)`` unless the
    leading forms cancel, in which case None is returned (expand instead).
    """
    if c == 0 or p.degree > 2 * (2 * k + 1):
        return None
    lead = -1 + sum(s ** (2 * k + 1) for s in region.scales[1:])
    if lead == 0:
        return None
    d = 2 * (2 * k + 1)
    two = Fraction(2)
    vals = []
    for x in ((two, 0), (-two, 0), (0, two), (0, -two)):
        hole = sum((1 - g.evaluate(x)) ** (2 * k) * g.evaluate(x) for g in region.constraints)
        vals.append(p.evaluate(x) - c * hole)
    n1 = max(abs(v) for v in vals)
    corr = Fraction(2) ** (4 * d - 4) * d**4 * n1**2 / as_fraction(pstar_box)
    n2 = max(abs(v + corr) for v in vals)
    return remark_polya_bound_from_norm(d, n2, pstar_box)


def remark_polya_bound_from_norm(d: int, norm: Fraction, pstar_box) -> int:
    return _least_exceeding(Fraction(2 * d * (d - 1)) * norm / as_fraction(pstar_box) - d)


def generate_certificate(
    p: BivarPoly,
    region: Region,
    mode: str = "search",
    *,
    gap=None,
    term_cap: int = DEFAULT_TERM_CAP,
    eval_cap: int = DEFAULT_EVAL_CAP,
    n_cap: int = DEFAULT_N_CAP,
    verify: bool = True,
) -> Certificate:
    """Certificate ``p = sum w_j r_j^2 + sum_i (sum w_ij r_ij^2) g_i`` on S."""
    from .certverify import verify_certificate

    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    lb = lower_bound_on_S(p, region, gap, eval_cap)
    pstar = lb.value
    if mode == "paper" and p.degree > 0:
        # refuse before expanding (1 - g_i)^(2k), which is itself expensive for large k
        c, k = paper_hole_constants(p, region, pstar)
        estimate = paper_estimate_before_reduction(p, region, c, k, pstar / 2)
        if estimate is not None and estimate > n_cap:
            raise BudgetExceeded(
                f"explicit Polya exponent is at least {_magnitude(estimate)} (k = {k}, "
                f"deg phat = {2 * (2 * k + 1)}); cap is {n_cap}",
                best=estimate,
            )
    phat, holes = hole_reduction(p, region, pstar, mode, eval_cap=eval_cap)
    if mode == "paper":
        # the square bound guaranteed by the hole step
        pstar_box = pstar / 2
        estimate = paper_polya_lower_estimate(phat, pstar_box)
        if estimate > n_cap:
            raise BudgetExceeded(
                f"explicit Polya exponent is at least {_magnitude(estimate)} (k = {holes.k}, "
                f"deg phat = {phat.degree}); cap is {n_cap}",
                best=estimate,
            )
        p1 = square_lift(phat)
        p2 = add_correction(p1, pstar_box)
        correction = paper_correction_coeff(p1, pstar_box) if p1.degree >= 2 else Fraction(0)
        comb = polya_expand(p2, pstar_box, "paper", n_cap)
    else:
        if phat.degree == 0:
            pstar_box = phat.coeff((0, 0))
        else:
            pstar_box = certified_min(phat, None, gap, eval_cap=eval_cap, raise_on_budget=False).value
            # hole_reduction already certified phat >= pstar/2; a coarse gap may report less
            if holes.k or holes.c:
                pstar_box = pstar / 2 if pstar_box is None else max(pstar_box, pstar / 2)
        if pstar_box is None or pstar_box <= 0:
            raise NonpositiveLowerBound(f"phat lower bound on the square is {pstar_box}")
        p1 = square_lift(phat)
        correction, p2, comb = _search_correction(p1, pstar_box, n_cap)
    terms = list(holes.terms) + gamma_substitute(comb, region, term_cap)
    if len(terms) > term_cap:
        raise TermBudgetExceeded(f"{len(terms)} certificate terms exceed the budget {term_cap}")
    params = {
        "c": holes.c,
        "k": holes.k,
        "N": comb.N,
        "pstar": pstar,
        "pstar_box": pstar_box,
        "correction": correction,
        "d_hat": phat.degree,
    }
    cert = Certificate(p, region, terms, mode, params)
    if verify:
        report = verify_certificate(cert, p, region)
        if not report.ok:
            raise SelfVerificationFailed(f"generated certificate does not verify: {report.summary()}")
    return cert
