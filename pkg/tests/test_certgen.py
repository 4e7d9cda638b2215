import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from posicert.certgen import (
    CertTerm,
    HoleTerms,
    PositiveComb,
    add_correction,
    correction_term,
    gamma_substitute,
    generate_certificate,
    hole_reduction,
    paper_hole_constants,
    polya_exponent_bound,
    polya_expand,
    polya_power,
    polya_search,
    remark_polya_bound,
    square_lift,
)
from posicert.certverify import verify_certificate
from posicert.errors import (
    BudgetExceeded,
    NegativeCoefficientAtBound,
    NonpositiveLowerBound,
    SearchExhausted,
    TermBudgetExceeded,
)
from posicert.polyalg import BivarPoly, Poly, QuadHomPoly, parse_poly, poly_norm, sqrt_upper
from posicert.region import Region

from conftest import FIXTURE_POLYS, REGIONS, fixture_poly
from oracles import X1, X2, Y, certificate_expr, gamma, to_sympy

DISK = Region()


def phi(f: QuadHomPoly) -> BivarPoly:
    """Substitute y_t := gamma_t(x) through sympy (independent of the lift code)."""
    g = [(1 + X1) / 4, (1 - X1) / 4, (1 + X2) / 4, (1 - X2) / 4]
    e = to_sympy(f).subs(dict(zip(Y, g)), simultaneous=True)
    return sp.expand(e)


def y(i):
    return QuadHomPoly.var(i)


# -- hole reduction -----------------------------------------------------------


def test_hole_reduction_search_example():
    phat, holes = hole_reduction(parse_poly("3; -1*x1^2"), DISK, F(2))
    assert (holes.c, holes.k) == (1, 0)
    assert phat == parse_poly("2; 1*x2^2")


def test_hole_reduction_explicit_example():
    p = parse_poly("3; -1*x1^2")
    phat, holes = hole_reduction(p, DISK, F(2), "paper")
    # c >= c0 d^2 2^(d - 1/2) ||p|| = 4 * 2^(3/2) * 3
    assert holes.c >= 4 * 3 * F(2) * sqrt_upper(2)
    assert float(holes.c) <= 12 * 2**1.5 * 1.0001
    # least k with (2k + 1) p* >= 2 m c
    assert holes.k == math.ceil((2 * holes.c / 2 - 1) / 2)
    assert (2 * holes.k + 1) * 2 >= 2 * holes.c
    assert (2 * holes.k - 1) * 2 < 2 * holes.c
    assert phat == p - holes.total(DISK)


def test_hole_reduction_nonpositive():
    with pytest.raises(NonpositiveLowerBound):
        hole_reduction(parse_poly("1"), DISK, F(0))


def test_hole_terms_are_squares_times_g():
    region = REGIONS["two"]
    _, holes = hole_reduction(fixture_poly("3-x1^2"), region, F(2))
    expanded = sum((t.square * t.square * region.constraints[t.constraint] * t.weight for t in holes.terms), BivarPoly.zero())
    assert expanded == holes.total(region)


def test_elementary_inequality():
    # (1 - t)^(2k) t < 1/(2k+1) for t in [0, 1]; at k = 0 it is t <= 1,
    # with equality at t = 1, so the strict form needs k >= 1
    for k in range(51):
        bound = F(1, 2 * k + 1)
        for j in range(101):
            t = F(j, 100)
            v = (1 - t) ** (2 * k) * t
            if k == 0:
                assert v <= bound and (v < bound or j == 100)
            else:
                assert v < bound


@pytest.mark.parametrize("rname", list(REGIONS))
def test_phat_half_pstar_on_square(rname, fixture_certificates):
    region = REGIONS[rname]
    rng = random.Random(21)
    pts = [(F(rng.randint(-256, 256), 256), F(rng.randint(-256, 256), 256)) for _ in range(10_000)]
    for pname in FIXTURE_POLYS:
        cert = fixture_certificates[(rname, pname)]
        c, k, pstar = cert.params["c"], cert.params["k"], cert.params["pstar"]
        phat = cert.target - HoleTerms(c, k, ()).total(region) if c else cert.target
        for x in pts:
            assert phat(x) >= pstar / 2


# -- square lift and correction -----------------------------------------------


def test_square_lift_examples():
    assert square_lift(parse_poly("1*x1")) == (y(0) - y(1)) * 2
    assert square_lift(parse_poly("2")) == QuadHomPoly.constant(2)
    s = QuadHomPoly.simplex_sum()
    expected = s * s * 2 + (y(2) - y(3)) ** 2 * 4
    assert square_lift(parse_poly("2; 1*x2^2")) == expected


@st.composite
def bivar(draw):
    coeffs = {}
    for _ in range(draw(st.integers(1, 5))):
        a = draw(st.integers(0, 4))
        b = draw(st.integers(0, 4 - a))
        coeffs[(a, b)] = draw(st.fractions(min_value=-5, max_value=5, max_denominator=7))
    return BivarPoly(coeffs)


@settings(max_examples=30, deadline=None)
@given(bivar())
def test_square_lift_reproduces(p):
    p1 = square_lift(p)
    assert p1.is_homogeneous()
    assert sp.expand(phi(p1) - to_sympy(p)) == 0


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_phi_kernel(d):
    assert phi(correction_term(d)) == 0


def test_correction_examples():
    two = QuadHomPoly.constant(2)
    assert add_correction(two, F(2)) == two
    p1 = square_lift(parse_poly("2; 1*x2^2"))
    out = add_correction(p1, F(2))
    coeff = F(2**4 * 2**4) * poly_norm(p1) ** 2 / 2
    assert out == p1 + correction_term(2) * coeff
    assert sp.expand(phi(out) - phi(p1)) == 0
    with pytest.raises(NonpositiveLowerBound):
        add_correction(p1, F(0))


def _simplex_sample(count, seed):
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(4), size=count)


def _float_eval(f: Poly, pts):
    out = np.zeros(len(pts))
    for m, v in f.items():
        out += float(v) * np.prod(pts ** np.array(m), axis=1)
    return out


@pytest.mark.parametrize("rname", list(REGIONS))
def test_simplex_positivity(rname, fixture_certificates):
    region = REGIONS[rname]
    pts = _simplex_sample(10_000, 4)
    for pname in FIXTURE_POLYS:
        cert = fixture_certificates[(rname, pname)]
        c, k = cert.params["c"], cert.params["k"]
        box = cert.params["pstar_box"]
        phat = cert.target - HoleTerms(c, k, ()).total(region) if c else cert.target
        p1 = square_lift(phat)
        # the explicit correction constant keeps p2 >= pstar_box / 2
        explicit = add_correction(p1, box)
        assert _float_eval(explicit, pts).min() >= float(box) / 2 - 1e-9
        # search mode only needs Polya to succeed, so p2 >= 0 is all it promises
        lam = cert.params["correction"]
        p2 = p1 + correction_term(p1.degree) * lam if lam else p1
        assert _float_eval(p2, pts).min() >= -1e-9


def test_explicit_correction_positive_on_simplex():
    # Explicit constant: p2 >= pstar_box / 2 on the simplex
    phat = parse_poly("2; 1*x2^2")
    p2 = add_correction(square_lift(phat), F(2))
    assert _float_eval(p2, _simplex_sample(10_000, 5)).min() >= 1 - 1e-9


# -- Polya ----------------------------------------------------------------------


def _f(nvars):
    return Poly({(2, 0) + (0,) * (nvars - 2): 1, (1, 1) + (0,) * (nvars - 2): -1, (0, 2) + (0,) * (nvars - 2): 1}, nvars)


def test_polya_example_search():
    N, g = polya_search(_f(2))
    assert N == 1
    assert dict(g.items()) == {(3, 0): 1, (0, 3): 1}


def test_polya_example_four_variables_fails():
    # embedded in 4 variables f vanishes on the face y1 = y2 = 0 and
    # (sum y) f contains -y1 y2 y3, so no exponent works there
    with pytest.raises(SearchExhausted):
        polya_search(_f(4), n_max=12)


def test_polya_example_strict():
    N, g = polya_search(_f(2), strict=True)
    assert N == 3
    assert len(g) == 6 and all(v > 0 for _, v in g.items())
    # direct expansion oracle: N = 0, 1, 2 each miss a monomial or have a negative coefficient
    a, b = sp.symbols("a b")
    for n in range(3):
        e = sp.Poly(sp.expand((a + b) ** n * (a * a - a * b + b * b)), a, b)
        assert len(e.coeffs()) < n + 3 or min(e.coeffs()) <= 0


def test_polya_explicit_bound_example():
    f = _f(2)
    assert poly_norm(f) == 1
    assert polya_exponent_bound(f, F(1, 4)) == 3
    expanded = polya_power(f, 3)
    assert {m for m, _ in expanded.items()} == {(i, 5 - i) for i in range(6)}
    assert all(v > 0 for _, v in expanded.items())
    a, b = sp.symbols("a b")
    oracle = sp.Poly(sp.expand((a + b) ** 3 * (a * a - a * b + b * b)), a, b)
    assert sorted(oracle.coeffs()) == sorted(sp.Integer(int(v)) for _, v in expanded.items())


def test_polya_square_of_sum():
    s = QuadHomPoly.simplex_sum()
    comb = polya_expand(s * s, F(1))
    assert comb.N == 0
    assert all(b > 0 for _, b in comb.entries)


def test_polya_search_exhausted():
    with pytest.raises(SearchExhausted):
        polya_search(_f(2), strict=True, n_max=2)


def test_negative_coefficient_at_bound():
    s = QuadHomPoly.simplex_sum()
    f = (y(0) - y(1)) ** 2 + s * s * F(1, 2)  # min 1/2 on the simplex
    # a false lower bound makes the explicit N too small
    with pytest.raises(NegativeCoefficientAtBound):
        polya_expand(f, F(10), "paper")
    comb = polya_expand(f, F(1, 2), "paper")
    assert all(b > 0 for _, b in comb.entries)
    assert comb.N == remark_polya_bound(f, F(1, 2)) == 11


# -- gamma substitution ---------------------------------------------------------


def _expand_terms(terms, region=DISK):
    from oracles import certificate_expr as ce

    class _C:
        pass

    c = _C()
    c.terms = terms
    c.region = region
    return ce(c)


def test_gamma_identity_each_factor():
    # 8 gamma_i = s_i^2 + w_i^2 + g0
    g0 = 1 - X1**2 - X2**2
    s = [1 + X1, 1 - X1, 1 + X2, 1 - X2]
    w = [X2, X2, X1, X1]
    for i in range(4):
        assert sp.expand(8 * gamma((X1, X2))[i] - (s[i] ** 2 + w[i] ** 2 + g0)) == 0


def test_gamma_substitute_single():
    terms = gamma_substitute(PositiveComb(0, 1, (((1, 0, 0, 0), F(8)),)))
    assert len(terms) == 3
    assert all(t.weight == 1 for t in terms)
    got = {(t.square.to_text(), t.constraint) for t in terms}
    assert got == {
        (parse_poly("1; 1*x1").to_text(), None),
        (parse_poly("1*x2").to_text(), None),
        (parse_poly("1").to_text(), 0),
    }
    assert _expand_terms(terms) == sp.expand(8 * (1 + X1) / 4)


def test_gamma_substitute_pair():
    terms = gamma_substitute(PositiveComb(0, 2, (((1, 1, 0, 0), F(64)),)))
    # 3 x 3 products; gamma_1 and gamma_2 share w = x2, so (w, g0) and
    # (g0, w) are the same term x2^2 g0 and merge into weight 2
    assert len(terms) == 8
    x2g0 = [t for t in terms if t.square == parse_poly("1*x2") and t.constraint == 0]
    assert len(x2g0) == 1 and x2g0[0].weight == 2
    # gamma_1 gamma_3 has no shared factor: all nine survive
    assert len(gamma_substitute(PositiveComb(0, 2, (((1, 0, 1, 0), F(64)),)))) == 9
    g0sq = [t for t in terms if t.square == DISK.constraints[0]]
    assert len(g0sq) == 1 and g0sq[0].constraint is None and g0sq[0].weight == 1
    assert _expand_terms(terms) == sp.expand(64 * (1 + X1) * (1 - X1) / 16)


def test_gamma_substitute_even_power_is_square():
    terms = gamma_substitute(PositiveComb(0, 2, (((2, 0, 0, 0), F(16)),)))
    assert len(terms) == 1
    assert terms[0].constraint is None
    assert _expand_terms(terms) == sp.expand((1 + X1) ** 2)


def test_gamma_substitute_empty():
    assert gamma_substitute(PositiveComb(0, 0, ())) == []


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.tuples(*[st.integers(0, 3)] * 4), st.fractions(min_value=F(1, 9), max_value=9)), min_size=1, max_size=4))
def test_gamma_substitute_identity(entries):
    merged = {}
    for a, b in entries:
        merged[a] = merged.get(a, 0) + b
    comb = PositiveComb(0, 0, tuple(merged.items()))
    terms = gamma_substitute(comb)
    assert all(t.weight > 0 for t in terms)
    target = sum(
        sp.Rational(b.numerator, b.denominator) * sp.prod([g**e for g, e in zip(gamma((X1, X2)), a)])
        for a, b in merged.items()
    )
    assert _expand_terms(terms) == sp.expand(target)


def test_term_budget():
    comb = PositiveComb(0, 4, (((1, 1, 1, 1), F(1)),))
    with pytest.raises(TermBudgetExceeded):
        gamma_substitute(comb, term_cap=80)
    assert len(gamma_substitute(comb, term_cap=81)) <= 81


# -- full pipeline --------------------------------------------------------------


def test_constant_certificate():
    cert = generate_certificate(parse_poly("1"), DISK)
    assert len(cert.terms) == 1
    t = cert.terms[0]
    assert (t.weight, t.square, t.constraint) == (1, BivarPoly.constant(1), None)


def test_three_minus_x1_squared():
    cert = generate_certificate(parse_poly("3; -1*x1^2"), DISK)
    assert CertTerm(F(1), BivarPoly.constant(1), 0) in cert.terms
    assert cert.params["c"] == 1 and cert.params["k"] == 0
    assert certificate_expr(cert) == to_sympy(cert.target)


def test_fixture_certificates_verify(fixture_certificates):
    for key, cert in fixture_certificates.items():
        report = verify_certificate(cert)
        assert report.ok, key
        assert all(t.weight >= 0 for t in cert.terms)


def test_small_certificate_matches_sympy(fixture_certificates):
    for key in [("disk", "2+x2^2"), ("one", "3-x1^2"), ("disk", "3-x1x2")]:
        cert = fixture_certificates[key]
        assert certificate_expr(cert) == to_sympy(cert.target)


@pytest.mark.parametrize("rname", ["one", "two"])
def test_gigj_refused(rname):
    region = REGIONS["two"]
    p = region.constraints[1] * region.constraints[2]
    with pytest.raises(NonpositiveLowerBound):
        generate_certificate(p, region)
    if rname == "one":
        r1 = REGIONS["one"]
        with pytest.raises(NonpositiveLowerBound):
            generate_certificate(r1.constraints[0] * r1.constraints[1], r1)


def test_explicit_mode_constant():
    paper = generate_certificate(parse_poly("1"), REGIONS["two"], "paper")
    search = generate_certificate(parse_poly("1"), REGIONS["two"], "search")
    assert verify_certificate(paper).ok
    assert search.params["N"] <= paper.params["N"]


def test_explicit_mode_refuses_with_estimate():
    with pytest.raises(BudgetExceeded) as info:
        generate_certificate(parse_poly("3; -1*x1^2"), DISK, "paper", n_cap=10**4)
    assert info.value.best > 10**4


def test_explicit_constants_monotone_in_pstar():
    p = parse_poly("3; -1*x1^2")
    c1, k1 = paper_hole_constants(p, DISK, F(2))
    c2, k2 = paper_hole_constants(p, DISK, F(1))
    assert c1 == c2 and k2 >= k1


def test_deterministic():
    a = generate_certificate(parse_poly("3; -1*x1 x2"), REGIONS["one"])
    b = generate_certificate(parse_poly("3; -1*x1 x2"), REGIONS["one"])
    assert [(t.weight, t.square, t.constraint) for t in a.terms] == [(t.weight, t.square, t.constraint) for t in b.terms]
