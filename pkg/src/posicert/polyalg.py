"""Exact sparse polynomial arithmetic.

Three polynomial families are used throughout the package:

* :class:`BivarPoly` -- rational polynomials in ``x1, x2``;
* :class:`QuadHomPoly` -- homogeneous rational polynomials in ``y1..y4``;
* :class:`HermPoly` -- polynomials ``sum p_kl z^k zbar^l`` with Gaussian
  rational coefficients.

Everything is exact; no floating point value ever enters a coefficient.
Irrational constants are replaced by rational enclosures computed with
:func:`sqrt_bounds`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from .errors import NotRealValued, ParseError

Monomial = Tuple[int, ...]

DEFAULT_REL = Fraction(1, 10**6)


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not coefficients")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"not a rational: {value!r}") from exc
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def format_fraction(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def sqrt_bounds(x, rel=DEFAULT_REL) -> Tuple[Fraction, Fraction]:
    """Rational ``lo <= sqrt(x) <= hi`` with ``hi <= lo * (1 + rel)``.

    Exact (``lo == hi``) when ``x`` is the square of a rational.
    """
    x = as_fraction(x)
    if x < 0:
        raise ValueError("square root of a negative number")
    if x == 0:
        return Fraction(0), Fraction(0)
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        r = Fraction(rn, rd)
        return r, r
    # sqrt(num/den) = sqrt(num*den)/den
    prod = num * den
    scale = 1
    while True:
        f = math.isqrt(prod * scale * scale)
        if f > 0 and Fraction(f + 1, f) <= 1 + rel:
            return Fraction(f, den * scale), Fraction(f + 1, den * scale)
        scale *= 1 << 16


def sqrt_upper(x, rel=DEFAULT_REL) -> Fraction:
    return sqrt_bounds(x, rel)[1]


def sqrt_lower(x, rel=DEFAULT_REL) -> Fraction:
    return sqrt_bounds(x, rel)[0]


@dataclass(frozen=True)
class GaussQ:
    """Gaussian rational ``re + i*im``."""

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", as_fraction(self.re))
        object.__setattr__(self, "im", as_fraction(self.im))

    @classmethod
    def coerce(cls, value) -> "GaussQ":
        if isinstance(value, GaussQ):
            return value
        if isinstance(value, tuple) and len(value) == 2:
            return cls(value[0], value[1])
        if isinstance(value, complex):
            raise TypeError("complex floats are not exact coefficients")
        return cls(as_fraction(value))

    def __add__(self, other):
        o = GaussQ.coerce(other)
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussQ.coerce(other)
        return GaussQ(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussQ.coerce(other) - self

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __mul__(self, other):
        o = GaussQ.coerce(other)
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussQ.coerce(other)
        n = o.abs2()
        if n == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        t = self * o.conjugate()
        return GaussQ(t.re / n, t.im / n)

    def __pow__(self, n: int):
        out = GaussQ(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = GaussQ.coerce(other)
        except (TypeError, ParseError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def conjugate(self) -> "GaussQ":
        return GaussQ(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def abs_upper(self, rel=DEFAULT_REL) -> Fraction:
        if not self.im:
            return abs(self.re)
        if not self.re:
            return abs(self.im)
        return sqrt_upper(self.abs2(), rel)

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"({format_fraction(self.re)},{format_fraction(self.im)})"


I = GaussQ(0, 1)


def _graded_key(mono: Monomial):
    return (sum(mono), mono)


class SparsePoly:
    """Sparse map ``exponent tuple -> coefficient`` with no stored zeros.

    Subclasses fix the coefficient ring (``_coerce``), the variable names
    and, where relevant, extra invariants.  Instances are immutable.
    """

    __slots__ = ("_c", "nvars")

    var_names: Tuple[str, ...] = ()
    fixed_nvars: int | None = None

    def __init__(self, coeffs: Mapping[Monomial, object] | Iterable = (), nvars: int | None = None):
        if nvars is None:
            nvars = self.fixed_nvars
        if nvars is None:
            raise ValueError("nvars is required")
        if self.fixed_nvars is not None and nvars != self.fixed_nvars:
            raise ValueError(f"{type(self).__name__} has exactly {self.fixed_nvars} variables")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        c: Dict[Monomial, object] = {}
        zero = self._coerce(0)
        for mono, val in items:
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars or any(e < 0 for e in mono):
                raise ValueError(f"bad monomial {mono} for {nvars} variables")
            v = self._coerce(val)
            s = c.get(mono, zero) + v
            if s:
                c[mono] = s
            elif mono in c:
                del c[mono]
        self._c = c
        self.nvars = nvars
        self._check()

    # -- hooks --------------------------------------------------------
    @staticmethod
    def _coerce(value):
        return as_fraction(value)

    def _check(self):
        pass

    def _new(self, coeffs) -> "SparsePoly":
        obj = object.__new__(type(self))
        obj._c = coeffs
        obj.nvars = self.nvars
        obj._check()
        return obj

    @classmethod
    def _trusted(cls, coeffs: Dict[Monomial, object], nvars: int | None = None):
        """Wrap a clean ``{mono: nonzero coeff}`` map without re-validating it."""
        obj = object.__new__(cls)
        obj._c = coeffs
        obj.nvars = cls.fixed_nvars if nvars is None else nvars
        return obj

    def names(self) -> Tuple[str, ...]:
        if len(self.var_names) == self.nvars:
            return self.var_names
        return tuple(f"x{i + 1}" for i in range(self.nvars))

    # -- construction helpers ----------------------------------------
    @classmethod
    def constant(cls, value, nvars: int | None = None):
        n = cls.fixed_nvars if nvars is None else nvars
        return cls({(0,) * n: value}, n)

    @classmethod
    def var(cls, index: int, nvars: int | None = None):
        n = cls.fixed_nvars if nvars is None else nvars
        mono = tuple(1 if i == index else 0 for i in range(n))
        return cls({mono: 1}, n)

    @classmethod
    def zero(cls, nvars: int | None = None):
        return cls({}, cls.fixed_nvars if nvars is None else nvars)

    # -- container protocol ------------------------------------------
    @property
    def coeffs(self) -> Dict[Monomial, object]:
        return dict(self._c)

    def items(self):
        """Terms in canonical graded-lex order."""
        return sorted(self._c.items(), key=lambda kv: _graded_key(kv[0]))

    def __len__(self):
        return len(self._c)

    def __iter__(self):
        return iter(self.items())

    def coeff(self, mono: Sequence[int]):
        return self._c.get(tuple(mono), self._coerce(0))

    def is_zero(self) -> bool:
        return not self._c

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self._c), default=0)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._c}) <= 1

    # -- arithmetic ----------------------------------------------------
    def _is_scalar(self, other) -> bool:
        return not isinstance(other, SparsePoly)

    def _lift(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return self._new({(0,) * self.nvars: self._coerce(other)} if other else {})

    def __add__(self, other):
        other = self._lift(other)
        c = dict(self._c)
        for m, v in other._c.items():
            s = c.get(m)
            s = v if s is None else s + v
            if s:
                c[m] = s
            else:
                c.pop(m, None)
        return self._new(c)

    __radd__ = __add__

    def __neg__(self):
        return self._new({m: -v for m, v in self._c.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if self._is_scalar(other):
            s = self._coerce(other)
            if not s:
                return self._new({})
            return self._new({m: v * s for m, v in self._c.items()})
        other = self._lift(other)
        c: Dict[Monomial, object] = {}
        for m1, v1 in self._c.items():
            for m2, v2 in other._c.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                s = c.get(m)
                c[m] = v1 * v2 if s is None else s + v1 * v2
        return self._new({m: v for m, v in c.items() if v})

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, scalar):
        s = self._coerce(scalar)
        return self._new({m: v / s for m, v in self._c.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = self._lift(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        if isinstance(other, SparsePoly):
            return self.nvars == other.nvars and self._c == other._c
        try:
            return self == self._lift(other)
        except (TypeError, ParseError):
            return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self._c.items())))

    def map_coeffs(self, fn):
        out = {}
        for m, v in self._c.items():
            w = fn(v)
            if w:
                out[m] = w
        return self._new(out)

    # -- evaluation ----------------------------------------------------
    def evaluate(self, point):
        point = tuple(point)
        if len(point) != self.nvars:
            raise ValueError(f"expected a point with {self.nvars} coordinates, got {len(point)}")
        pts = [self._coerce_point(x) for x in point]
        cache: Dict[Tuple[int, int], object] = {}

        def pw(i, e):
            key = (i, e)
            if key not in cache:
                cache[key] = pts[i] ** e
            return cache[key]

        total = self._coerce(0)
        for m, v in self._c.items():
            t = v
            for i, e in enumerate(m):
                if e:
                    t = t * pw(i, e)
            total = total + t
        return total

    @staticmethod
    def _coerce_point(x):
        return as_fraction(x)

    __call__ = evaluate

    # -- text ----------------------------------------------------------
    def _format_coeff(self, v) -> str:
        return format_fraction(v)

    def to_lines(self):
        """Canonical text form, one monomial per entry."""
        names = self.names()
        out = []
        for m, v in self.items():
            mono = " ".join(f"{n}^{e}" for n, e in zip(names, m))
            out.append(f"{self._format_coeff(v)} * {mono}")
        return out

    def to_text(self) -> str:
        return "\n".join(self.to_lines()) if self._c else "0"

    def __repr__(self):
        if not self._c:
            return f"{type(self).__name__}(0)"
        return f"{type(self).__name__}({'; '.join(self.to_lines())})"


class Poly(SparsePoly):
    """Rational polynomial in an arbitrary number of variables."""

    __slots__ = ()


class BivarPoly(Poly):
    __slots__ = ()
    fixed_nvars = 2
    var_names = ("x1", "x2")

    @classmethod
    def x1(cls):
        return cls.var(0)

    @classmethod
    def x2(cls):
        return cls.var(1)


class QuadHomPoly(Poly):
    """Homogeneous rational polynomial in ``y1..y4``."""

    __slots__ = ()
    fixed_nvars = 4
    var_names = ("y1", "y2", "y3", "y4")

    def _check(self):
        if not self.is_homogeneous():
            raise ValueError("QuadHomPoly must be homogeneous")

    @classmethod
    def simplex_sum(cls):
        return cls({m: 1 for m in ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))})


class HermPoly(SparsePoly):
    """``sum p_kl z^k zbar^l``; exponent tuples are ``(k, l)``."""

    __slots__ = ()
    fixed_nvars = 2
    var_names = ("z", "zbar")

    @staticmethod
    def _coerce(value):
        return GaussQ.coerce(value)

    @staticmethod
    def _coerce_point(x):
        return GaussQ.coerce(x)

    def _format_coeff(self, v) -> str:
        return repr(v)

    @classmethod
    def z(cls):
        return cls({(1, 0): 1})

    @classmethod
    def zbar(cls):
        return cls({(0, 1): 1})

    def evaluate(self, point):
        """Value at a single complex point ``z`` (a :class:`GaussQ`)."""
        if isinstance(point, (tuple, list)) and len(point) == 2 and not isinstance(point, GaussQ):
            # a (re, im) pair is accepted as a complex number
            point = GaussQ(*point)
        z = GaussQ.coerce(point)
        return SparsePoly.evaluate(self, (z, z.conjugate()))

    __call__ = evaluate

    def conj(self) -> "HermPoly":
        """``pbar`` with ``pbar_kl = conj(p_lk)``; ``pbar(a, a*) = p(a, a*)*``."""
        return self._new({(l, k): v.conjugate() for (k, l), v in self._c.items()})

    def non_hermitian_index(self):
        for (k, l), v in self.items():
            if self._c.get((l, k), GaussQ(0)) != v.conjugate():
                return (k, l)
        return None

    def is_real_valued(self) -> bool:
        return self.non_hermitian_index() is None


# ---------------------------------------------------------------------------
# operations


def poly_eval(q: SparsePoly, point):
    """Exact value of ``q`` at ``point`` (a tuple, or a complex point for HermPoly)."""
    return q.evaluate(point)


def multinomial_weight(mono: Monomial) -> Fraction:
    """``a1! ... an! / (a1 + ... + an)!``."""
    num = 1
    for e in mono:
        num *= math.factorial(e)
    return Fraction(num, math.factorial(sum(mono)))


def poly_norm(q: Poly) -> Fraction:
    """Maximum of ``|q_a| * a! / |a|!`` over the support (0 for the zero polynomial)."""
    return max((abs(v) * multinomial_weight(m) for m, v in q.items()), default=Fraction(0))


def lipschitz_const(q: Poly, n: int | None = None, rel=Fraction(1, 1000)) -> Fraction:
    """Rational Lipschitz constant of ``q`` on ``[-1, 1]^n``: ``d^2 n^(d - 1/2) ||q||`` rounded up."""
    n = q.nvars if n is None else n
    d = q.degree
    norm = poly_norm(q)
    if d == 0 or norm == 0:
        return Fraction(0)
    # n^(d - 1/2) = n^d * sqrt(1/n)
    return d * d * Fraction(n) ** d * sqrt_upper(Fraction(1, n), rel) * norm


def _z_forms():
    half = Fraction(1, 2)
    z_plus = HermPoly({(1, 0): half, (0, 1): half})  # x1 = (z + zbar)/2
    z_minus = HermPoly({(1, 0): GaussQ(0, -half), (0, 1): GaussQ(0, half)})  # x2 = (z - zbar)/(2i)
    return z_plus, z_minus


def real_to_herm(q: BivarPoly) -> HermPoly:
    """Rewrite a real polynomial in ``x1 = Re z``, ``x2 = Im z``."""
    x1, x2 = _z_forms()
    deg1 = max((m[0] for m in q._c), default=0)
    deg2 = max((m[1] for m in q._c), default=0)
    p1 = [HermPoly.constant(1)]
    for _ in range(deg1):
        p1.append(p1[-1] * x1)
    p2 = [HermPoly.constant(1)]
    for _ in range(deg2):
        p2.append(p2[-1] * x2)
    out = HermPoly.zero()
    for (a, b), v in q.items():
        out = out + (p1[a] * p2[b]) * v
    return out


def herm_to_real(p: HermPoly) -> BivarPoly:
    """``p(x1 + i x2, x1 - i x2)`` as a real polynomial; requires Hermitian symmetry."""
    bad = p.non_hermitian_index()
    if bad is not None:
        raise NotRealValued(bad)
    # work over Gaussian rationals in x1, x2, then drop the (vanishing) imaginary part
    zp = _GaussBivar({(1, 0): GaussQ(1), (0, 1): GaussQ(0, 1)})
    zm = _GaussBivar({(1, 0): GaussQ(1), (0, 1): GaussQ(0, -1)})
    kmax = max((k for k, _ in p._c), default=0)
    lmax = max((l for _, l in p._c), default=0)
    zpow = [_GaussBivar.constant(1)]
    for _ in range(kmax):
        zpow.append(zpow[-1] * zp)
    zbpow = [_GaussBivar.constant(1)]
    for _ in range(lmax):
        zbpow.append(zbpow[-1] * zm)
    acc = _GaussBivar.zero()
    for (k, l), v in p.items():
        acc = acc + (zpow[k] * zbpow[l]) * v
    out = {}
    for m, v in acc._c.items():
        if v.im:
            raise NotRealValued(m)
        out[m] = v.re
    return BivarPoly(out)


class _GaussBivar(SparsePoly):
    __slots__ = ()
    fixed_nvars = 2
    var_names = ("x1", "x2")

    @staticmethod
    def _coerce(value):
        return GaussQ.coerce(value)


def modulus_squared(p: HermPoly) -> HermPoly:
    """Commutative expansion of ``pbar * p``; pointwise ``|p(z)|^2``."""
    return p.conj() * p


# ---------------------------------------------------------------------------
# text format

_COEF = r"(?:\(\s*[-+]?\d+(?:/\d+)?\s*,\s*[-+]?\d+(?:/\d+)?\s*\)|[-+]?\d+(?:/\d+)?)"
_ENTRY_RE = re.compile(rf"^\s*(?P<coef>{_COEF})\s*(?:\*\s*(?P<mono>.*?))?\s*$")
_FACTOR_RE = re.compile(r"^(?P<name>[A-Za-z]+\d*)(?:\^(?P<exp>\d+))?$")

_KINDS = {
    "bivar": BivarPoly,
    "quad": QuadHomPoly,
    "herm": HermPoly,
}


def _parse_coef(text: str, herm: bool):
    text = text.strip()
    if text.startswith("("):
        if not herm:
            raise ParseError(f"complex coefficient {text!r} in a real polynomial")
        re_s, im_s = text[1:-1].split(",")
        return GaussQ(as_fraction(re_s), as_fraction(im_s))
    return as_fraction(text)


def parse_poly(text, kind: str = "bivar") -> SparsePoly:
    """Parse the monomial-per-entry text format.

    Entries are separated by newlines or ``;``; each entry reads
    ``coeff * v1^a v2^b ...`` with ``coeff`` either ``num/den`` (or an
    integer) or ``(re,im)`` for Hermitian polynomials.  ``text`` may also be
    a list of entry strings.
    """
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ParseError(f"unknown polynomial kind {kind!r}") from None
    names = cls.var_names
    if isinstance(text, str):
        entries = [e for chunk in text.splitlines() for e in chunk.split(";")]
    else:
        entries = list(text)
    coeffs: Dict[Monomial, object] = {}
    for raw in entries:
        entry = raw.split("#", 1)[0].strip()
        if not entry:
            continue
        m = _ENTRY_RE.match(entry)
        if m is None:
            raise ParseError(f"cannot parse monomial entry {raw!r}")
        coef = _parse_coef(m.group("coef"), cls is HermPoly)
        exps = [0] * len(names)
        mono = (m.group("mono") or "").replace("*", " ").split()
        for factor in mono:
            fm = _FACTOR_RE.match(factor)
            if fm is None or fm.group("name") not in names:
                raise ParseError(f"unknown factor {factor!r} in {raw!r}")
            exps[names.index(fm.group("name"))] += int(fm.group("exp") or 1)
        key = tuple(exps)
        prev = coeffs.get(key)
        coeffs[key] = coef if prev is None else prev + coef
    return cls(coeffs)


def format_poly(q: SparsePoly) -> str:
    return q.to_text()
