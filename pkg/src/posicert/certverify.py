"""Independent certificate checking and the operator constants derived from it.

The identity check does not reuse the generator's polynomial products.
Squares are packed into Python integers by Kronecker substitution
(``x1 -> X^W``, ``x2 -> X``, ``X -> 2^b``), multiplied as big integers and
unpacked with signed digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

from gmpy2 import mpz

from .polyalg import BivarPoly, GaussQ, HermPoly, real_to_herm
from .region import Region

Mono = Tuple[int, int]


@dataclass(frozen=True)
class VerificationReport:
    identity_ok: bool
    residual: BivarPoly
    weights_ok: bool
    constraint_match: bool
    term_count: int
    max_square_degree: int

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.weights_ok and self.constraint_match

    def summary(self) -> str:
        res = "0" if self.residual.is_zero() else f"{len(self.residual)} nonzero coefficients"
        return (
            f"identity_ok={self.identity_ok} weights_ok={self.weights_ok} "
            f"constraint_match={self.constraint_match} terms={self.term_count} "
            f"max_square_degree={self.max_square_degree} residual={res}"
        )


# ---------------------------------------------------------------------------
# Kronecker packing


class _Packer:
    """Signed-digit packing; ``bits`` is a multiple of 8 so digits are whole bytes."""

    def __init__(self, width: int, bits: int):
        self.width = width  # x1 stride in X-exponents
        self.bits = -(-bits // 8) * 8
        self.nbytes = self.bits // 8
        self.half = 1 << (self.bits - 1)

    def _bias(self, ndigits: int) -> int:
        # sum of half * 2^(bits*i) for i < ndigits
        return int.from_bytes((self.half.to_bytes(self.nbytes, "little")) * ndigits, "little")

    def pack(self, coeffs: Iterable[Tuple[Mono, int]]):
        coeffs = list(coeffs)
        ndigits = max(a * self.width + b for (a, b), _ in coeffs) + 1
        buf = bytearray(self.half.to_bytes(self.nbytes, "little") * ndigits)
        for (a, b), v in coeffs:
            pos = (a * self.width + b) * self.nbytes
            buf[pos : pos + self.nbytes] = (v + self.half).to_bytes(self.nbytes, "little")
        return mpz(int.from_bytes(buf, "little") - self._bias(ndigits))

    def unpack(self, value) -> Dict[Mono, int]:
        value = int(value)
        if value == 0:
            return {}
        ndigits = (abs(value).bit_length() + self.bits) // self.bits + 1
        raw = (value + self._bias(ndigits)).to_bytes(ndigits * self.nbytes, "little")
        out: Dict[Mono, int] = {}
        n = self.nbytes
        for pos in range(ndigits):
            digit = int.from_bytes(raw[pos * n : (pos + 1) * n], "little") - self.half
            if digit:
                out[divmod(pos, self.width)] = digit
        return out


def _l1(coeffs) -> int:
    return sum(abs(v) for v in coeffs.values())


def _as_int_poly(p: BivarPoly) -> Tuple[Dict[Mono, int], int]:
    L = 1
    for _, v in p.items():
        L = math.lcm(L, v.denominator)
    return {m: int(v * L) for m, v in p.items()}, L


def kronecker_mul(p: BivarPoly, q: BivarPoly) -> BivarPoly:
    """Product by big-integer multiplication; used to cross-check the generator."""
    if p.is_zero() or q.is_zero():
        return BivarPoly.zero()
    pi, lp = _as_int_poly(p)
    qi, lq = _as_int_poly(q)
    width = p.degree + q.degree + 1
    bits = (_l1(pi) * _l1(qi)).bit_length() + 2
    pk = _Packer(width, bits)
    prod = pk.unpack(pk.pack(pi.items()) * pk.pack(qi.items()))
    return BivarPoly({m: Fraction(v, lp * lq) for m, v in prod.items()})


def expand_certificate(terms, region: Region) -> BivarPoly:
    """``sum w r^2 (g_i or 1)`` by packed big-integer arithmetic."""
    if not terms:
        return BivarPoly.zero()
    groups: Dict[Optional[int], list] = {}
    for t in terms:
        groups.setdefault(t.constraint, []).append(t)
    gpolys = {}
    for idx in groups:
        if idx is None:
            gpolys[idx] = ({(0, 0): 1}, 1)
        else:
            gpolys[idx] = _as_int_poly(region.constraints[idx])

    max_deg = max(t.square.degree for t in terms)
    width = 2 * max_deg + 3
    squares = []
    L = 1
    for t in terms:
        ri, lr = _as_int_poly(t.square)
        w = Fraction(t.weight) / (lr * lr)
        L = math.lcm(L, w.denominator)
        squares.append((t, ri, w))
    mag = 0
    for t, ri, w in squares:
        mag += abs(w.numerator) * (L // w.denominator) * _l1(ri) ** 2 * _l1(gpolys[t.constraint][0])
    bits = mag.bit_length() + 2
    pk = _Packer(width, bits)

    acc = {idx: mpz(0) for idx in groups}
    for t, ri, w in squares:
        packed = pk.pack(ri.items())
        acc[t.constraint] += mpz(w.numerator * (L // w.denominator)) * (packed * packed)
    total: Dict[Mono, Fraction] = {}
    for idx, value in acc.items():
        gi, lg = gpolys[idx]
        for m, v in pk.unpack(value * pk.pack(gi.items())).items():
            total[m] = total.get(m, 0) + Fraction(v, L * lg)
    return BivarPoly(total)


def verify_certificate(cert, p: Optional[BivarPoly] = None, region: Optional[Region] = None) -> VerificationReport:
    """Recompute the certificate identity exactly; never raises on a bad certificate."""
    p = cert.target if p is None else p
    region = cert.region if region is None else region
    terms = list(cert.terms)
    weights_ok = all(isinstance(t.weight, (int, Fraction)) and t.weight >= 0 for t in terms)
    constraint_match = all(
        t.constraint is None or (isinstance(t.constraint, int) and 0 <= t.constraint < region.m)
        for t in terms
    )
    if constraint_match:
        residual = expand_certificate(terms, region) - p
    else:
        residual = -p if not p.is_zero() else BivarPoly.constant(1)
    return VerificationReport(
        identity_ok=constraint_match and residual.is_zero(),
        residual=residual,
        weights_ok=weights_ok,
        constraint_match=constraint_match,
        term_count=len(terms),
        max_square_degree=max((t.square.degree for t in terms), default=0),
    )


# ---------------------------------------------------------------------------
# operator constants


def _mod_sum(p: HermPoly, weight_by: Optional[int]) -> Fraction:
    """``sum |p_kl|`` (weight_by None), ``sum k|p_kl|`` (0) or ``sum l|p_kl|`` (1), moduli rounded up."""
    total = Fraction(0)
    for mono, v in p.items():
        w = 1 if weight_by is None else mono[weight_by]
        if w:
            total += w * GaussQ.coerce(v).abs_upper()
    return total


def commutator_constant(p: HermPoly, q: HermPoly) -> Fraction:
    """Upper bound of ``sum l s |p_kl| |q_st|``, which factors as ``(sum l|p_kl|)(sum s|q_st|)``."""
    return _mod_sum(p, 1) * _mod_sum(q, 0)


def coefficient_norm(p: HermPoly) -> Fraction:
    """``sum |p_kl|``, an upper bound for ``||p(a, a*)||`` when ``||a|| <= 1``."""
    return _mod_sum(p, None)


_KRAW: Dict[Mono, List[int]] = {}
_GUARD = 32  # extra bits so rounding the square roots up costs almost nothing


def _kraw(a: int, b: int) -> List[int]:
    """Coefficients of ``(z + w)^a (z - w)^b`` on ``z^k w^(a+b-k)``, indexed by k."""
    row = _KRAW.get((a, b))
    if row is None:
        n = a + b
        row = [0] * (n + 1)
        for i in range(a + 1):
            ci = math.comb(a, i)
            for j in range(b + 1):
                # z^(i+j) from z^i w^(a-i) * z^j (-w)^(b-j)
                v = ci * math.comb(b, j)
                row[i + j] += -v if (b - j) & 1 else v
        _KRAW[(a, b)] = row
    return row


def _herm_moduli(r: Dict[Mono, int], deg: int) -> Dict[Mono, int]:
    """Integer upper bounds of ``2^(deg + _GUARD) |h_kl|`` where ``h = real_to_herm(r)``.

    ``x1^a x2^b = (z + zbar)^a (z - zbar)^b / (2^(a+b) i^b)``; real and
    imaginary parts are collected separately so every modulus is an
    integer square root rounded up.
    """
    re: Dict[Mono, int] = {}
    im: Dict[Mono, int] = {}
    for (a, b), v in r.items():
        n = a + b
        v <<= deg - n
        # 1 / i^b is 1, -i, -1, i
        sign = -1 if b & 3 in (1, 2) else 1
        target = im if b & 1 else re
        for k, kv in enumerate(_kraw(a, b)):
            if kv:
                key = (k, n - k)
                target[key] = target.get(key, 0) + sign * v * kv
    out: Dict[Mono, int] = {}
    for key in set(re) | set(im):
        x = re.get(key, 0)
        y = im.get(key, 0)
        s = (x * x + y * y) << (2 * _GUARD)
        if s:
            root = math.isqrt(s)
            out[key] = root if root * root == s else root + 1
    return out


def _weighted_sums(mods: Dict[Mono, int]) -> Tuple[int, int, int]:
    """``(sum |h|, sum k|h|, sum l|h|)`` for moduli keyed by ``(k, l)``."""
    s = sk = sl = 0
    for (k, l), v in mods.items():
        s += v
        sk += k * v
        sl += l * v
    return s, sk, sl


def _int_mul(p: Dict[Mono, int], q: Dict[Mono, int]) -> Dict[Mono, int]:
    out: Dict[Mono, int] = {}
    for (a, b), u in p.items():
        for (c, d), v in q.items():
            key = (a + c, b + d)
            out[key] = out.get(key, 0) + u * v
    return out


def review_constant(cert) -> Fraction:
    """C with ``q(a, a*) >= -C delta`` whenever every ``g_i(a, a*) >= 0``.

    A bare term ``w r^2`` costs ``w C(r, r)``; a term ``w r^2 g`` is compared
    with ``r(a) g(a) r(a)`` at cost ``w (C(r, g r) + ||r||_1 C(g, r))``.
    Moduli of the Gaussian coefficients are rounded up, so the result is an
    upper bound of the exact constant.
    """
    gh = cert.region.herm_constraints()
    gint = {}
    for idx, g in enumerate(cert.region.constraints):
        gi, lg = _as_int_poly(g)
        gint[idx] = (gi, lg, _mod_sum(gh[idx], None), _mod_sum(gh[idx], 1))
    total = Fraction(0)
    for t in cert.terms:
        if t.weight == 0 or t.square.degree == 0:
            continue
        ri, lr = _as_int_poly(t.square)
        deg = t.square.degree
        s, sk, sl = _weighted_sums(_herm_moduli(ri, deg))
        scale = Fraction(1, (lr << (deg + _GUARD)) ** 2)
        if t.constraint is None:
            total += t.weight * scale * sl * sk
        else:
            gi, lg, g1, gl = gint[t.constraint]
            grs = _weighted_sums(_herm_moduli(_int_mul(gi, ri), deg + 2))
            c_r_gr = Fraction(sl * grs[1], (lr << (deg + _GUARD)) * (lr * lg << (deg + 2 + _GUARD)))
            total += t.weight * (c_r_gr + scale * s * gl * sk)
    return total


def report_to_text(report: VerificationReport) -> str:
    lines = [
        f"identity_ok: {str(report.identity_ok).lower()}",
        f"weights_ok: {str(report.weights_ok).lower()}",
        f"constraint_match: {str(report.constraint_match).lower()}",
        f"term_count: {report.term_count}",
        f"max_square_degree: {report.max_square_degree}",
        f"residual: {report.residual.to_text()}",
    ]
    return "\n".join(lines) + "\n"
