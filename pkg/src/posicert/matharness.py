"""Numerical checks of the operator inequalities on almost normal matrices.

Matrices are dense numpy arrays; norms are largest singular values and
resolvent norms are inverse smallest singular values.  Every comparison
allows ``TOL`` for floating-point rounding.  The constants entering the
bounds come from exact certificates (``review_constant`` and
``commutator_constant``), so a failed trial means either a wrong
certificate or a wrong inequality, never a tuned constant.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import certified_max_abs
from .certgen import Certificate, CertTerm, generate_certificate
from .certverify import commutator_constant, review_constant, verify_certificate
from .errors import (
    DeltaTooLarge,
    GammaTooLarge,
    InfeasibleSpec,
    MissingCertificate,
    ResolventConditionFailed,
    SelfVerificationFailed,
    Singular,
)
from .polyalg import BivarPoly, GaussQ, HermPoly, herm_to_real, modulus_squared
from .region import Region

TOL = 1e-10
KINDS = ("diagonal-normal", "remark-r32", "shifted-weighted", "normal-plus-upper-triangular")
MAX_N = 256


@dataclass(frozen=True)
class AlmostNormalSpec:
    n: int
    kind: str
    delta: float
    seed: int = 0
    region: Optional[Region] = None  # eigenvalues are drawn inside it
    rho: float = 0.05  # margin kept from the boundary of S


@dataclass
class TrialReport:
    quantity: str
    measured: float
    bound: float
    passed: bool
    margin: float
    norm_a: float = float("nan")
    delta: float = float("nan")
    spec: Optional[AlmostNormalSpec] = None
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {
            "quantity": self.quantity,
            "measured": self.measured,
            "bound": self.bound,
            "margin": self.margin,
            "passed": self.passed,
            "norm_a": self.norm_a,
            "delta": self.delta,
        }
        if self.spec is not None:
            out.update(kind=self.spec.kind, n=self.spec.n, target_delta=self.spec.delta, seed=self.spec.seed)
        return out


def _report(quantity, measured, bound, a=None, spec=None, **details) -> TrialReport:
    measured = float(measured)
    bound = float(bound)
    norm_a = op_norm(a) if a is not None else float("nan")
    delta = self_commutator_norm(a) if a is not None else float("nan")
    return TrialReport(
        quantity, measured, bound, measured <= bound + TOL, bound - measured, norm_a, delta, spec, details
    )


# ---------------------------------------------------------------------------
# measurements


def op_norm(x) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def self_commutator_norm(a) -> float:
    ah = a.conj().T
    return op_norm(a @ ah - ah @ a)


def smallest_singular_value(x) -> float:
    return float(np.linalg.svd(x, compute_uv=False)[-1])


def resolvent_radius(a, lam) -> float:
    """``1 / ||(a - lam)^-1||``, the smallest singular value of ``a - lam``."""
    a = np.asarray(a, dtype=complex)
    s = smallest_singular_value(a - lam * np.eye(a.shape[0]))
    if s <= 1e-14 * max(1.0, op_norm(a), abs(lam)):
        raise Singular(f"{lam} is (numerically) an eigenvalue")
    return s


def _complex(v) -> complex:
    v = GaussQ.coerce(v)
    return complex(float(v.re), float(v.im))


def apply_poly(p: HermPoly, a):
    """``sum p_kl a^k (a*)^l``, powers of ``a`` to the left."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    items = [(k, l, _complex(v)) for (k, l), v in p.items()]
    out = np.zeros((n, n), dtype=complex)
    if not items:
        return out
    kmax = max(k for k, _, _ in items)
    lmax = max(l for _, l, _ in items)
    apow = [np.eye(n, dtype=complex)]
    for _ in range(kmax):
        apow.append(apow[-1] @ a)
    ah = a.conj().T
    hpow = [np.eye(n, dtype=complex)]
    for _ in range(lmax):
        hpow.append(hpow[-1] @ ah)
    for k, l, c in items:
        out += c * (apow[k] @ hpow[l])
    return out


# ---------------------------------------------------------------------------
# generators


def _inside(region: Optional[Region], z: complex, rho: float) -> bool:
    if abs(z) > 1 - rho:
        return False
    if region is None:
        return True
    for h in region.holes:
        c = complex(float(h.center[0]), float(h.center[1]))
        if abs(z - c) < float(h.radius) + rho:
            return False
    return True


def _sample_spectrum(rng, n: int, region: Optional[Region], rho: float):
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 10**6:
            raise InfeasibleSpec("could not place eigenvalues inside S with the requested margin")
        r = math.sqrt(rng.random()) * (1 - rho)  # uniform on the disk
        t = 2 * math.pi * rng.random()
        z = r * complex(math.cos(t), math.sin(t))
        if _inside(region, z, rho):
            out.append(z)
    return np.array(out)


def _admissible(a, region: Optional[Region]) -> bool:
    if op_norm(a) > 1 + TOL:
        return False
    if region is None:
        return True
    for h in region.holes:
        lam = complex(float(h.center[0]), float(h.center[1]))
        if smallest_singular_value(a - lam * np.eye(a.shape[0])) < float(h.radius) - TOL:
            return False
    return True


def _tune_perturbation(d, u, delta: float):
    """Scale ``t`` so that ``||[D + tU, (D + tU)*]||`` lands in ``(delta/2, delta]``."""
    D = np.diag(d)

    def build(t):
        a = D + t * u
        return a / max(1.0, op_norm(a))

    def f(t):
        return self_commutator_norm(build(t))

    lo, hi = 0.0, None
    t = delta
    for _ in range(200):
        val = f(t)
        if delta / 2 < val <= delta:
            return build(t)
        if val > delta:
            hi = t
        else:
            lo = t
        if hi is None:
            # nearly linear for small t, so aim for the middle of the window
            t = t * 0.75 * delta / val if val > 0 else 2 * t
        else:
            t = 0.5 * (lo + hi)
        if t > 1e6:
            break
    raise InfeasibleSpec(f"commutator norm cannot be tuned into ({delta / 2}, {delta}]")


def gen_almost_normal(spec: AlmostNormalSpec):
    """A matrix with ``||a|| <= 1`` and ``||[a, a*]|| <= delta``; deterministic in the seed."""
    if spec.kind not in KINDS:
        raise InfeasibleSpec(f"unknown kind {spec.kind!r}")
    if spec.n < 1 or spec.delta < 0:
        raise InfeasibleSpec("need n >= 1 and delta >= 0")
    if spec.n > MAX_N:
        raise InfeasibleSpec(f"n is capped at {MAX_N}")
    n, delta = spec.n, spec.delta
    if spec.kind == "remark-r32":
        if delta > 1:
            raise InfeasibleSpec("the 2x2 example needs delta <= 1 to stay in the unit ball")
        return np.array([[0, math.sqrt(delta)], [0, 0]], dtype=complex)
    if spec.kind == "shifted-weighted":
        # non-cyclic shift; neighbouring weights differ by at most delta/2
        w = np.array([min(1.0, delta / 2 * min(k + 1, n - 1 - k)) for k in range(n - 1)])
        a = np.zeros((n, n), dtype=complex)
        for k in range(n - 1):
            a[k + 1, k] = w[k]
        return a
    rng = np.random.default_rng(spec.seed)
    for _attempt in range(50):
        d = _sample_spectrum(rng, n, spec.region, spec.rho)
        if spec.kind == "diagonal-normal" or delta == 0:
            return np.diag(d)
        if n == 1:
            raise InfeasibleSpec("a 1x1 matrix is normal; delta > 0 cannot be met")
        u = np.triu(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), 1)
        u /= op_norm(u)
        a = _tune_perturbation(d, u, delta)
        if _admissible(a, spec.region):
            return a
    raise InfeasibleSpec("could not satisfy the resolvent conditions of the holes")


def ensemble(n: int, delta: float, count: int, region: Optional[Region] = None, kind="normal-plus-upper-triangular", seed: int = 0, rho: float = 0.05):
    """``count`` specs with consecutive seeds and their matrices."""
    out = []
    for i in range(count):
        spec = AlmostNormalSpec(n, kind, delta, seed + i, region, rho)
        out.append((spec, gen_almost_normal(spec)))
    return out


# ---------------------------------------------------------------------------
# certificate-derived constants


@dataclass(frozen=True)
class NormConstants:
    """Data of the bound ``||p(a, a*)||^2 <= P^2 + eps P + (review + regroup) delta``."""

    pmax: Fraction
    eps: Fraction
    review: Fraction
    regroup: Fraction
    certificate: Optional[Certificate] = None

    @property
    def c2(self) -> Fraction:
        return self.review + self.regroup

    def bound(self, delta: float) -> float:
        P = float(self.pmax)
        return math.sqrt(P * P + float(self.eps) * P + float(self.c2) * delta)


def norm_surrogate(p: HermPoly, pmax, eps) -> BivarPoly:
    """``P^2 + eps P - |p|^2`` as a real polynomial."""
    return herm_to_real(HermPoly.constant(pmax * pmax + eps * pmax) - modulus_squared(p))


def norm_constants(p: HermPoly, region: Region, eps, pmax=None, gap=Fraction(1, 100), **kwargs) -> NormConstants:
    """Certify ``P^2 + eps P - |p|^2`` on S and collect the constants."""
    eps = Fraction(eps)
    if pmax is None:
        pmax = certified_max_abs(p, region, gap).value
    q = norm_surrogate(p, pmax, eps)
    cert = generate_certificate(q, region, **kwargs)
    return NormConstants(pmax, eps, review_constant(cert), commutator_constant(p.conj(), p), cert)


def _check_region_conditions(a, region: Optional[Region]):
    if op_norm(a) > 1 + TOL:
        raise ResolventConditionFailed(f"||a|| = {op_norm(a)} exceeds 1")
    if region is None:
        return
    for h in region.holes:
        lam = complex(float(h.center[0]), float(h.center[1]))
        r = smallest_singular_value(np.asarray(a, dtype=complex) - lam * np.eye(len(a)))
        if r < float(h.radius) - TOL:
            raise ResolventConditionFailed(f"smallest singular value of a - {lam} is {r} < {float(h.radius)}")


def check_norm_bound(p: HermPoly, a, region: Optional[Region], eps, constants: Optional[NormConstants] = None, spec=None) -> TrialReport:
    """``||p(a, a*)|| <= sqrt(P^2 + eps P + C'' delta)``."""
    if constants is None:
        raise MissingCertificate("norm constants (a certificate of P^2 + eps P - |p|^2) are required")
    if constants.eps != Fraction(eps):
        raise MissingCertificate(f"constants were certified for eps = {constants.eps}, not {eps}")
    _check_region_conditions(a, region)
    delta = self_commutator_norm(a)
    measured = op_norm(apply_poly(p, a))
    return _report(
        "norm", measured, constants.bound(delta), a, spec,
        pmax=float(constants.pmax), c2=float(constants.c2), excess=max(0.0, measured - float(constants.pmax)),
    )


def review_check(cert: Certificate, a, constant=None, spec=None) -> TrialReport:
    """Smallest eigenvalue of ``q(a, a*)`` against ``-C delta``; reported as ``-lambda_min <= C delta``."""
    from .polyalg import real_to_herm

    if constant is None:
        constant = review_constant(cert)
    _check_region_conditions(a, cert.region)
    qa = apply_poly(real_to_herm(cert.target), a)
    qa = (qa + qa.conj().T) / 2
    lam_min = float(np.linalg.eigvalsh(qa)[0])
    delta = self_commutator_norm(a)
    return _report("review", -lam_min, float(constant) * delta, a, spec, lambda_min=lam_min, constant=float(constant))


def delta_regression(deltas: Sequence[float], excesses: Sequence[float]) -> Tuple[float, float]:
    """Least-squares ``excess ~ slope * delta + intercept``."""
    x = np.asarray(deltas, dtype=float)
    y = np.asarray(excesses, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(intercept)


def appr_mult_check(p: HermPoly, q: HermPoly, a, spec=None) -> TrialReport:
    """``||p(a)q(a) - (pq)(a)|| <= C(p, q) delta``."""
    defect = op_norm(apply_poly(p, a) @ apply_poly(q, a) - apply_poly(p * q, a))
    c = commutator_constant(p, q)
    return _report("appr_mult", defect, float(c) * self_commutator_norm(a), a, spec, constant=float(c))


# ---------------------------------------------------------------------------
# structure of p(a, a*)


def imaginary_part(p: HermPoly) -> HermPoly:
    """``(p - conj p) / 2i``, a Hermitian polynomial."""
    return (p - p.conj()) * GaussQ(0, Fraction(-1, 2))


def defect_constants(p: HermPoly, region: Region, eps, gap=Fraction(1, 100), parts=("im", "uni"), **kwargs) -> Dict[str, Optional[NormConstants]]:
    """Norm constants for ``Im p`` and for ``|p|^2 - 1`` (None when the polynomial vanishes)."""
    polys = {"im": imaginary_part(p), "uni": modulus_squared(p) - HermPoly.constant(1)}
    out: Dict[str, Optional[NormConstants]] = {}
    for name in parts:
        h = polys[name]
        out[name] = None if h.is_zero() else norm_constants(h, region, eps, gap=gap, **kwargs)
    return out


def structure_defects(p: HermPoly, a, region: Optional[Region], eps, constants=None, spec=None) -> List[TrialReport]:
    """Self-adjointness and unitarity defects of ``p(a, a*)``.

    Returns reports for ``||Im p(a)||``, ``||p*p - 1||``, ``||pp* - 1||`` and,
    when ``gamma < 1``, for the distance to the unitary polar factor.  With
    ``gamma >= 1`` the last report is a failure flagged ``gamma_too_large``.
    """
    if constants is None:
        raise MissingCertificate("defect constants are required (see defect_constants)")
    _check_region_conditions(a, region)
    delta = self_commutator_norm(a)
    pa = apply_poly(p, a)
    reports = []
    if "im" in constants:
        im_c = constants["im"]
        im_measured = op_norm((pa - pa.conj().T) / 2j)
        im_bound = 0.0 if im_c is None else im_c.bound(delta)
        reports.append(_report("im_part", im_measured, im_bound, a, spec))
    if "uni" not in constants:
        return reports

    uni_c = constants["uni"]
    h_bound = 0.0 if uni_c is None else uni_c.bound(delta)
    pc = p.conj()
    g_left = h_bound + float(commutator_constant(pc, p)) * delta
    g_right = h_bound + float(commutator_constant(p, pc)) * delta
    eye = np.eye(pa.shape[0])
    ph = pa.conj().T
    reports.append(_report("p*p-1", op_norm(ph @ pa - eye), g_left, a, spec))
    reports.append(_report("pp*-1", op_norm(pa @ ph - eye), g_right, a, spec))
    gamma = max(g_left, g_right)
    if gamma >= 1:
        r = _report("unitary_distance", float("nan"), float("nan"), a, spec, gamma=gamma, gamma_too_large=True)
        r.passed = False
        reports.append(r)
        return reports
    w, v = np.linalg.eigh(ph @ pa)
    if w[0] <= 0:
        raise GammaTooLarge(f"p(a)*p(a) is singular although gamma = {gamma} < 1")
    u = pa @ (v * (1 / np.sqrt(w))) @ v.conj().T
    dist_bound = math.sqrt(1 + gamma) * (1 / math.sqrt(1 - gamma) - 1)
    r = _report("unitary_distance", op_norm(pa - u), dist_bound, a, spec, gamma=gamma)
    uu = op_norm(u.conj().T @ u - eye)
    r.details["u*u-1"] = uu
    r.passed = r.passed and uu <= 1e-10
    reports.append(r)
    return reports


def require_unitary_gamma(reports: Iterable[TrialReport]) -> None:
    for r in reports:
        if r.details.get("gamma_too_large"):
            raise GammaTooLarge(f"gamma = {r.details['gamma']} >= 1")


# ---------------------------------------------------------------------------
# the 2x2 example without a uniform constant


def r32_polynomial(eps: Fraction, J: int) -> HermPoly:
    """``(z + z^2 q) / eps`` with ``q = -zbar sum_{j<=J} (1 - z zbar)^j`` expanded.

    ``sum_{j<=J} (1 - r)^j = sum_m (-1)^m C(J+1, m+1) r^m`` (hockey stick).
    """
    eps = Fraction(eps)
    coeffs = {(1, 0): 1 / eps}
    for m in range(J + 1):
        c = math.comb(J + 1, m + 1)
        coeffs[(m + 2, m + 1)] = Fraction(c if m % 2 else -c) / eps
    return HermPoly(coeffs)


def r32_truncation(eps: float) -> int:
    """Least J with ``(1 - eps^2)^(J+1) / eps <= eps``: the error of ``q`` against ``-1/z`` on ``|z| >= eps``."""
    return max(0, math.ceil(math.log(eps * eps) / math.log(1 - eps * eps)) - 1)


def _r32_modulus(t, eps: float, J: int):
    """``|p|`` at ``|z| = t``, summing the defining series for ``q`` directly."""
    t = np.asarray(t, dtype=float)
    r = t * t
    s = np.zeros_like(t)
    term = np.ones_like(t)
    for _ in range(J + 1):
        s += term
        term = term * (1 - r)
    # p = z (1 - r s) / eps since z^2 q = -z r s
    return np.abs(t * (1 - r * s)) / eps


def counterexample_r32(delta: float, eps: float, samples: int = 20001) -> TrialReport:
    """``||p(a, a*)|| = sqrt(delta) / eps`` against the sampled ``max |p|`` on the disk."""
    if not (0 < delta < 1 and 0 < eps < 1):
        raise InfeasibleSpec("need 0 < delta < 1 and 0 < eps < 1")
    J = r32_truncation(eps)
    a = gen_almost_normal(AlmostNormalSpec(2, "remark-r32", delta))
    p = r32_polynomial(Fraction(eps).limit_denominator(10**12), J)
    measured = op_norm(apply_poly(p, a))
    # |p| depends on |z| only; sample the radius finely plus a 2-d spot check
    t = np.linspace(0.0, 1.0, samples)
    radial = _r32_modulus(t, eps, J)
    pmax = float(radial.max())
    claimed = 2 + eps * eps
    return _report(
        "r32_pmax", pmax, claimed, a, None,
        p_norm=measured, expected_p_norm=math.sqrt(delta) / eps, ratio=measured / pmax, J=J,
        degree=p.degree,
    )


# ---------------------------------------------------------------------------
# pseudospectra


@dataclass(frozen=True)
class PseudospecQuery:
    p: HermPoly
    region: Region
    kappa: Fraction
    eps: Fraction
    mus: Tuple[complex, ...]
    gamma: Fraction

    def __post_init__(self):
        if self.kappa <= 0 or self.eps <= 0 or self.gamma <= 0:
            raise ValueError("kappa, eps and gamma must be positive")


def default_gamma(kappa, eps) -> Fraction:
    """``gamma = eps kappa^3``.

    From ``(kappa^2 - x)^(-1/2) <= 1/kappa + x / kappa^3`` for
    ``0 <= x <= kappa^2 / 2``, a resolvent bound of
    ``1/kappa + eps + (C'/kappa^3) delta`` follows with ``x = gamma + C' delta``.
    """
    kappa = Fraction(kappa)
    return Fraction(eps) * kappa**3


def rational_unit(angle: float, denominator: int = 10**6) -> Tuple[Fraction, Fraction]:
    """A rational point on the unit circle close to ``exp(i angle)``."""
    # stereographic parameter t = tan(angle / 2); pick the branch away from the pole
    if math.cos(angle) < -0.5:
        re, im = rational_unit(angle - math.pi, denominator)
        return -re, -im
    t = Fraction(math.tan(angle / 2)).limit_denominator(denominator)
    d = 1 + t * t
    return (1 - t * t) / d, 2 * t / d


def zsquare_contour_certificate(mu: Fraction, kappa: Fraction, gamma: Fraction, v=(Fraction(1), Fraction(0))) -> Certificate:
    """Certificate of ``|z^2 - mu v^2|^2 - kappa^2 + gamma`` on the unit disk.

    For real ``mu >= 1 + kappa`` and ``r = x1^2 + x2^2 = 1 - g0``:
    ``|z^2 - mu|^2 - kappa^2 + gamma = g0^2 + (2mu - 2) g0 + 4mu x2^2 + (mu-1)^2 - kappa^2 + gamma``.
    The rotation ``z -> conj(v) z`` by a rational unit ``v`` moves ``mu`` to
    ``mu v^2`` and keeps g0 and every coefficient modulus.
    """
    mu, kappa, gamma = Fraction(mu), Fraction(kappa), Fraction(gamma)
    vr, vi = Fraction(v[0]), Fraction(v[1])
    if vr * vr + vi * vi != 1:
        raise ValueError("v must be a unit")
    const = (mu - 1) ** 2 - kappa**2 + gamma
    if mu < 1 or const < 0:
        raise MissingCertificate("closed form needs mu >= 1 and (mu - 1)^2 >= kappa^2 - gamma")
    region = Region()
    g0 = region.constraints[0]
    # Im(conj(v) z) = vr x2 - vi x1
    y2 = BivarPoly({(0, 1): vr, (1, 0): -vi})
    terms = [
        CertTerm(Fraction(1), g0, None),
        CertTerm(2 * mu - 2, BivarPoly.constant(1), 0),
        CertTerm(4 * mu, y2, None),
        CertTerm(const, BivarPoly.constant(1), None),
    ]
    terms = [t for t in terms if t.weight != 0]
    z = HermPoly.z()
    u2 = GaussQ(vr, vi) * GaussQ(vr, vi)
    p_mu = z * z - HermPoly.constant(u2 * mu)
    target = herm_to_real(modulus_squared(p_mu) - HermPoly.constant(kappa**2 - gamma))
    cert = Certificate(target, region, terms, "closed-form", {"mu": mu, "kappa": kappa, "gamma": gamma})
    if not verify_certificate(cert).ok:
        raise SelfVerificationFailed("closed-form contour certificate does not verify")
    return cert


def zsquare_contour(kappa, count: int = 32) -> List[Tuple[complex, Tuple[Fraction, Fraction]]]:
    """Grid on ``|mu| = 1 + kappa`` (distance kappa from the image of the disk under z^2).

    Points are ``(1 + kappa) v^2`` with ``v`` a rational unit, so each has an
    exact certificate; angles are within ``1e-6`` of uniform.
    """
    out = []
    mu0 = 1 + float(kappa)
    for j in range(count):
        v = rational_unit(math.pi * j / count)
        u = complex(float(v[0]), float(v[1])) ** 2
        out.append((mu0 * u, v))
    return out


@dataclass(frozen=True)
class ResolventConstants:
    cprime: Fraction  # review + regrouping constant of the certificate for this mu
    review: Fraction
    regroup: Fraction


def resolvent_constants(cert: Certificate, p_minus_mu: HermPoly) -> ResolventConstants:
    rev = review_constant(cert)
    reg = commutator_constant(p_minus_mu.conj(), p_minus_mu)
    return ResolventConstants(rev + reg, rev, reg)


def resolvent_surrogate(p: HermPoly, mu, kappa, gamma) -> BivarPoly:
    """``|p - mu|^2 - kappa^2 + gamma`` as a real polynomial; ``mu`` must be rational."""
    if isinstance(mu, complex):
        mu = (Fraction(mu.real), Fraction(mu.imag))
    pm = p - HermPoly.constant(GaussQ(Fraction(mu[0]), Fraction(mu[1])))
    return herm_to_real(modulus_squared(pm) - HermPoly.constant(Fraction(kappa) ** 2 - Fraction(gamma)))


def contour_constants(p: HermPoly, region: Region, kappa, gamma, mus, **kwargs) -> Dict[int, ResolventConstants]:
    """Certificates from the pipeline for every grid point (``mus`` rational pairs)."""
    out = {}
    for j, mu in enumerate(mus):
        mu = (Fraction(mu[0]), Fraction(mu[1]))
        cert = generate_certificate(resolvent_surrogate(p, mu, kappa, gamma), region, **kwargs)
        out[j] = resolvent_constants(cert, p - HermPoly.constant(GaussQ(*mu)))
    return out


def zsquare_contour_constants(kappa, gamma, count: int = 32):
    """Grid points and closed-form constants for ``p = z^2`` on the disk."""
    grid = zsquare_contour(kappa, count)
    z = HermPoly.z()
    consts = {}
    for j, (_, v) in enumerate(grid):
        cert = zsquare_contour_certificate(1 + Fraction(kappa), kappa, gamma, v)
        u = GaussQ(v[0], v[1])
        consts[j] = resolvent_constants(cert, z * z - HermPoly.constant(u * u * (1 + Fraction(kappa))))
    return [mu for mu, _ in grid], consts


def pseudospectrum_check(
    query: PseudospecQuery,
    a,
    constants: Optional[Dict[int, ResolventConstants]] = None,
    spec=None,
) -> List[TrialReport]:
    """Resolvent norms at the grid points of ``query``.

    A point with ``|mu| >= ||p(a)|| + kappa`` is settled by the Neumann
    series (bound ``1/kappa``); any other point uses the certificate
    constants ``constants[j]`` for grid index ``j`` and the bound
    ``(kappa^2 - gamma - C' delta)^(-1/2)``.  Every report also records the
    weaker ``1/kappa + eps + (C'/kappa^3) delta`` form.
    """
    _check_region_conditions(a, query.region)
    kappa = float(query.kappa)
    gamma = float(query.gamma)
    delta = self_commutator_norm(a)
    pa = apply_poly(query.p, a)
    pnorm = op_norm(pa)
    eye = np.eye(pa.shape[0])
    reports = []
    for j, mu in enumerate(query.mus):
        smin = smallest_singular_value(pa - mu * eye)
        measured = math.inf if smin == 0 else 1 / smin
        c = None if constants is None else constants.get(j)
        if abs(mu) >= pnorm + kappa:
            branch = "norm"
            bound = 1 / kappa
        else:
            branch = "certificate"
            if c is None:
                raise MissingCertificate(f"no certificate constants for grid point {j} (mu = {mu})")
        if c is not None:
            cp = float(c.cprime)
            delta0 = (kappa * kappa / 2 - gamma) / cp
            if delta >= delta0:
                raise DeltaTooLarge(f"delta = {delta} >= delta0 = {delta0} at mu = {mu}")
            cert_bound = (kappa * kappa - gamma - cp * delta) ** -0.5
            if branch == "certificate":
                bound = cert_bound
            simple = 1 / kappa + float(query.eps) + cp / kappa**3 * delta
        else:
            cert_bound = float("nan")
            simple = 1 / kappa
        r = _report("resolvent", measured, bound, a, spec, mu=mu, branch=branch,
                    certificate_bound=cert_bound, simple_bound=simple)
        # the certificate inequality is checked even where the norm branch decides
        if not math.isnan(cert_bound):
            r.passed = r.passed and measured <= cert_bound + TOL and measured <= simple + TOL
        reports.append(r)
    return reports


def image_sample(p: HermPoly, region: Optional[Region], step: float = 1 / 400):
    """Points of ``p(S)`` on a grid of S (with the outer and hole circles) and a Lipschitz slack."""
    xs = np.arange(-1.0, 1.0 + step / 2, step)
    X, Y = np.meshgrid(xs, xs)
    Z = (X + 1j * Y).ravel()
    circles = [np.exp(2j * np.pi * np.arange(4096) / 4096)]
    if region is not None:
        for h in region.holes:
            c = complex(float(h.center[0]), float(h.center[1]))
            circles.append(c + float(h.radius) * circles[0])
    Z = np.concatenate([Z] + circles)
    keep = np.abs(Z) <= 1
    if region is not None:
        for h in region.holes:
            c = complex(float(h.center[0]), float(h.center[1]))
            keep &= np.abs(Z - c) >= float(h.radius) * (1 - 1e-12)
    Z = Z[keep]
    vals = _eval_scalar(p, Z)
    # every point of S lies within step / sqrt(2) of a grid point of S or a boundary sample
    lip = sum(abs(_complex(v)) * (k + l) for (k, l), v in p.items())
    slack = lip * max(step / math.sqrt(2), 2 * math.pi / 4096)
    return vals, slack


def _eval_scalar(p: HermPoly, z):
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    zb = z.conj()
    for (k, l), v in p.items():
        out += _complex(v) * z**k * zb**l
    return out


def pseudospectrum_scan(p: HermPoly, a, region: Optional[Region], kappa, eps, cprime, resolution: int = 200, image=None) -> TrialReport:
    """Containment of ``sigma_kappa'(p(a))`` in the kappa-neighbourhood of ``p(S)``.

    ``1/kappa' = 1/kappa + eps + (C'/kappa^3) delta``.  The scan covers the
    square enclosing ``|mu| <= ||p(a)|| + kappa``; a violation is a point
    with resolvent norm above ``1/kappa'`` that is certainly at distance
    ``>= kappa`` from ``p(S)`` (sampled distance minus sampling slack).
    """
    from scipy.spatial import cKDTree

    kappa = float(kappa)
    delta = self_commutator_norm(a)
    kprime = 1 / (1 / kappa + float(eps) + float(cprime) / kappa**3 * delta)
    pa = apply_poly(p, a)
    pnorm = op_norm(pa)
    half = pnorm + kappa
    xs = np.linspace(-half, half, resolution)
    MU = (xs[None, :] + 1j * xs[:, None]).ravel()
    vals, slack = image_sample(p, region) if image is None else image
    tree = cKDTree(np.column_stack([vals.real, vals.imag]))
    dist, _ = tree.query(np.column_stack([MU.real, MU.imag]))
    outside = dist - slack >= kappa
    # sigma_min(p(a) - mu) >= |mu| - ||p(a)|| settles most points without an SVD
    need = outside & (np.abs(MU) - pnorm < kprime)
    eye = np.eye(pa.shape[0])
    violations = 0
    worst = math.inf
    idx = np.nonzero(need)[0]
    for start in range(0, len(idx), 512):
        chunk = idx[start : start + 512]
        stack = pa[None, :, :] - MU[chunk, None, None] * eye[None, :, :]
        smin = np.linalg.svd(stack, compute_uv=False)[:, -1]
        violations += int(np.sum(smin < kprime - TOL))
        worst = min(worst, float(smin.min()))
    r = _report("pseudospectrum_containment", violations, 0, a, None,
                kappa_prime=kprime, points=int(MU.size), outside=int(outside.sum()),
                svd_points=int(need.sum()), min_sigma_outside=worst)
    return r


def normal_pseudospectrum_defect(p: HermPoly, eigenvalues, mus) -> float:
    """``max |sigma_min(p(D) - mu) - dist(mu, p(spectrum))|`` for ``D = diag(eigenvalues)``."""
    d = np.asarray(eigenvalues, dtype=complex)
    pd = apply_poly(p, np.diag(d))
    img = _eval_scalar(p, d)
    eye = np.eye(len(d))
    worst = 0.0
    for mu in mus:
        s = smallest_singular_value(pd - mu * eye)
        worst = max(worst, abs(s - float(np.min(np.abs(img - mu)))))
    return worst


# ---------------------------------------------------------------------------
# export


def reports_to_table(reports: Sequence[TrialReport]) -> str:
    cols = ["quantity", "measured", "bound", "margin", "passed", "norm_a", "delta"]
    lines = ["\t".join(cols)]
    for r in reports:
        row = r.row()
        lines.append("\t".join(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def reports_to_json(reports: Sequence[TrialReport]) -> str:
    docs = []
    for r in reports:
        row = {k: _jsonable(v) for k, v in r.row().items()}
        row["details"] = {k: _jsonable(v) for k, v in r.details.items()}
        docs.append(row)
    return json.dumps(docs, indent=1, sort_keys=True) + "\n"


def reports_to_csv(reports: Sequence[TrialReport]) -> str:
    rows = [{k: _jsonable(v) for k, v in r.row().items()} for r in reports]
    keys: List[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
