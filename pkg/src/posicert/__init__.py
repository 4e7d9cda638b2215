"""Exact sum-of-squares certificates for polynomials positive on a disk with
circular holes, and matrix checks of the operator bounds they imply."""

from .certgen import Certificate, CertTerm, generate_certificate
from .certverify import review_constant, verify_certificate
from .errors import *  # noqa: F401,F403
from .polyalg import BivarPoly, GaussQ, HermPoly, QuadHomPoly, parse_poly
from .region import Hole, Region, build_region, normalize_constraints

__version__ = "0.1.0"
