"""The unit disk with circular holes and its constraint polynomials.

``S = {x : g_i(x) >= 0}`` with ``g_0 = 1 - |x|^2`` and, for every hole
``(center, radius)``, ``g_i = s_i (|x - center|^2 - radius^2)``.  The
scales ``s_i`` are 1 until :func:`normalize_constraints` is applied.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .errors import EmptyRegion, HypothesisViolation, ParseError, RedundantHole
from .polyalg import BivarPoly, HermPoly, as_fraction, format_fraction, sqrt_lower, sqrt_upper

Point = Tuple[Fraction, Fraction]

SQRT2_UPPER = sqrt_upper(2)
CIRCLE_SAMPLES = 720
WITNESS_MAX_LEVEL = 9


@dataclass(frozen=True)
class Hole:
    center: Point
    radius: Fraction

    def __post_init__(self):
        cx, cy = self.center
        object.__setattr__(self, "center", (as_fraction(cx), as_fraction(cy)))
        object.__setattr__(self, "radius", as_fraction(self.radius))
        if self.radius <= 0:
            raise ValueError("hole radius must be positive")

    def to_text(self) -> str:
        cx, cy = self.center
        return f"({format_fraction(cx)}, {format_fraction(cy)}, {format_fraction(self.radius)})"


class Classification(NamedTuple):
    inside: bool
    margin: Fraction


@dataclass(frozen=True)
class Region:
    """Validated region; build it with :func:`build_region`."""

    holes: Tuple[Hole, ...] = ()
    scales: Tuple[Fraction, ...] = (Fraction(1),)
    c0_bound: Fraction = Fraction(1)
    witness: Point = (Fraction(0), Fraction(0))
    constraints: Tuple[BivarPoly, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if len(self.scales) != len(self.holes) + 1:
            raise ValueError("one scale per constraint is required")
        if not self.constraints:
            object.__setattr__(self, "constraints", tuple(_constraints(self.holes, self.scales)))

    @property
    def m(self) -> int:
        return len(self.holes) + 1

    @property
    def normalized(self) -> bool:
        return _scales_for(self.holes) == self.scales

    def herm_constraints(self) -> List[HermPoly]:
        """The constraints as polynomials in ``z, zbar`` (``g_i(a, a*)`` ordering)."""
        out = [HermPoly({(0, 0): 1, (1, 1): -1})]
        for hole, s in zip(self.holes, self.scales[1:]):
            lam_re, lam_im = hole.center
            lam2 = lam_re * lam_re + lam_im * lam_im
            out.append(
                HermPoly(
                    {
                        (1, 1): s,
                        (1, 0): (-s * lam_re, s * lam_im),  # -conj(lambda) z
                        (0, 1): (-s * lam_re, -s * lam_im),  # -lambda zbar
                        (0, 0): s * (lam2 - hole.radius**2),
                    }
                )
            )
        return out


def _constraints(holes: Sequence[Hole], scales: Sequence[Fraction]) -> List[BivarPoly]:
    out = [BivarPoly({(0, 0): 1, (2, 0): -1, (0, 2): -1})]
    for hole, s in zip(holes, scales[1:]):
        cx, cy = hole.center
        out.append(
            BivarPoly(
                {
                    (2, 0): s,
                    (0, 2): s,
                    (1, 0): -2 * s * cx,
                    (0, 1): -2 * s * cy,
                    (0, 0): s * (cx * cx + cy * cy - hole.radius**2),
                }
            )
        )
    return out


def _dist2(a: Point, b: Point) -> Fraction:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def constraint_values(region: Region, x: Point) -> List[Fraction]:
    x = (as_fraction(x[0]), as_fraction(x[1]))
    vals = [1 - x[0] ** 2 - x[1] ** 2]
    for hole, s in zip(region.holes, region.scales[1:]):
        vals.append(s * (_dist2(x, hole.center) - hole.radius**2))
    return vals


def classify_point(region: Region, x) -> Classification:
    margin = min(constraint_values(region, x))
    return Classification(margin >= 0, margin)


def box_excluded(region: Region, lo: Point, hi: Point) -> bool:
    """True when some constraint is negative on the whole closed box ``[lo, hi]``."""
    # g_0 is largest at the point of the box nearest to the origin
    near = sum((max(Fraction(0), a, -b)) ** 2 for a, b in zip(lo, hi))
    if near > 1:
        return True
    for hole in region.holes:
        far = sum(max(abs(a - c), abs(b - c)) ** 2 for a, b, c in zip(lo, hi, hole.center))
        if far < hole.radius**2:
            return True
    return False


# ---------------------------------------------------------------------------
# hypothesis checks


def _circle_points(center: Point, radius: Fraction, count: int = CIRCLE_SAMPLES) -> List[Point]:
    """Exact rational points on the circle, roughly equally spaced in angle."""
    pts = []
    for j in range(count):
        theta = -math.pi + 2 * math.pi * (j + 0.5) / count
        t = Fraction(math.tan(theta / 2)).limit_denominator(10**6)
        den = 1 + t * t
        pts.append((center[0] + radius * (1 - t * t) / den, center[1] + radius * 2 * t / den))
    return pts


def _covered_by_others(i: int, holes: Sequence[Hole]) -> bool:
    """Conservative test that hole ``i`` lies in the union of the other holes.

    Every arc between consecutive boundary samples must sit inside a single
    other hole with a margin covering the arc length (arc <= pi/2 * chord).
    """
    hole = holes[i]
    others = [h for j, h in enumerate(holes) if j != i]
    pts = _circle_points(hole.center, hole.radius)
    for a, b in zip(pts, pts[1:] + pts[:1]):
        slack = Fraction(8, 5) * sqrt_upper(_dist2(a, b), Fraction(1, 1000))
        if not any(
            h.radius > slack and _dist2(a, h.center) <= (h.radius - slack) ** 2 for h in others
        ):
            return False
    return True


def _check_holes(holes: Sequence[Hole]) -> None:
    for i, h in enumerate(holes):
        c2 = h.center[0] ** 2 + h.center[1] ** 2
        if c2 >= (1 + h.radius) ** 2:
            raise RedundantHole(f"hole {i} {h.to_text()} does not meet the closed unit disk")
    for i, hi in enumerate(holes):
        overlapping = 0
        for j, hj in enumerate(holes):
            if i == j:
                continue
            d2 = _dist2(hi.center, hj.center)
            if hj.radius >= hi.radius and d2 <= (hj.radius - hi.radius) ** 2:
                raise HypothesisViolation(f"hole {i} {hi.to_text()} is contained in hole {j} {hj.to_text()}")
            if d2 < (hi.radius + hj.radius) ** 2:
                overlapping += 1
        if overlapping >= 2 and _covered_by_others(i, holes):
            raise HypothesisViolation(f"hole {i} {hi.to_text()} is covered by the union of other holes")


def _find_witness(region: Region) -> Optional[Point]:
    """Best-margin dyadic grid point of S at the coarsest level that has one.

    Returns None when every cell of some grid is excluded by a constraint
    (S is certified empty).  Raises EmptyRegion when the search is
    inconclusive at the finest level.
    """
    for level in range(1, WITNESS_MAX_LEVEL + 1):
        n = 1 << level
        step = Fraction(2, n)
        grid = [-1 + i * step for i in range(n + 1)]
        if all(
            box_excluded(region, (grid[i], grid[j]), (grid[i + 1], grid[j + 1]))
            for i in range(n)
            for j in range(n)
        ):
            return None
        best = None
        for a in grid:
            for b in grid:
                cls = classify_point(region, (a, b))
                if cls.inside and (best is None or cls.margin > best[0]):
                    best = (cls.margin, (a, b))
        if best is not None:
            return best[1]
    raise EmptyRegion(
        f"inconclusive: no witness on a {1 << WITNESS_MAX_LEVEL}-cell grid and no exclusion certificate"
    )


def build_region(holes: Sequence = ()) -> Region:
    """Validate the holes, certify ``S`` nonempty and compute ``c0``."""
    holes = tuple(h if isinstance(h, Hole) else Hole(h[0], h[1]) for h in holes)
    _check_holes(holes)
    raw = Region(holes, (Fraction(1),) * (len(holes) + 1))
    witness = _find_witness(raw)
    if witness is None:
        raise EmptyRegion("every grid cell violates some constraint: S is empty")
    region = replace(raw, witness=witness, constraints=raw.constraints)
    return replace(region, c0_bound=lojasiewicz_c0(region), constraints=region.constraints)


# ---------------------------------------------------------------------------
# Lojasiewicz constant


def _circles(region: Region) -> List[Tuple[Point, Fraction]]:
    return [((Fraction(0), Fraction(0)), Fraction(1))] + [(h.center, h.radius) for h in region.holes]


def max_intersection_cosine(region: Region) -> Optional[Fraction]:
    """Largest ``cos(phi)`` over pairs of crossing circles (None when no pair crosses).

    ``phi`` is the angle between the tangents, in ``(0, pi/2]``; the angle
    between the radii at a crossing point follows from the law of cosines.
    """
    circles = _circles(region)
    best = None
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            (ci, ri), (cj, rj) = circles[i], circles[j]
            d2 = _dist2(ci, cj)
            if (ri - rj) ** 2 < d2 < (ri + rj) ** 2:
                cos_phi = abs((ri * ri + rj * rj - d2) / (2 * ri * rj))
                if best is None or cos_phi > best:
                    best = cos_phi
    return best


def lojasiewicz_c0(region: Region) -> Fraction:
    """Rational ``c0`` with ``dist(x, S) <= -c0 * min_i g_i(x)`` for unscaled constraints."""
    r_min = min([Fraction(1)] + [h.radius for h in region.holes])
    cos_phi = max_intersection_cosine(region)
    if cos_phi is None:
        return 1 / r_min
    sin_half = sqrt_lower((1 - cos_phi) / 2)
    return (SQRT2_UPPER + 1) / (r_min * r_min * sin_half)


# ---------------------------------------------------------------------------
# normalization


def _scales_for(holes: Sequence[Hole]) -> Tuple[Fraction, ...]:
    scales = [Fraction(1)]
    for h in holes:
        c2 = h.center[0] ** 2 + h.center[1] ** 2
        lam = sqrt_upper(c2)  # exact whenever |center| is rational
        top = (1 + lam) ** 2 - h.radius**2
        s = 1 / top
        if lam * lam != c2:
            s = Fraction(math.floor(s * 2**24), 2**24)
        scales.append(min(Fraction(1), s))
    return tuple(scales)


def normalize_constraints(region: Region) -> Region:
    """Scale the constraints so that ``0 <= g_i <= 1`` on S."""
    scales = _scales_for(region.holes)
    raw_c0 = region.c0_bound * min(region.scales)
    return replace(region, scales=scales, c0_bound=raw_c0 / min(scales), constraints=())


# ---------------------------------------------------------------------------
# region file format

_HOLE_RE = re.compile(r"^\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")


def parse_holes(text: str) -> List[Hole]:
    holes = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HOLE_RE.match(line)
        if m is None:
            raise ParseError(f"cannot parse hole {raw!r}; expected (cx, cy, r)")
        cx, cy, r = (as_fraction(g) for g in m.groups())
        try:
            holes.append(Hole((cx, cy), r))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    return holes


def format_holes(holes: Sequence[Hole]) -> str:
    return "".join(h.to_text() + "\n" for h in holes)


def region_to_dict(region: Region) -> dict:
    return {
        "holes": [h.to_text() for h in region.holes],
        "scales": [format_fraction(s) for s in region.scales],
        "c0_bound": format_fraction(region.c0_bound),
        "witness": [format_fraction(v) for v in region.witness],
    }


def region_from_dict(data: dict) -> Region:
    holes = parse_holes("\n".join(data["holes"]))
    return Region(
        tuple(holes),
        tuple(as_fraction(s) for s in data["scales"]),
        as_fraction(data["c0_bound"]),
        tuple(as_fraction(v) for v in data["witness"]),
    )
