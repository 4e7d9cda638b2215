"""Command line: ``posicert certify|verify|opconst|harness|pseudospec``.

Exit codes: 0 success, 1 verification or trial failure, 2 parse error,
3 budget exceeded, 4 failed precondition (for example a polynomial that is
not strictly positive on S).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

from . import certio
from .certgen import DEFAULT_N_CAP, DEFAULT_TERM_CAP, MODES, generate_certificate
from .certverify import commutator_constant, report_to_text, review_constant, verify_certificate
from .errors import BudgetExceeded, MissingCertificate, ParseError, PosicertError, SelfVerificationFailed
from .bounds import DEFAULT_EVAL_CAP
from .polyalg import HermPoly, as_fraction, format_fraction, herm_to_real, parse_poly, real_to_herm
from .region import Region, build_region, normalize_constraints, parse_holes

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_BUDGET, EXIT_PRECONDITION = 0, 1, 2, 3, 4


@dataclass
class RunConfig:
    subcommand: str
    inputs: List[str] = field(default_factory=list)
    mode: str = "search"
    term_cap: int = DEFAULT_TERM_CAP
    eval_cap: int = DEFAULT_EVAL_CAP
    n_cap: int = DEFAULT_N_CAP
    seed: int = 0
    gap: Optional[Fraction] = None
    out: Optional[str] = None
    kind: str = "bivar"

    def validate(self):
        for name in ("term_cap", "eval_cap", "n_cap"):
            if getattr(self, name) <= 0:
                raise ParseError(f"--{name.replace('_', '-')} must be positive")
        if self.out is not None and self.out in self.inputs:
            raise ParseError("--out must differ from the input paths")


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def read_region(path: Optional[str]) -> Region:
    """A hole file, or the literal ``disk`` (also an empty file) for the unit disk."""
    if path is None or path == "disk":
        return Region()
    text = _read(path)
    if text.strip() in ("", "disk"):
        return Region()
    return normalize_constraints(build_region(parse_holes(text)))


def read_target(path: str, kind: str):
    """Real polynomial from a file; Hermitian input (``kind="herm"``) is realified."""
    text = _read(path)
    if kind == "herm":
        return herm_to_real(parse_poly(text, "herm"))
    return parse_poly(text)


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_certify(cfg: RunConfig) -> int:
    if len(cfg.inputs) not in (1, 2):
        raise ParseError("certify takes a polynomial file and an optional region file")
    p = read_target(cfg.inputs[0], cfg.kind)
    region = read_region(cfg.inputs[1] if len(cfg.inputs) > 1 else None)
    cert = generate_certificate(
        p, region, cfg.mode, gap=cfg.gap, term_cap=cfg.term_cap, eval_cap=cfg.eval_cap, n_cap=cfg.n_cap
    )
    _emit(certio.dumps(cert), cfg.out)
    params = ", ".join(f"{k}={format_fraction(v) if isinstance(v, Fraction) else v}" for k, v in cert.params.items() if k in ("c", "k", "N", "d_hat"))
    print(f"certificate: {cert.term_count} terms ({params})", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    if len(cfg.inputs) not in (1, 2):
        raise ParseError("verify takes a certificate file and an optional polynomial file")
    cert = certio.load(cfg.inputs[0])
    p = read_target(cfg.inputs[1], cfg.kind) if len(cfg.inputs) > 1 else None
    report = verify_certificate(cert, p)
    _emit(report_to_text(report), cfg.out)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_opconst(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 1:
        raise ParseError("opconst takes one certificate file")
    cert = certio.load(cfg.inputs[0])
    report = verify_certificate(cert)
    if not report.ok:
        print("certificate does not verify; constants withheld", file=sys.stderr)
        return EXIT_FAIL
    rev = review_constant(cert)
    h = real_to_herm(cert.target)
    lines = [
        f"review_constant: {format_fraction(rev)}  (~{float(rev):.6g})",
        f"terms: {cert.term_count}",
        f"target_self_commutator_constant: {format_fraction(commutator_constant(h, h))}",
    ]
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


def _load_json(path: str) -> dict:
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path} must hold a JSON object")
    return data


def _json_region(data: dict) -> Region:
    holes = data.get("holes", [])
    if not holes:
        return Region()
    return normalize_constraints(build_region(parse_holes("\n".join(holes))))


def _format_reports(reports, fmt: str) -> str:
    from . import matharness as mh

    if fmt == "json":
        return mh.reports_to_json(reports)
    if fmt == "csv":
        return mh.reports_to_csv(reports)
    return mh.reports_to_table(reports)


def cmd_harness(cfg: RunConfig, fmt: str) -> int:
    """Spec file keys: poly (Hermitian entries), eps, holes, n, deltas, count, kind, rho, seed."""
    from . import matharness as mh

    if len(cfg.inputs) != 1:
        raise ParseError("harness takes one spec file")
    spec = _load_json(cfg.inputs[0])
    try:
        if spec.get("kind") == "remark-r32":
            reports = [mh.counterexample_r32(float(spec.get("delta", 1e-4)), float(spec.get("eps", 0.1)))]
        else:
            p = parse_poly(spec["poly"], "herm")
            eps = as_fraction(spec.get("eps", "1/10"))
            region = _json_region(spec)
            consts = mh.norm_constants(
                p, region, eps, gap=cfg.gap or Fraction(1, 100), mode=cfg.mode,
                term_cap=cfg.term_cap, eval_cap=cfg.eval_cap, n_cap=cfg.n_cap,
            )
            reports = []
            seed = int(spec.get("seed", cfg.seed))
            for delta in spec.get("deltas", [1e-2, 1e-3, 1e-4]):
                for s, a in mh.ensemble(
                    int(spec.get("n", 50)), float(delta), int(spec.get("count", 10)), region,
                    spec.get("kind", "normal-plus-upper-triangular"), seed, float(spec.get("rho", 0.05)),
                ):
                    reports.append(mh.check_norm_bound(p, a, region, eps, consts, s))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PosicertError):
            raise
        raise ParseError(f"bad harness spec: {exc}") from exc
    _emit(_format_reports(reports, fmt), cfg.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_pseudospec(cfg: RunConfig, fmt: str) -> int:
    """Query keys: poly, holes, kappa, eps, gamma (optional), grid ("zsquare-contour" or [[re, im], ...]),
    count, n, delta, ensemble, scan (resolution, 0 to skip)."""
    from . import matharness as mh

    if len(cfg.inputs) != 1:
        raise ParseError("pseudospec takes one query file")
    q = _load_json(cfg.inputs[0])
    try:
        p = parse_poly(q["poly"], "herm")
        region = _json_region(q)
        kappa = as_fraction(q["kappa"])
        eps = as_fraction(q["eps"])
        gamma = as_fraction(q["gamma"]) if "gamma" in q else mh.default_gamma(kappa, eps)
        grid = q.get("grid", "zsquare-contour")
        if grid == "zsquare-contour":
            if p != HermPoly.z() * HermPoly.z() or region.holes:
                raise MissingCertificate("the closed-form contour certificates cover p = z^2 on the disk only")
            mus, consts = mh.zsquare_contour_constants(kappa, gamma, int(q.get("count", 32)))
        else:
            pts = [(as_fraction(re), as_fraction(im)) for re, im in grid]
            consts = mh.contour_constants(p, region, kappa, gamma, pts, mode=cfg.mode, term_cap=cfg.term_cap,
                                          eval_cap=cfg.eval_cap, n_cap=cfg.n_cap)
            mus = [complex(float(re), float(im)) for re, im in pts]
        query = mh.PseudospecQuery(p, region, kappa, eps, tuple(mus), gamma)
        ens = mh.ensemble(int(q.get("n", 50)), float(q.get("delta", 1e-4)), int(q.get("ensemble", 10)),
                          region, seed=int(q.get("seed", cfg.seed)))
        resolution = int(q.get("scan", 200))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PosicertError):
            raise
        raise ParseError(f"bad pseudospectrum query: {exc}") from exc
    cprime = max(c.cprime for c in consts.values())
    image = mh.image_sample(p, region) if resolution else None
    reports = []
    for s, a in ens:
        reports.extend(mh.pseudospectrum_check(query, a, consts, s))
        if resolution:
            r = mh.pseudospectrum_scan(p, a, region, kappa, eps, cprime, resolution, image)
            r.spec = s
            reports.append(r)
    _emit(_format_reports(reports, fmt), cfg.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="posicert", description="Exact positivity certificates on a disk with holes.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--mode", choices=MODES, default="search")
        p.add_argument("--term-cap", type=int, default=DEFAULT_TERM_CAP)
        p.add_argument("--eval-cap", type=int, default=DEFAULT_EVAL_CAP)
        p.add_argument("--n-cap", type=int, default=DEFAULT_N_CAP)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--gap", type=str, default=None, help="bound tolerance as num/den")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--kind", choices=("bivar", "herm"), default="bivar",
                       help="polynomial file in x1, x2 (bivar) or in z, zbar (herm)")

    p = sub.add_parser("certify", help="polynomial [+ region] -> certificate")
    p.add_argument("inputs", nargs="+")
    common(p)
    p = sub.add_parser("verify", help="certificate [+ polynomial] -> report")
    p.add_argument("inputs", nargs="+")
    common(p)
    p = sub.add_parser("opconst", help="certificate -> operator constants")
    p.add_argument("inputs", nargs="+")
    common(p)
    for name, helptext in (("harness", "spec file -> norm-bound trials"), ("pseudospec", "query file -> resolvent report")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("inputs", nargs="+")
        p.add_argument("--format", choices=("table", "json", "csv"), default="table")
        common(p)
    return ap


def run(cfg: RunConfig, fmt: str = "table") -> int:
    cfg.validate()
    if cfg.subcommand == "certify":
        return cmd_certify(cfg)
    if cfg.subcommand == "verify":
        return cmd_verify(cfg)
    if cfg.subcommand == "opconst":
        return cmd_opconst(cfg)
    if cfg.subcommand == "harness":
        return cmd_harness(cfg, fmt)
    if cfg.subcommand == "pseudospec":
        return cmd_pseudospec(cfg, fmt)
    raise ParseError(f"unknown subcommand {cfg.subcommand!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            args.subcommand, list(args.inputs), args.mode, args.term_cap, args.eval_cap, args.n_cap,
            args.seed, as_fraction(args.gap) if args.gap else None, args.out, args.kind,
        )
        return run(cfg, getattr(args, "format", "table"))
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceeded as exc:
        print(f"budget exceeded ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SelfVerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except PosicertError as exc:
        print(f"precondition failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
