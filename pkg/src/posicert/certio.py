"""Certificate files: a JSON document with every rational written as ``num/den``.

Writing the same certificate twice gives identical bytes, and
``load(dump(c))`` reproduces the target, region, terms and parameters
exactly.
"""
from __future__ import annotations

import json
from fractions import Fraction

from .certgen import Certificate, CertTerm
from .errors import ParseError
from .polyalg import BivarPoly, as_fraction, format_fraction, parse_poly
from .region import region_from_dict, region_to_dict

FORMAT = "posicert-certificate/1"


def _param_out(v):
    if isinstance(v, Fraction):
        return format_fraction(v)
    return v


def _param_in(v):
    if isinstance(v, str) and "/" in v:
        return as_fraction(v)
    return v


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "format": FORMAT,
        "target": cert.target.to_lines(),
        "region": region_to_dict(cert.region),
        "mode": cert.mode,
        "params": {k: _param_out(v) for k, v in cert.params.items()},
        "terms": [
            {
                "weight": format_fraction(Fraction(t.weight)),
                "square": t.square.to_lines(),
                "constraint": t.constraint,
            }
            for t in cert.terms
        ],
    }


def certificate_from_dict(data: dict) -> Certificate:
    try:
        if data.get("format", FORMAT) != FORMAT:
            raise ParseError(f"unsupported certificate format {data.get('format')!r}")
        region = region_from_dict(data["region"])
        target = parse_poly(data["target"])
        terms = []
        for entry in data["terms"]:
            idx = entry.get("constraint")
            if idx is not None and not isinstance(idx, int):
                raise ParseError(f"constraint index must be an integer or null, got {idx!r}")
            terms.append(CertTerm(as_fraction(entry["weight"]), parse_poly(entry["square"]), idx))
        params = {k: _param_in(v) for k, v in data.get("params", {}).items()}
        return Certificate(target, region, terms, data.get("mode", "search"), params)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed certificate: {exc}") from exc


def dumps(cert: Certificate) -> str:
    return json.dumps(certificate_to_dict(cert), sort_keys=True, indent=1) + "\n"


def loads(text: str) -> Certificate:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"certificate is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("certificate document must be a JSON object")
    return certificate_from_dict(data)


def save(cert: Certificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cert))


def load(path) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
