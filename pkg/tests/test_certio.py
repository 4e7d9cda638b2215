import json
from fractions import Fraction as F

import pytest

from posicert.certgen import Certificate, CertTerm, generate_certificate
from posicert.certio import FORMAT, certificate_to_dict, dumps, load, loads, save
from posicert.certverify import verify_certificate
from posicert.errors import ParseError
from posicert.polyalg import BivarPoly, parse_poly

from conftest import REGIONS


@pytest.fixture(scope="module")
def cert():
    return generate_certificate(parse_poly("3; -1*x1 x2"), REGIONS["two"])


def test_round_trip_bytes(cert, tmp_path):
    text = dumps(cert)
    back = loads(text)
    assert dumps(back) == text
    path = tmp_path / "c.json"
    save(cert, path)
    assert path.read_bytes() == text.encode("utf-8")
    again = load(path)
    assert again.target == cert.target
    assert again.region == cert.region
    assert [(t.weight, t.square, t.constraint) for t in again.terms] == [(t.weight, t.square, t.constraint) for t in cert.terms]
    assert again.params == cert.params
    assert verify_certificate(again).ok


def test_document_fields(cert):
    doc = json.loads(dumps(cert))
    assert doc["format"] == FORMAT
    assert set(doc) >= {"target", "region", "mode", "params", "terms"}
    assert set(doc["params"]) >= {"c", "k", "N", "pstar", "pstar_box"}
    for t in doc["terms"]:
        assert isinstance(t["weight"], str)
        assert t["constraint"] is None or isinstance(t["constraint"], int)


def test_exotic_weights_survive():
    sq = BivarPoly({(1, 0): F(1, 3), (0, 7): F(-10**30, 7)})
    terms = [CertTerm(F(10**40 + 1, 3**50), sq, 0), CertTerm(F(0), BivarPoly.constant(1))]
    c = Certificate(sq, REGIONS["one"], terms, params={"N": 3, "pstar": F(-1, 9)})
    back = loads(dumps(c))
    assert back.terms == terms
    assert back.params == {"N": 3, "pstar": F(-1, 9)}


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "[1, 2]",
        '{"format": "other/9"}',
        '{"target": "1"}',
    ],
)
def test_malformed(text):
    with pytest.raises(ParseError):
        loads(text)


def test_malformed_term(cert):
    doc = certificate_to_dict(cert)
    doc["terms"][0]["constraint"] = "g0"
    with pytest.raises(ParseError):
        loads(json.dumps(doc))
    doc = certificate_to_dict(cert)
    doc["terms"][0]["weight"] = "1/0"
    with pytest.raises(ParseError):
        loads(json.dumps(doc))
