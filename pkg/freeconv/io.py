"""Inline measure specs, number parsing and CSV/JSON output."""
import csv
import io
import json
import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

from freeconv import measures
from freeconv.errors import FreeConvError, ParseError
from freeconv.models.measure import Measure

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")


def _numbers(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ParseError(f"expected comma-separated numbers, got {text!r}")


def _load_file(path: str):
    if not os.path.exists(path):
        raise ParseError(f"measure file {path!r} does not exist")
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"measure file {path!r} is not valid JSON: {exc}")


def parse_spec(text: str) -> Measure:
    """Build a measure from an inline spec.

    Accepted forms: ``bernoulli:XI``, ``pointmass:A``, ``semicircle:C,V``,
    ``twopoint:ZETA,THETA``, ``uniform:X1,X2,...``, ``empirical:X1,X2,...``,
    ``atomic:X1/W1,X2/W2,...`` and ``atomic:@file.json`` (any JSON measure
    document, or a bare list of [location, weight] pairs).
    """
    kind, _, body = text.strip().partition(":")
    kind = kind.lower().replace("_", "").replace("-", "")
    try:
        if kind == "bernoulli":
            (xi,) = _numbers(body)
            return measures.bernoulli(xi)
        if kind == "pointmass":
            (a,) = _numbers(body)
            return measures.point_mass(a)
        if kind == "semicircle":
            return measures.semicircle(*_numbers(body))
        if kind == "twopoint":
            zeta, theta = _numbers(body)
            return measures.two_point(zeta, theta)
        if kind == "uniform":
            values = _numbers(body)
            return measures.atomic([(x, 1.0) for x in values], normalize=True)
        if kind == "empirical":
            return measures.empirical(_numbers(body))
        if kind == "atomic":
            if body.startswith("@"):
                data = _load_file(body[1:])
                if isinstance(data, list):
                    return measures.atomic(data)
                return measures.from_dict(data)
            pairs = []
            for item in body.split(","):
                location, _, weight = item.partition("/")
                pairs.append((float(location), float(weight)))
            return measures.atomic(pairs)
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, FreeConvError):
            raise
        raise ParseError(f"cannot parse measure spec {text!r}: {exc}")
    raise ParseError(f"unknown measure kind in {text!r}")


def parse_complex(text: str) -> complex:
    """Parse '1+1e-9i', '0+1i', '2.5' or '3j'."""
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError:
        raise ParseError(f"cannot parse complex number {text!r}")


def parse_range(text: str) -> Tuple[float, float]:
    values = _numbers(text)
    if len(values) != 2 or not values[0] < values[1]:
        raise ParseError(f"expected a range LO,HI with LO < HI, got {text!r}")
    return values[0], values[1]


def parse_floats(text: str) -> List[float]:
    values = _numbers(text)
    if not values:
        raise ParseError(f"expected at least one number, got {text!r}")
    return values


def parse_complex_list(text: str) -> List[complex]:
    return [parse_complex(part) for part in text.split(",") if part.strip()]


def _plain(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item"):
        return value.item()
    return value


def render(rows: Sequence[Dict], fmt: str) -> str:
    """CSV with a header row, or a JSON list; floats are written with repr precision."""
    if fmt not in FORMATS:
        raise ParseError(f"format must be one of {FORMATS}, got {fmt!r}")
    rows = [{key: _plain(value) for key, value in row.items()} for row in rows]
    if fmt == "json":
        return json.dumps(rows, indent=2)

    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.items()})
    return buffer.getvalue()


def emit(text: str, output: Optional[str] = None):
    if output is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    with open(output, "w") as f:
        f.write(text)
    logger.info("wrote %s", output)
