"""Map files, fixtures and deterministic, atomic JSON/CSV output."""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import io
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .algebra import HenonMap, MapError, make_map

FIXTURES = ("H1", "H2", "H3")
TOOL = "henondim"


def parse_map(doc: Any) -> HenonMap:
    """Build a map from the ``{"factors": [{"coeffs": ..., "a": ...}]}`` document."""
    if not isinstance(doc, dict) or "factors" not in doc:
        raise MapError('map document needs a "factors" array')
    factors = doc["factors"]
    if not isinstance(factors, list) or not factors:
        raise MapError('"factors" must be a non-empty array')
    for i, f in enumerate(factors):
        if not isinstance(f, dict) or "coeffs" not in f or "a" not in f:
            raise MapError(f'factor {i}: needs "coeffs" and "a"')
    return make_map(factors)


def load_map(path: str | os.PathLike) -> HenonMap:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MapError(f"cannot read map file {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapError(f"map file {path} is not valid JSON: {exc}") from exc
    return parse_map(doc)


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return resources.files("henondim.data").joinpath(f"{name}.json").read_text()


def load_fixture(name: str) -> HenonMap:
    return parse_map(json.loads(fixture_text(name)))


def resolve_map(source: str) -> HenonMap:
    """A path to a map file, or the name of a bundled fixture."""
    if source in FIXTURES and not Path(source).exists():
        return load_fixture(source)
    return load_map(source)


# -- canonical JSON ---------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    """Plain JSON data: complex numbers become [re, im], non-finite floats null."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, str) or obj is None:
        return obj
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _digest(obj: Any) -> str:
    text = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def map_hash(g: HenonMap) -> str:
    return _digest(g.describe())


def config_hash(config: Any) -> str:
    return _digest(config)


def header(g: HenonMap, config: Any, seed: int) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "map_hash": map_hash(g),
        "config_hash": config_hash(config),
        "seed": int(seed),
    }


# -- atomic writers -----------------------------------------------------------------


def write_atomic(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path: str | os.PathLike, head: dict, body: Any) -> Path:
    return write_atomic(path, canonical_json({"header": head, **to_jsonable(body)}))


def _cell(x: Any) -> str:
    x = to_jsonable(x)
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, list):
        return json.dumps(x)
    return str(x)


def csv_text(head: dict, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    for k in sorted(head):
        buf.write(f"# {k}: {head[k]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, head: dict, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return write_atomic(path, csv_text(head, columns, rows))
