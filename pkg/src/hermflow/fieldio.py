"""Binary field snapshots and reproducible JSON/CSV artifacts.

Snapshot layout (all little-endian)::

    b"MAFL"  u32 version  u32 n  u32 res  u32 rank  rank bytes signature
    2n x f64 periods
    complex values as interleaved (re, im) f64, grid points row-major with
    index components varying fastest

Thin (broadcast) fields are expanded to the full grid on write.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .grid import TensorField, TorusGrid

MAGIC = b"MAFL"
FORMAT_VERSION = 1


class FieldFormatError(ValueError):
    pass


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def encode_field(field: TensorField) -> bytes:
    grid = field.grid
    sig = field.signature.encode("ascii")
    head = MAGIC + struct.pack("<IIII", FORMAT_VERSION, grid.n, grid.res, len(sig)) + sig
    head += struct.pack(f"<{grid.ndim}d", *grid.periods)
    vals = np.ascontiguousarray(grid.full(field.values), dtype="<c16")
    return head + vals.tobytes(order="C")


def decode_field(data: bytes) -> TensorField:
    if data[:4] != MAGIC:
        raise FieldFormatError("bad magic")
    off = 4
    version, n, res, rank = struct.unpack_from("<IIII", data, off)
    off += 16
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    sig = data[off: off + rank].decode("ascii")
    off += rank
    periods = struct.unpack_from(f"<{2 * n}d", data, off)
    off += 16 * n
    grid = TorusGrid(n, tuple(periods), res)
    shape = grid.shape + (n,) * rank
    count = int(np.prod(shape))
    if len(data) - off != 16 * count:
        raise FieldFormatError(f"payload has {len(data) - off} bytes, expected {16 * count}")
    vals = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape(shape)
    return TensorField(grid, sig, vals.astype(np.complex128))


def _atomic_write(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field(path, field: TensorField) -> None:
    _atomic_write(Path(path), encode_field(field))


def read_field(path) -> TensorField:
    return decode_field(Path(path).read_bytes())


def config_hash(config: Any) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if v != v:
            return "nan"
        if v in (float("inf"), float("-inf")):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def provenance(config: dict, seed: int | None) -> dict:
    return {"config_hash": config_hash(config), "seed": seed, "version": code_version()}


def write_json(path, body: dict, config: dict, seed: int | None, timestamp: str | None = None) -> None:
    """JSON artifact; the timestamp sits alone on the first line so that the
    remaining lines are reproducible byte for byte."""
    doc = {"provenance": provenance(config, seed), "config": config, **body}
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=1, allow_nan=False)
    head = json.dumps({"timestamp": timestamp})
    _atomic_write(Path(path), (head + "\n" + text + "\n").encode())


def read_json(path) -> dict:
    lines = Path(path).read_text().split("\n", 1)
    return json.loads(lines[1])


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: dict, seed: int | None,
              timestamp: str | None = None) -> None:
    buf = io.StringIO()
    buf.write(f"# timestamp: {timestamp}\n")
    prov = provenance(config, seed)
    buf.write(f"# config_hash: {prov['config_hash']} seed: {prov['seed']} version: {prov['version']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    _atomic_write(Path(path), buf.getvalue().encode())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def strip_timestamp(data: bytes) -> bytes:
    """Drop the first (timestamp) line of a JSON or CSV artifact."""
    return data.split(b"\n", 1)[1]
