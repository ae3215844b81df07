"""Field binaries (JSON header + raw float64) and CSV writers.

Binary layout::

    b"PLAPFLD1" | uint64 LE header length | UTF-8 JSON header | float64 LE values (C order)
"""

import csv
import io
import json
import os
import struct
import tempfile

import numpy as np

from .grid import ScalarField, SpaceTimeField

MAGIC = b"PLAPFLD1"
SCHEMA_VERSION = 1


def field_to_bytes(f) -> bytes:
    if isinstance(f, SpaceTimeField):
        header = {"kind": "spacetime", "dt": f.dt, "t0": f.t0, "steps": f.steps}
        shape = list(f.values.shape[1:])
    elif isinstance(f, ScalarField):
        header = {"kind": "scalar"}
        shape = list(f.shape)
    else:
        raise TypeError(f"cannot serialize {type(f).__name__}")
    header.update(
        schema_version=SCHEMA_VERSION,
        shape=shape,
        h=f.h,
        origin=list(f.origin),
        dtype="<f8",
        order="C",
    )
    head = json.dumps(header, sort_keys=True).encode()
    body = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    return MAGIC + struct.pack("<Q", len(head)) + head + body


def field_from_bytes(data: bytes):
    if data[:8] != MAGIC:
        raise ValueError("not a field binary (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode())
    values = np.frombuffer(data[16 + hlen:], dtype="<f8").astype(float)
    if header["kind"] == "spacetime":
        values = values.reshape([header["steps"] + 1] + header["shape"])
        return SpaceTimeField(values, header["h"], header["dt"], tuple(header["origin"]), header["t0"])
    return ScalarField(values.reshape(header["shape"]), header["h"], tuple(header["origin"]))


def read_field(path):
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\r\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def field_csv_text(f: ScalarField) -> str:
    """One row per node: x1..xn, value."""
    cols = [f"x{i + 1}" for i in range(f.n)] + ["value"]
    X = [x.ravel() for x in f.coords()]
    vals = f.values.ravel()
    rows = ({**{c: float(x[k]) for c, x in zip(cols, X)}, "value": float(vals[k])} for k in range(vals.size))
    return csv_text(rows, cols)


def write_artifacts(out_dir, artifacts: dict):
    """Write ``{name: bytes | str}`` into ``out_dir``; each file appears atomically."""
    os.makedirs(out_dir, exist_ok=True)
    for name, payload in artifacts.items():
        data = payload.encode() if isinstance(payload, str) else payload
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, os.path.join(out_dir, name))
