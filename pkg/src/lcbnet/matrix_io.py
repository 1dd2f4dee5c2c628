"""Binary matrix files: a short text header followed by raw row-major float64 LE values.

    LCBMAT 1
    shape 2 10 7
    dtype <f8
    end
    <raw bytes>

Used for feature files and attention dumps.
"""
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = "LCBMAT"
VERSION = 1


def encode_matrix(array):
    array = np.ascontiguousarray(array, dtype="<f8")
    header = f"{MAGIC} {VERSION}\nshape {' '.join(str(n) for n in array.shape)}\ndtype <f8\nend\n"
    return header.encode("ascii") + array.tobytes(order="C")


def decode_matrix(blob, source="<bytes>"):
    fields, pos = {}, 0
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise DataError(f"{source}: truncated matrix header")
        line = blob[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if line == "end":
            break
        key, _, value = line.partition(" ")
        fields[key] = value
    if fields.get(MAGIC) != str(VERSION):
        raise DataError(f"{source}: not a version {VERSION} matrix file")
    if fields.get("dtype") != "<f8":
        raise DataError(f"{source}: unsupported dtype {fields.get('dtype')!r}")
    shape = tuple(int(n) for n in fields.get("shape", "").split())
    count = int(np.prod(shape)) if shape else 1
    payload = blob[pos:]
    if len(payload) != 8 * count:
        raise DataError(f"{source}: expected {8 * count} payload bytes for shape {shape}, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)


def write_matrix(path, array):
    Path(path).write_bytes(encode_matrix(array))


def read_matrix(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read matrix file {path}: {exc}") from exc
    return decode_matrix(blob, str(path))
