"""Single-file checkpoints: text header (config echo + parameter index) then raw float64 LE data."""
from pathlib import Path

import numpy as np

from ..errors import DataError
from .config import ModelConfig
from .network import LCBNet

MAGIC = "LCBCKPT"
VERSION = 1


def save_checkpoint(model, path, meta=None):
    lines = [f"{MAGIC} {VERSION}"]
    for key, value in model.cfg.to_flat().items():
        lines.append(f"config {key} {value}")
    for key, value in (meta or {}).items():
        lines.append(f"meta {key} {value}")
    params = model.parameters()
    for p in params:
        lines.append(f"param {p.name} {' '.join(str(n) for n in p.shape)}".rstrip())
    lines.append("end")
    payload = b"".join(np.ascontiguousarray(p.data, dtype="<f8").tobytes() for p in params)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8") + payload)


def read_checkpoint(path):
    """Return ``(config, meta, {name: array})``."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    flat, meta, index, pos = {}, {}, [], 0
    first = True
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise DataError(f"{path}: truncated checkpoint header")
        line = blob[pos:nl].decode("utf-8")
        pos = nl + 1
        if first:
            if line != f"{MAGIC} {VERSION}":
                raise DataError(f"{path}: not a version {VERSION} checkpoint")
            first = False
            continue
        if line == "end":
            break
        kind, _, rest = line.partition(" ")
        if kind == "config":
            key, _, value = rest.partition(" ")
            flat[key] = value
        elif kind == "meta":
            key, _, value = rest.partition(" ")
            meta[key] = value
        elif kind == "param":
            name, *dims = rest.split(" ")
            index.append((name, tuple(int(d) for d in dims)))
        else:
            raise DataError(f"{path}: unexpected header line {line!r}")
    arrays = {}
    for name, shape in index:
        n = int(np.prod(shape)) if shape else 1
        chunk = blob[pos:pos + 8 * n]
        if len(chunk) != 8 * n:
            raise DataError(f"{path}: payload truncated at {name}")
        arrays[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes")
    return ModelConfig.from_flat(flat), meta, arrays


def load_checkpoint(path, vocab):
    cfg, meta, arrays = read_checkpoint(path)
    model = LCBNet(cfg, vocab)
    params = model.named_parameters()
    if set(params) != set(arrays):
        missing = sorted(set(params) ^ set(arrays))[:5]
        raise DataError(f"{path}: parameter set does not match the configured model (e.g. {missing})")
    for name, p in params.items():
        if p.shape != arrays[name].shape:
            raise DataError(f"{path}: {name} has shape {arrays[name].shape}, expected {p.shape}")
        p.data = arrays[name]
    return model, meta
