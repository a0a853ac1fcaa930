"""Checkpoint file format.

Layout: magic ``NFXC``, u32 format version, u64 header length, UTF-8 JSON
header, then the parameters as little-endian float32 concatenated in header
table order. The header is serialized with sorted keys and carries no
timestamps, so identical models give identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .backbones import Model, ModelSpec, build_model
from .errors import CorruptPayload, UnsupportedSpec, VersionMismatch

MAGIC = b"NFXC"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


def checkpoint_bytes(model: Model, config=None, condition_ranges=None, condition_names=None):
    params = model.named_parameters()
    header = {
        "format_version": FORMAT_VERSION,
        "model": model.spec.to_dict(),
        "seed": model.seed,
        "sample_rate": model.spec.sample_rate,
        "condition_names": list(condition_names or []),
        "condition_ranges": [list(map(float, r)) for r in (condition_ranges or [])],
        "params": [{"name": n, "shape": list(p.data.shape)} for n, p in params.items()],
        "config": config,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p.data, dtype="<f4").tobytes() for p in params.values())
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + payload


def save_checkpoint(model: Model, config=None, path=None, condition_ranges=None,
                    condition_names=None):
    """Write ``model`` (plus the config echo and condition metadata) to ``path``."""
    data = checkpoint_bytes(model, config, condition_ranges, condition_names)
    Path(path).write_bytes(data)
    return path


def read_checkpoint(path):
    """Parse a checkpoint file into ``(header, {name: float32 array})``."""
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CorruptPayload(f"{path}: file too short for a checkpoint header")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptPayload(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    start = _PREFIX.size
    if start + head_len > len(data):
        raise CorruptPayload(f"{path}: header length {head_len} exceeds file size")
    try:
        header = json.loads(data[start:start + head_len].decode("utf-8"))
        table = [(e["name"], tuple(int(v) for v in e["shape"])) for e in header["params"]]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CorruptPayload(f"{path}: unreadable header ({exc})") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: header format version {header.get('format_version')}")
    payload = data[start + head_len:]
    expected = 4 * sum(int(np.prod(s)) for _, s in table)
    if len(payload) != expected:
        raise CorruptPayload(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    params, pos = {}, 0
    for name, shape in table:
        n = int(np.prod(shape))
        params[name] = np.frombuffer(payload, dtype="<f4", count=n, offset=pos).reshape(shape).copy()
        pos += 4 * n
    return header, params


def load_checkpoint(path) -> Model:
    """Re-instantiate the model described by the header and fill in its parameters.

    The header is attached to the returned model as ``model.checkpoint``.
    """
    header, params = read_checkpoint(path)
    try:
        spec = ModelSpec.from_dict(header["model"])
        model = build_model(spec, seed=header.get("seed", 0), dtype=np.float32)
    except (KeyError, TypeError, UnsupportedSpec) as exc:
        raise CorruptPayload(f"{path}: header does not describe a valid model ({exc})") from exc
    own = model.named_parameters()
    if list(own) != list(params) or any(own[n].data.shape != params[n].shape for n in own):
        raise CorruptPayload(f"{path}: parameter table does not match the model spec")
    for name, value in params.items():
        own[name].data[...] = value
    model.checkpoint = header
    return model
