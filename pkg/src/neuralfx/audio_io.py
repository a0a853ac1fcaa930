"""WAV I/O, the dataset manifest, segmentation and condition normalization."""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptySplit,
    LengthMismatch,
    MalformedWav,
    OutOfRange,
    SampleRateMismatch,
    SchemaError,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono float64 samples plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"invalid sample rate {self.sample_rate!r}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate


# --------------------------------------------------------------------- WAV


@dataclass(frozen=True)
class WavInfo:
    sample_rate: int
    channels: int
    bits: int
    format_code: int
    frames: int
    data_offset: int


def _parse_header(data: bytes) -> WavInfo:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(data):
                raise MalformedWav("truncated fmt chunk")
            code, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, body)
            if code == _FMT_EXTENSIBLE:
                if size < 40:
                    raise MalformedWav("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
                (code,) = struct.unpack_from("<H", data, body + 24)
            fmt = (code, channels, rate, bits)
        elif cid == b"data":
            if fmt is None:
                raise MalformedWav("data chunk precedes fmt chunk")
            code, channels, rate, bits = fmt
            if code not in (_FMT_PCM, _FMT_FLOAT):
                raise UnsupportedFormat(f"unsupported format code {code}")
            if (code == _FMT_PCM and bits not in (16, 24)) or (code == _FMT_FLOAT and bits != 32):
                raise UnsupportedFormat(f"unsupported bit depth {bits} for format code {code}")
            if channels not in (1, 2):
                raise UnsupportedFormat(f"unsupported channel count {channels}")
            if rate <= 0:
                raise MalformedWav("sample rate must be positive")
            if body + size > len(data):
                raise MalformedWav("truncated data chunk")
            frame_bytes = channels * bits // 8
            if size % frame_bytes:
                raise MalformedWav("data chunk is not a whole number of frames")
            return WavInfo(rate, channels, bits, code, size // frame_bytes, body)
        pos = body + size + (size & 1)
    raise MalformedWav("missing fmt or data chunk")


def wav_info(path) -> WavInfo:
    """Parse only the header of a WAV file."""
    return _parse_header(Path(path).read_bytes())


def read_wav(path) -> AudioBuffer:
    """Read a 16/24-bit PCM or 32-bit float WAV file as a mono buffer.

    Stereo files are downmixed by averaging channels; integer PCM is scaled
    by ``1 / 2**(bits - 1)``.
    """
    raw = Path(path).read_bytes()
    info = _parse_header(raw)
    n = info.frames * info.channels
    body = raw[info.data_offset:info.data_offset + n * info.bits // 8]
    if info.format_code == _FMT_FLOAT:
        x = np.frombuffer(body, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(x)):
            raise MalformedWav("non-finite float samples")
    elif info.bits == 16:
        x = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    else:
        b = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    if info.channels == 2:
        x = x.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(x, info.sample_rate)


def write_wav(path, buf: AudioBuffer, format: str = "float32") -> None:
    """Write a mono WAV file as ``pcm16`` or ``float32``."""
    x = buf.samples
    if format == "pcm16":
        scaled = x * 32768.0
        q = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
        payload = np.clip(q, -32768, 32767).astype("<i2").tobytes()
        code, bits = _FMT_PCM, 16
    elif format == "float32":
        payload = x.astype("<f4").tobytes()
        code, bits = _FMT_FLOAT, 32
    else:
        raise ValueError(f"unknown WAV format {format!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", code, 1, buf.sample_rate, buf.sample_rate * block, block, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)


# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class Entry:
    input_path: Path
    target_path: Path
    condition_raw: tuple
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    sample_rate: int
    condition_names: tuple
    condition_ranges: tuple
    entries: tuple
    root: Path = field(default=Path("."), compare=False)

    @property
    def n_conds(self):
        return len(self.condition_names)

    def split_entries(self, split):
        return [i for i, e in enumerate(self.entries) if e.split == split]


def _expect(cond, message, path):
    if not cond:
        raise SchemaError(message, path)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _validate_schema(doc):
    _expect(isinstance(doc, dict), "manifest must be a JSON object", "$")
    for key in ("sample_rate", "condition_names", "condition_ranges", "entries"):
        _expect(key in doc, "missing field", key)
    extra = set(doc) - {"sample_rate", "condition_names", "condition_ranges", "entries"}
    _expect(not extra, f"unknown fields {sorted(extra)}", "$")
    sr = doc["sample_rate"]
    _expect(isinstance(sr, int) and not isinstance(sr, bool) and sr > 0,
            "must be a positive integer", "sample_rate")
    names = doc["condition_names"]
    _expect(isinstance(names, list) and all(isinstance(s, str) for s in names),
            "must be a list of strings", "condition_names")
    ranges = doc["condition_ranges"]
    _expect(isinstance(ranges, list) and len(ranges) == len(names),
            "must have one [min, max] pair per condition", "condition_ranges")
    for i, r in enumerate(ranges):
        _expect(isinstance(r, list) and len(r) == 2 and all(_is_num(v) for v in r),
                "must be [min, max]", f"condition_ranges[{i}]")
        _expect(r[0] <= r[1], "min must not exceed max", f"condition_ranges[{i}]")
    entries = doc["entries"]
    _expect(isinstance(entries, list), "must be a list", "entries")
    for i, e in enumerate(entries):
        p = f"entries[{i}]"
        _expect(isinstance(e, dict), "must be an object", p)
        for key in ("input", "target", "condition", "split"):
            _expect(key in e, "missing field", f"{p}.{key}")
        extra = set(e) - {"input", "target", "condition", "split"}
        _expect(not extra, f"unknown fields {sorted(extra)}", p)
        _expect(isinstance(e["input"], str), "must be a string", f"{p}.input")
        _expect(isinstance(e["target"], str), "must be a string", f"{p}.target")
        c = e["condition"]
        _expect(isinstance(c, list) and all(_is_num(v) for v in c),
                "must be a list of numbers", f"{p}.condition")
        _expect(len(c) == len(names),
                f"expected {len(names)} condition values, got {len(c)}", f"{p}.condition")
        _expect(e["split"] in SPLITS, f"must be one of {SPLITS}", f"{p}.split")


def load_manifest(path) -> DatasetManifest:
    """Load and eagerly validate a dataset manifest JSON file.

    Entry paths are resolved relative to the manifest's directory. Every
    referenced WAV header is parsed so rate and length problems surface here.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", str(path)) from exc
    _validate_schema(doc)
    root = path.parent
    sr = doc["sample_rate"]
    entries = []
    for i, e in enumerate(doc["entries"]):
        ipath, tpath = root / e["input"], root / e["target"]
        infos = []
        for p in (ipath, tpath):
            try:
                info = wav_info(p)
            except FileNotFoundError as exc:
                raise SchemaError(f"file not found: {p}", f"entries[{i}]") from exc
            if info.sample_rate != sr:
                raise SampleRateMismatch(
                    f"entries[{i}]: {p} is {info.sample_rate} Hz, manifest says {sr} Hz")
            infos.append(info)
        if infos[0].frames != infos[1].frames:
            raise LengthMismatch(
                f"entries[{i}]: input has {infos[0].frames} frames, target {infos[1].frames}")
        entries.append(Entry(ipath, tpath, tuple(float(v) for v in e["condition"]), e["split"]))
    ranges = tuple((float(a), float(b)) for a, b in doc["condition_ranges"])
    for i, e in enumerate(entries):
        for j, (v, (lo, hi)) in enumerate(zip(e.condition_raw, ranges)):
            if v < lo - 1e-9 or v > hi + 1e-9:
                raise SchemaError(f"value {v} outside range [{lo}, {hi}]",
                                  f"entries[{i}].condition[{j}]")
    return DatasetManifest(sr, tuple(doc["condition_names"]), ranges, tuple(entries), root)


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write ``manifest`` as JSON with entry paths relative to ``path``'s directory."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    doc = {
        "sample_rate": manifest.sample_rate,
        "condition_names": list(manifest.condition_names),
        "condition_ranges": [list(r) for r in manifest.condition_ranges],
        "entries": [
            {"input": rel(e.input_path), "target": rel(e.target_path),
             "condition": list(e.condition_raw), "split": e.split}
            for e in manifest.entries
        ],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def normalize_condition(ranges, raw) -> np.ndarray:
    """Map raw knob values affinely from ``[min, max]`` onto ``[-1, 1]``.

    ``ranges`` may be a manifest or a sequence of ``(min, max)`` pairs.
    Fixed parameters (``min == max``) map to 0.
    """
    if isinstance(ranges, DatasetManifest):
        ranges = ranges.condition_ranges
    raw = [float(v) for v in raw]
    if len(raw) != len(ranges):
        raise SchemaError(f"expected {len(ranges)} condition values, got {len(raw)}")
    out = np.zeros(len(raw))
    for i, (v, (lo, hi)) in enumerate(zip(raw, ranges)):
        if v < lo - 1e-9 or v > hi + 1e-9:
            raise OutOfRange(f"condition {i} value {v} outside [{lo}, {hi}]")
        if hi > lo:
            out[i] = min(1.0, max(-1.0, 2.0 * (v - lo) / (hi - lo) - 1.0))
    return out


# ---------------------------------------------------------------- segments


@dataclass(frozen=True, eq=False)
class Segment:
    input: np.ndarray
    target: np.ndarray
    condition: np.ndarray
    source_entry: int


def load_pair(manifest: DatasetManifest, index: int):
    e = manifest.entries[index]
    return read_wav(e.input_path), read_wav(e.target_path)


def segment_dataset(manifest: DatasetManifest, split: str, segment_len: int,
                    context_len: int, hop: int):
    """Cut every entry of ``split`` into training segments.

    Returns ``(segments, skipped)`` where ``skipped`` counts entries shorter
    than ``segment_len``. Input windows that reach before sample 0 are
    left-padded with zeros; targets are never padded.
    """
    if segment_len < 1 or hop < 1 or context_len < 0:
        raise ValueError("need segment_len >= 1, hop >= 1, context_len >= 0")
    indices = manifest.split_entries(split)
    if not indices:
        raise EmptySplit(f"split {split!r} has no entries")
    segments, skipped = [], 0
    for idx in indices:
        x, y = load_pair(manifest, idx)
        n = len(x)
        if n < segment_len:
            skipped += 1
            continue
        cond = normalize_condition(manifest, manifest.entries[idx].condition_raw)
        padded = np.concatenate([np.zeros(context_len), x.samples])
        for start in range(0, n - segment_len + 1, hop):
            segments.append(Segment(
                padded[start:start + context_len + segment_len],
                y.samples[start:start + segment_len],
                cond, idx))
    if skipped:
        log.warning("skipped %d entries shorter than %d samples", skipped, segment_len)
    return segments, skipped
