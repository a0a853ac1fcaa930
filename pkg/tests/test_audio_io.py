import json
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuralfx import (AudioBuffer, load_manifest, normalize_condition, read_wav, save_manifest,
                      segment_dataset, write_wav)
from neuralfx.audio_io import DatasetManifest, Entry
from neuralfx.errors import (EmptySplit, LengthMismatch, MalformedWav, OutOfRange,
                             SampleRateMismatch, SchemaError, UnsupportedFormat)


def write_pcm(path, frames, sr=8000, width=2, channels=1):
    """Write integer PCM with the stdlib writer (an independent encoder)."""
    data = np.asarray(frames, dtype=np.int64).reshape(-1)
    if width == 2:
        payload = data.astype("<i2").tobytes()
    else:
        u = data & 0xFFFFFF
        payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1)
        payload = payload.astype(np.uint8).tobytes()
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(sr)
        w.writeframes(payload)


def raw_pcm16(path):
    with wave.open(str(path), "rb") as w:
        return np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")


# ------------------------------------------------------------------ buffers


def test_audio_buffer_rejects_nonfinite_and_bad_rate():
    with pytest.raises(ValueError):
        AudioBuffer([0.0, np.nan], 8000)
    with pytest.raises(ValueError):
        AudioBuffer([0.0], 0)
    assert len(AudioBuffer([], 8000)) == 0


# ---------------------------------------------------------------------- WAV


def test_pcm16_half_scale(tmp_path):
    write_pcm(tmp_path / "a.wav", [16384])
    assert read_wav(tmp_path / "a.wav").samples[0] == 0.5


def test_pcm16_stereo_downmix(tmp_path):
    write_pcm(tmp_path / "a.wav", [-8192, 8192, 16384, 0], channels=2)
    buf = read_wav(tmp_path / "a.wav")
    assert buf.samples.tolist() == [0.0, 0.25]


def test_pcm24_scaling(tmp_path):
    write_pcm(tmp_path / "a.wav", [1 << 22, -(1 << 23), 1], width=3)
    x = read_wav(tmp_path / "a.wav").samples
    assert x.tolist() == [0.5, -1.0, 2.0 ** -23]


def test_pcm16_write_clamps_and_rounds(tmp_path):
    buf = AudioBuffer([1.0, -1.0, 0.5, 1.5 / 32768, -1.5 / 32768, 2.5 / 32768], 8000)
    write_wav(tmp_path / "a.wav", buf, "pcm16")
    assert raw_pcm16(tmp_path / "a.wav").tolist() == [32767, -32768, 16384, 2, -2, 3]


def test_float32_roundtrip_bit_identical(tmp_path, rng):
    x = rng.uniform(-1, 1, 1001).astype(np.float32).astype(np.float64)
    write_wav(tmp_path / "a.wav", AudioBuffer(x, 44100), "float32")
    y = read_wav(tmp_path / "a.wav")
    assert y.sample_rate == 44100
    assert np.max(np.abs(y.samples - x)) == 0.0
    write_wav(tmp_path / "b.wav", y, "float32")
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1, width=32), min_size=0, max_size=64))
def test_float32_roundtrip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("wav") / "p.wav"
    write_wav(path, AudioBuffer(values, 16000), "float32")
    assert read_wav(path).samples.tolist() == [float(v) for v in values]


def test_wav_chunks_skipped_and_padded(tmp_path):
    # an odd-sized unknown chunk before fmt must be skipped with its pad byte
    fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
    data = struct.pack("<2h", 100, -100)
    body = b"WAVE" + b"junk" + struct.pack("<I", 3) + b"abc\x00"
    body += b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", 4) + data
    (tmp_path / "a.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    assert read_wav(tmp_path / "a.wav").samples.tolist() == [100 / 32768, -100 / 32768]


@pytest.mark.parametrize("mutate, err", [
    (lambda b: b[:20], MalformedWav),
    (lambda b: b"RIFX" + b[4:], MalformedWav),
    (lambda b: b[:-2], MalformedWav),
    (lambda b: b[:20] + struct.pack("<H", 2) + b[22:], UnsupportedFormat),
    (lambda b: b[:34] + struct.pack("<H", 8) + b[36:], UnsupportedFormat),
    (lambda b: b"", MalformedWav),
])
def test_malformed_wavs(tmp_path, mutate, err):
    write_pcm(tmp_path / "a.wav", [1, 2, 3, 4])
    good = (tmp_path / "a.wav").read_bytes()
    (tmp_path / "b.wav").write_bytes(mutate(good))
    with pytest.raises(err):
        read_wav(tmp_path / "b.wav")


def test_write_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_wav(tmp_path / "a.wav", AudioBuffer([0.0], 8000), "mp3")


# ----------------------------------------------------------------- manifest


def make_manifest(tmp_path, entries, sr=8000, names=("gain",), ranges=((0.0, 1.0),)):
    doc = {"sample_rate": sr, "condition_names": list(names),
           "condition_ranges": [list(r) for r in ranges], "entries": entries}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


def wav(tmp_path, name, n=10, sr=8000, value=0.1):
    write_wav(tmp_path / name, AudioBuffer(np.full(n, value), sr))
    return name


def test_minimal_manifest(tmp_path):
    path = make_manifest(tmp_path, [{"input": wav(tmp_path, "i.wav"), "target": wav(tmp_path, "t.wav"),
                                      "condition": [0.5], "split": "train"}])
    m = load_manifest(path)
    assert m.condition_names == ("gain",)
    assert len(m.entries) == 1 and m.entries[0].input_path == tmp_path / "i.wav"


def test_manifest_rate_mismatch(tmp_path):
    path = make_manifest(tmp_path, [{"input": wav(tmp_path, "i.wav", sr=44100),
                                      "target": wav(tmp_path, "t.wav", sr=44100),
                                      "condition": [0.5], "split": "train"}], sr=48000)
    with pytest.raises(SampleRateMismatch):
        load_manifest(path)


def test_manifest_condition_count(tmp_path):
    path = make_manifest(tmp_path, [{"input": wav(tmp_path, "i.wav"), "target": wav(tmp_path, "t.wav"),
                                      "condition": [0.5], "split": "train"}],
                         names=("a", "b"), ranges=((0, 1), (0, 1)))
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_manifest_length_mismatch(tmp_path):
    path = make_manifest(tmp_path, [{"input": wav(tmp_path, "i.wav", n=10),
                                      "target": wav(tmp_path, "t.wav", n=11),
                                      "condition": [0.5], "split": "train"}])
    with pytest.raises(LengthMismatch):
        load_manifest(path)


@pytest.mark.parametrize("patch", [
    {"sample_rate": "8000"},
    {"condition_names": "gain"},
    {"condition_ranges": [[0.0]]},
    {"entries": {}},
    {"extra": 1},
])
def test_manifest_schema_errors(tmp_path, patch):
    path = make_manifest(tmp_path, [])
    doc = json.loads(path.read_text())
    doc.update(patch)
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(path)


@pytest.mark.parametrize("entry_patch", [
    {"split": "holdout"}, {"condition": ["x"]}, {"input": 3}, {"condition": [2.0]},
])
def test_manifest_entry_errors(tmp_path, entry_patch):
    e = {"input": wav(tmp_path, "i.wav"), "target": wav(tmp_path, "t.wav"),
         "condition": [0.5], "split": "train"}
    e.update(entry_patch)
    with pytest.raises(SchemaError):
        load_manifest(make_manifest(tmp_path, [e]))


def test_manifest_missing_file_and_bad_json(tmp_path):
    path = make_manifest(tmp_path, [{"input": "nope.wav", "target": "nope.wav",
                                      "condition": [0.5], "split": "train"}])
    with pytest.raises(SchemaError):
        load_manifest(path)
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_manifest_save_load_roundtrip(tmp_path):
    e = {"input": wav(tmp_path, "i.wav"), "target": wav(tmp_path, "t.wav"),
         "condition": [0.25], "split": "valid"}
    path = make_manifest(tmp_path, [e])
    m = load_manifest(path)
    save_manifest(m, tmp_path / "copy.json")
    again = load_manifest(tmp_path / "copy.json")
    assert again == m
    assert json.loads((tmp_path / "copy.json").read_text())["entries"][0] == e


# ------------------------------------------------------------- normalization


def test_normalize_condition_examples():
    ranges = ((2.0, 6.0), (5.0, 5.0))
    assert normalize_condition(ranges, [2.0, 5.0]).tolist() == [-1.0, 0.0]
    assert normalize_condition(ranges, [4.0, 5.0]).tolist() == [0.0, 0.0]
    assert normalize_condition(ranges, [6.0, 5.0]).tolist() == [1.0, 0.0]
    with pytest.raises(OutOfRange):
        normalize_condition(ranges, [6.1, 5.0])
    with pytest.raises(SchemaError):
        normalize_condition(ranges, [6.0])


@given(st.floats(-100, 100), st.floats(1e-3, 100), st.floats(0, 1), st.floats(0, 1))
def test_normalize_condition_monotone(lo, width, a, b):
    hi = lo + width
    va, vb = lo + a * width, lo + b * width
    na = normalize_condition([(lo, hi)], [va])[0]
    nb = normalize_condition([(lo, hi)], [vb])[0]
    assert -1.0 <= na <= 1.0
    if va < vb:
        assert na <= nb
    assert normalize_condition([(lo, hi)], [lo])[0] == -1.0
    assert normalize_condition([(lo, hi)], [hi])[0] == 1.0


# ---------------------------------------------------------------- segments


def seg_manifest(tmp_path, n):
    write_wav(tmp_path / "i.wav", AudioBuffer(np.arange(1, n + 1) / 100.0, 8000))
    write_wav(tmp_path / "t.wav", AudioBuffer(-np.arange(1, n + 1) / 100.0, 8000))
    entry = Entry(tmp_path / "i.wav", tmp_path / "t.wav", (0.5,), "train")
    return DatasetManifest(8000, ("gain",), ((0.0, 1.0),), (entry,), tmp_path)


def f32(v):
    return np.float32(v).astype(np.float64)


def test_segments_tile_entry(tmp_path):
    segs, skipped = segment_dataset(seg_manifest(tmp_path, 10), "train", 5, 0, 5)
    assert skipped == 0 and len(segs) == 2
    assert segs[0].input.tolist() == f32(np.arange(1, 6) / 100.0).tolist()
    assert segs[1].target.tolist() == f32(-np.arange(6, 11) / 100.0).tolist()
    assert segs[0].condition.tolist() == [0.0]


def test_segments_context_padding(tmp_path):
    segs, _ = segment_dataset(seg_manifest(tmp_path, 10), "train", 5, 3, 5)
    assert segs[0].input.tolist() == [0.0, 0.0, 0.0] + f32(np.arange(1, 6) / 100.0).tolist()
    assert segs[1].input.tolist() == f32(np.arange(3, 11) / 100.0).tolist()
    assert len(segs[0].target) == 5


def test_segments_skip_short(tmp_path):
    segs, skipped = segment_dataset(seg_manifest(tmp_path, 4), "train", 5, 0, 5)
    assert segs == [] and skipped == 1


def test_segments_empty_split(tmp_path):
    with pytest.raises(EmptySplit):
        segment_dataset(seg_manifest(tmp_path, 10), "test", 5, 0, 5)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), seg=st.integers(1, 12), ctx=st.integers(0, 6))
def test_segments_cover_hop_aligned_windows_once(tmp_path_factory, n, seg, ctx):
    d = tmp_path_factory.mktemp("seg")
    segs, skipped = segment_dataset(seg_manifest(d, n), "train", seg, ctx, seg)
    covered = np.zeros(n, dtype=int)
    x = f32(np.arange(1, n + 1) / 100.0)
    for k, s in enumerate(segs):
        covered[k * seg:(k + 1) * seg] += 1
        assert len(s.input) == ctx + seg
        # the trailing segment_len input samples are aligned with the target
        assert np.array_equal(s.input[ctx:], x[k * seg:(k + 1) * seg])
        assert np.array_equal(s.target, -x[k * seg:(k + 1) * seg])
    full = (n // seg) * seg
    assert np.all(covered[:full] == 1) and np.all(covered[full:] == 0)
    assert skipped == (1 if n < seg else 0)
