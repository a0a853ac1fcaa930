import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from neuralfx import AudioBuffer, load_manifest, read_wav
from neuralfx.effects import (EFFECTS, EffectProcessor, GainProcessor, assign_splits,
                              compressor_envelope, ff_compressor, hard_clip, one_pole_tone,
                              render_dataset, synth_corpus, tanh_drive, time_coeff)
from neuralfx import dsp
from neuralfx.errors import ConditionDimMismatch

from conftest import make_corpus

signals = arrays(np.float64, st.integers(1, 200), elements=st.floats(-1, 1))


def buf(x, sr=8000):
    return AudioBuffer(np.asarray(x, dtype=np.float64), sr)


# ------------------------------------------------------------ nonlinear


def test_tanh_drive_examples(rng):
    x = rng.uniform(-1, 1, 100)
    assert np.array_equal(tanh_drive(buf(x), 0.0).samples, np.tanh(x) / np.tanh(1.0))
    assert np.array_equal(tanh_drive(buf(np.zeros(5)), 0.7).samples, np.zeros(5))
    g = 1 + 19 * 0.5
    assert np.array_equal(tanh_drive(buf(x), 0.5).samples, np.tanh(g * x) / np.tanh(g))


def test_hard_clip_examples():
    x = np.array([-0.2, 0.0, 0.1, 0.25])
    assert np.allclose(hard_clip(buf(x), 0.25).samples, x / 0.25, rtol=0, atol=1e-15)
    assert hard_clip(buf([0.6]), 0.3).samples[0] == 1.0
    with pytest.raises(ValueError):
        hard_clip(buf(x), 0.0)


@settings(max_examples=50, deadline=None)
@given(x=signals, knob=st.floats(0, 1), thr=st.floats(0.01, 1))
def test_odd_symmetry_and_bounds(x, knob, thr):
    for fn, k in ((tanh_drive, knob), (hard_clip, thr)):
        y = fn(buf(x), k).samples
        assert np.array_equal(fn(buf(-x), k).samples, -y)
        assert np.all(np.abs(y) <= 1.0 + 1e-12)


# ----------------------------------------------------------------- tone


def test_one_pole_tone_examples(rng):
    x = rng.uniform(-1, 1, 64)
    assert np.array_equal(one_pole_tone(buf(x), 1.0).samples, x)
    imp = np.zeros(32)
    imp[0] = 1.0
    a = 0.99 * (1 - 0.3)
    h = one_pole_tone(buf(imp), 0.3).samples
    assert np.max(np.abs(h - (1 - a) * a ** np.arange(32))) < 1e-15
    assert np.array_equal(one_pole_tone(buf(x), 0.3).samples,
                          dsp.one_pole_filter(buf(x), "lowpass", a).samples)


# ----------------------------------------------------------- compressor


def test_compressor_envelope_matches_recurrence():
    sr = 8000
    x = np.concatenate([np.zeros(10), 0.8 * np.ones(200), np.zeros(200)])
    a_att, a_rel = time_coeff(5.0, sr), time_coeff(50.0, sr)
    assert a_att == pytest.approx(np.exp(-1 / (0.005 * sr)), rel=1e-15)
    ref, e = np.zeros(len(x)), 0.0
    for n, v in enumerate(np.abs(x)):
        a = a_att if v > e else a_rel
        e = a * e + (1 - a) * v
        ref[n] = e
    env = compressor_envelope(buf(x, sr), 5.0, 50.0)
    assert np.max(np.abs(env - ref)) < 1e-9


def test_compressor_examples(rng):
    x = rng.uniform(-1, 1, 500)
    assert np.array_equal(ff_compressor(buf(x), -20.0, ratio=1.0).samples, x)
    quiet = np.full(500, 1e-4)
    assert np.max(np.abs(ff_compressor(buf(quiet), -20.0).samples - quiet)) < 1e-6
    loud = ff_compressor(buf(np.full(4000, 0.9)), -20.0, 4.0).samples
    # steady state gain: (threshold - level) * (1 - 1/ratio) dB
    expected = 0.9 * 10 ** ((-20 - 20 * np.log10(0.9)) * 0.75 / 20)
    assert loud[-1] == pytest.approx(expected, rel=1e-6)
    with pytest.raises(ValueError):
        ff_compressor(buf(x), -20.0, ratio=0.5)


@settings(max_examples=40, deadline=None)
@given(x=signals, thr=st.floats(-60, 0), ratio=st.floats(1, 20))
def test_compressor_never_boosts(x, thr, ratio):
    y = ff_compressor(buf(x), thr, ratio).samples
    assert np.all(np.abs(y) <= np.abs(x))


@pytest.mark.parametrize("name", sorted(EFFECTS))
def test_effects_deterministic_and_causal(rng, name):
    proc = EffectProcessor(name)
    lo, hi = EFFECTS[name].lo, EFFECTS[name].hi
    knob = [(lo + hi) / 2]
    x = rng.uniform(-1, 1, 300)
    y = proc.process(buf(x), knob).samples
    assert np.array_equal(y, proc.process(buf(x), knob).samples)
    assert np.all(np.isfinite(y)) and len(y) == 300
    x2 = x.copy()
    x2[200:] = 0
    assert np.array_equal(proc.process(buf(x2), knob).samples[:200], y[:200])


def test_processor_contract_errors():
    with pytest.raises(ValueError):
        EffectProcessor("chorus")
    with pytest.raises(ConditionDimMismatch):
        EffectProcessor("tanh_drive").process(buf(np.zeros(4)), [0.1, 0.2])
    g = GainProcessor(0.5)
    assert g.process(buf([1.0, -2.0])).samples.tolist() == [0.5, -1.0]


# ------------------------------------------------------------- datasets


def test_assign_splits():
    labels = assign_splits(20, (0.8, 0.1, 0.1), seed=3)
    assert labels.count("valid") == 2 and labels.count("test") == 2
    assert labels == assign_splits(20, (0.8, 0.1, 0.1), seed=3)
    assert labels != assign_splits(20, (0.8, 0.1, 0.1), seed=4)
    assert assign_splits(3, (0.8, 0.1, 0.1), 0).count("train") == 1
    assert assign_splits(1, (0.8, 0.1, 0.1), 0) == ["train"]
    with pytest.raises(ValueError):
        assign_splits(5, (0.5, 0.2, 0.2), 0)


def test_render_dataset(tmp_path):
    corpus = make_corpus(2)
    m = render_dataset("tanh_drive", [0.0, 0.5, 1.0], corpus, tmp_path, seed=0)
    assert len(m.entries) == 6
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded.condition_names == ("gain",)
    assert loaded.condition_ranges == ((0.0, 1.0),)
    for e in loaded.entries:
        x = read_wav(e.input_path)
        y = read_wav(e.target_path)
        again = tanh_drive(x, e.condition_raw[0])
        assert np.array_equal(again.samples.astype(np.float32), y.samples)
    with pytest.raises(ValueError):
        render_dataset("tanh_drive", [], corpus, tmp_path / "x")
    with pytest.raises(ValueError):
        render_dataset("tanh_drive", [0.5], [], tmp_path / "x")


def test_render_dataset_is_deterministic(tmp_path):
    corpus = make_corpus(3)
    render_dataset("hard_clip", [0.2, 0.9], corpus, tmp_path / "a", seed=1)
    render_dataset("hard_clip", [0.2, 0.9], corpus, tmp_path / "b", seed=1)
    for f in sorted((tmp_path / "a").rglob("*.wav")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_synth_corpus():
    items = synth_corpus(total_seconds=3.0, item_seconds=0.5, sr=8000, seed=1)
    assert len(items) == 6 and all(len(b) == 4000 for b in items)
    assert all(np.max(np.abs(b.samples)) <= 1.0 for b in items)
    again = synth_corpus(total_seconds=3.0, item_seconds=0.5, sr=8000, seed=1)
    assert all(np.array_equal(a.samples, b.samples) for a, b in zip(items, again))
