import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from neuralfx import AudioBuffer
from neuralfx.analysis import (HARMONIC_FFT, SEMITONE, export_report, harmonic_mask,
                               harmonic_response, snap_to_bin, sweep_response, waveform_compare)
from neuralfx.effects import EffectProcessor, GainProcessor
from neuralfx.errors import DegenerateEnergy, LengthMismatch, WindowOutOfRange


class Identity:
    sample_rate = 48000
    n_conds = 0

    def process(self, buf, cond=()):
        return buf


class Truncating(Identity):
    def process(self, buf, cond=()):
        return AudioBuffer(buf.samples[:-1], buf.sample_rate)


@pytest.fixture(scope="module")
def clip_report():
    return harmonic_response(EffectProcessor("hard_clip", 48000), 1000.0, [0.0], [0.5])


# ---------------------------------------------------------------- harmonic


def test_snap_to_bin():
    k, f = snap_to_bin(1000.0, 48000)
    assert k == round(1000.0 * HARMONIC_FFT / 48000) and f == k * 48000 / HARMONIC_FFT
    assert abs(f - 1000.0) <= 48000 / HARMONIC_FFT / 2


def test_gain_processor_has_no_harmonics():
    r = harmonic_response(GainProcessor(0.5, 48000), 1000.0, [-6.0], ())
    assert r.f0 == snap_to_bin(1000.0, 48000)[1]
    assert np.all(r.harmonics_db[0][1:] < -100.0)
    assert r.thd[0] < 1e-5
    assert abs(r.harmonics_dbfs[0][0] - (-6.0 - 6.0206)) < 0.01
    assert r.n_harmonics == 10


def test_identity_level():
    r = harmonic_response(Identity(), 440.0, [-12.0], ())
    assert abs(r.harmonics_dbfs[0][0] + 12.0) < 0.1
    assert r.harmonics_db[0][0] == 0.0


def test_hard_clip_odd_harmonics_only(clip_report):
    rel = clip_report.harmonics_db[0]
    assert np.all(rel[1::2] < -80.0)        # H2, H4, ...
    assert np.all(rel[2::2] > -40.0)        # H3, H5, ...
    assert np.argmax(rel) == 0 and clip_report.thd[0] > 0.05


def test_harmonics_match_numpy_fft(clip_report):
    """Independent oracle: numpy's FFT of the same windowed frame."""
    r = clip_report
    sr, N = 48000, HARMONIC_FFT
    t = np.arange(int(2.0 * sr)) / sr
    y = np.clip(np.sin(2 * np.pi * r.f0 * t), -0.5, 0.5) / 0.5
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(N) / N)
    settle = sr // 2
    amp = np.abs(np.fft.rfft(y[settle:settle + N] * w)) * 2 / w.sum()
    k0 = snap_to_bin(1000.0, sr)[0]
    ref = 20 * np.log10(amp[[k * k0 for k in range(1, 11)]])
    odd = slice(0, None, 2)
    assert np.max(np.abs(r.harmonics_dbfs[0][odd] - ref[odd])) < 1e-6
    assert np.max(np.abs(r.spectra_db[0][:2000] - 20 * np.log10(np.maximum(amp[:2000], 1e-12)))) < 1e-3


@pytest.mark.parametrize("proc,cond", [(GainProcessor(0.3, 48000), ()),
                                       (EffectProcessor("one_pole_tone", 48000), [0.2])])
def test_lti_processors_have_low_thd(proc, cond):
    r = harmonic_response(proc, 500.0, [-24.0, -6.0, 0.0], cond)
    assert all(v < 1e-4 for v in r.thd)
    assert all(v >= 0 for v in r.thd)


def test_harmonic_response_checks_length():
    with pytest.raises(LengthMismatch):
        harmonic_response(Truncating(), 1000.0, [0.0], ())


# ------------------------------------------------------------------- sweep


def test_identity_sweep_has_no_aliasing():
    res = sweep_response(Identity(), duration=2.0)
    assert res.aliasing_ratio < -40.0
    spec, ratio = res
    assert ratio == res.aliasing_ratio and spec is res.spectrogram


def test_sweep_energy_partition():
    res = sweep_response(EffectProcessor("tanh_drive", 8000), duration=1.0, cond=[7 / 19])
    total = float(np.sum(np.abs(res.spectrogram.frames) ** 2))
    assert res.inside_energy + res.outside_energy == pytest.approx(total, rel=1e-12)
    assert res.mask.shape == res.spectrogram.frames.shape
    assert res.aliasing_ratio == pytest.approx(
        10 * np.log10(res.outside_energy / res.inside_energy), rel=1e-12)


def test_mask_stops_at_nyquist():
    sr, N = 8000, 2048
    m = harmonic_mask(np.array([1500.0, 3000.0]), np.array([1500.0, 3000.0]), N, sr)
    assert m.shape == (2, N // 2 + 1)
    df = sr / N
    on = np.flatnonzero(m[1]) * df
    # only the fundamental of 3 kHz fits below 4 kHz; its band is one semitone plus guard bins
    assert on.min() >= 3000 / SEMITONE - 3 * df and on.max() <= 4000.0
    on0 = np.flatnonzero(m[0]) * df
    assert on0.max() <= 4000.0
    assert np.any(np.abs(on0 - 3000.0) < df) and not np.any(np.abs(on0 - 2250.0) < df)
    capped = harmonic_mask(np.array([100.0]), np.array([100.0]), N, sr, n_harmonics=3)
    top = np.flatnonzero(capped[0]).max() * df
    assert 300.0 < top < 300.0 * SEMITONE + 3 * df


def test_zero_processor_is_degenerate():
    with pytest.raises(DegenerateEnergy):
        sweep_response(GainProcessor(0.0, 8000), duration=0.5)


# ----------------------------------------------------------------- compare


def test_waveform_compare_examples(rng):
    t = AudioBuffer(rng.standard_normal(50), 8000)
    assert np.all(waveform_compare(t, t).diff == 0.0)
    assert len(waveform_compare(t, t, (0, 0))) == 0
    shifted = waveform_compare(AudioBuffer(t.samples + 0.1, 8000), t, (10, 5))
    assert shifted.n.tolist() == list(range(10, 15))
    assert np.allclose(shifted.diff, 0.1, rtol=0, atol=1e-12)
    with pytest.raises(WindowOutOfRange):
        waveform_compare(t, t, (45, 10))
    with pytest.raises(LengthMismatch):
        waveform_compare(AudioBuffer(np.zeros(3), 8000), t)


# ------------------------------------------------------------------ export


def test_harmonic_csv_roundtrip(tmp_path, clip_report):
    path = tmp_path / "h.csv"
    export_report(clip_report, path)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["level_dbfs", "bin_hz", "mag_db"]
    vals = np.array(rows[1:], dtype=float)
    assert len(vals) == HARMONIC_FFT // 2 + 1
    assert np.max(np.abs(vals[:, 2] - clip_report.spectra_db[0])) < 1e-6
    assert np.max(np.abs(vals[:, 1] - clip_report.bin_hz)) < 1e-6


def test_csv_is_byte_reproducible(tmp_path):
    res = [sweep_response(Identity(), duration=0.5, sample_rate=8000) for _ in range(2)]
    export_report(res[0], tmp_path / "a.csv")
    export_report(res[1], tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with open(tmp_path / "a.csv") as f:
        assert next(csv.reader(f)) == ["frame", "bin_hz", "mag_db", "in_mask"]


def test_empty_comparison_csv(tmp_path):
    t = AudioBuffer(np.zeros(10), 8000)
    export_report(waveform_compare(t, t, (3, 0)), tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == "n,target,pred,diff\n"


def test_svg_outputs_are_well_formed(tmp_path, clip_report, rng):
    t = AudioBuffer(rng.standard_normal(100), 8000)
    reports = [clip_report, sweep_response(Identity(), duration=0.5, sample_rate=8000),
               waveform_compare(t, t), waveform_compare(t, t, (0, 0))]
    for i, r in enumerate(reports):
        path = tmp_path / f"r{i}.svg"
        export_report(r, path)
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg") and root.get("viewBox") == "0 0 1000 600"
        assert "href" not in path.read_text()


def test_export_errors(tmp_path, clip_report):
    with pytest.raises(ValueError):
        export_report(clip_report, tmp_path / "x.png")
    with pytest.raises(TypeError):
        export_report({"a": 1}, tmp_path / "x.csv")
    with pytest.raises(OSError):
        export_report(clip_report, tmp_path / "missing" / "x.csv")
