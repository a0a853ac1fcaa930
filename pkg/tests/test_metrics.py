import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuralfx import AudioBuffer, generate_sine
from neuralfx.errors import LengthMismatch, SampleRateMismatch, SilentSignal, TooShort
from neuralfx.metrics import (METRIC_NAMES, crest_factor, crest_factor_error, detect_onsets,
                              k_weighting_coefficients, loudness, loudness_error, metric_report,
                              rms_energy_error, spectral_centroid_error, transient_error)

SIX_DB = 20 * np.log10(2.0)

# Published 48 kHz K-weighting coefficients (b0, b1, b2, a1, a2)
K48_SHELF = (1.53512485958697, -2.69169618940638, 1.19839281085285,
             -1.69065929318241, 0.73248077421585)
K48_HP = (1.0, -2.0, 1.0, -1.99004745483398, 0.99007225036621)


def buf(x, sr=44100):
    return AudioBuffer(np.asarray(x, dtype=np.float64), sr)


def music_like(seed=0, n=44100, sr=44100):
    r = np.random.default_rng(seed)
    t = np.arange(n) / sr
    x = 0.3 * np.sin(2 * np.pi * 220 * t) + 0.1 * r.standard_normal(n)
    x[n // 3:n // 3 + 200] += 0.5
    return buf(x, sr)


def biquad_loop(x, b0, b1, b2, a1, a2):
    y = np.zeros(len(x))
    x1 = x2 = y1 = y2 = 0.0
    for n, v in enumerate(x):
        out = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2
        x2, x1, y2, y1 = x1, v, y1, out
        y[n] = out
    return y


# --------------------------------------------------------------- loudness


def test_k_weighting_reproduces_48k_reference():
    shelf, hp = k_weighting_coefficients(48000)
    assert np.max(np.abs(np.array(shelf) - K48_SHELF)) < 1e-10
    assert np.max(np.abs(np.array(hp) - K48_HP)) < 1e-10


def test_loudness_997hz_matches_scalar_loop():
    x = generate_sine(997.0, 0.5, 0.5, 48000)
    y = x.samples.astype(np.float64)
    for coeffs in (K48_SHELF, K48_HP):
        y = biquad_loop(y, *coeffs)
    ref = 10 * np.log10(sum(v * v for v in y) / len(y)) - 0.691
    assert abs(loudness(x) - ref) < 1e-6


def test_loudness_examples():
    x = music_like()
    assert loudness_error(x, x) == 0.0
    assert abs(loudness_error(buf(2 * x.samples), x) - SIX_DB) < 0.01
    with pytest.raises(TooShort):
        loudness(buf(np.ones(1000), 8000))
    with pytest.raises(SampleRateMismatch):
        loudness_error(buf(x.samples, 44100), buf(x.samples, 48000))


# ------------------------------------------------------------------ crest


def test_crest_factor_examples():
    sine = generate_sine(1000.0, 1.0, 1.0, 48000)
    assert abs(crest_factor(sine.samples) - 10 * np.log10(2.0)) < 1e-3
    square = buf(np.sign(np.sin(2 * np.pi * 100 * np.arange(48000) / 48000 + 0.1)), 48000)
    assert crest_factor(square.samples) == 0.0
    assert abs(crest_factor_error(square, sine) - 3.0103) < 1e-3
    assert crest_factor_error(sine, sine) == 0.0
    with pytest.raises(SilentSignal):
        crest_factor_error(buf(np.zeros(10)), buf(np.ones(10)))


# -------------------------------------------------------------------- rms


def test_rms_energy_matches_loop():
    x, y = music_like(1), music_like(2)
    ref, count, n = 0.0, 0, 0
    while n + 2048 <= len(x):
        a = np.sqrt(sum(v * v for v in x.samples[n:n + 2048]) / 2048)
        b = np.sqrt(sum(v * v for v in y.samples[n:n + 2048]) / 2048)
        ref += abs(20 * np.log10(a + 1e-9) - 20 * np.log10(b + 1e-9))
        count += 1
        n += 512
    assert abs(rms_energy_error(x, y) - ref / count) < 1e-9


def test_rms_examples():
    x = music_like()
    assert rms_energy_error(x, x) == 0.0
    assert abs(rms_energy_error(buf(x.samples / 2), x) - SIX_DB) < 0.01
    with pytest.raises(TooShort):
        rms_energy_error(buf(np.ones(100)), buf(np.ones(100)))


# -------------------------------------------------------------- transient


def click_train(sr=44100, seconds=1.0, period=0.2, first=0.05):
    n = int(sr * seconds)
    x = np.zeros(n)
    decay = np.exp(-np.arange(int(0.01 * sr)) / (0.002 * sr))
    starts = list(range(int(first * sr), n - decay.size, int(period * sr)))
    for s in starts:
        x[s:s + decay.size] += 0.8 * decay
    return x, starts, decay.size


def naive_onset_frames(x, fft=1024, hop=256):
    n = np.arange(fft)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * n / fft)
    k = np.arange(fft // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(n, k) / fft)
    frames = 1 + (len(x) - fft) // hop
    mags = [np.abs((x[f * hop:f * hop + fft] * w) @ basis) for f in range(frames)]
    flux = [0.0] + [float(np.sum(np.maximum(mags[f] - mags[f - 1], 0))) for f in range(1, frames)]
    med = np.median(flux)
    mad = np.median(np.abs(np.array(flux) - med))
    floor = 0.05 * np.mean([m.sum() for m in mags])
    return [f for f in range(frames) if flux[f] > med + 2 * mad and flux[f] > floor]


def test_transient_error_matches_hand_masked_oracle():
    sr = 44100
    target, starts, width = click_train(sr)
    pred = target.copy()
    s = starts[2]
    pred[s:s + width] *= 0.5
    frames = naive_onset_frames(target)
    assert np.array_equal(detect_onsets(target), frames)
    mask = np.zeros(len(target), dtype=bool)
    for f in frames:
        mask[f * 256 + 512:f * 256 + 512 + int(0.05 * sr)] = True
    # the scaled attack lies inside the mask, and it is the only place pred differs
    assert mask[s:s + width].all()
    ref = np.abs(pred - target)[mask].mean()
    assert ref > 0
    assert abs(transient_error(buf(pred), buf(target)) - ref) < 1e-9


def test_transient_examples():
    target, _, _ = click_train()
    assert transient_error(buf(target), buf(target)) == 0.0
    sine = generate_sine(440.0, 0.5, 1.0, 44100)
    assert detect_onsets(sine.samples).size == 0
    assert transient_error(buf(sine.samples * 0.5), sine) == 0.0
    with pytest.raises(LengthMismatch):
        transient_error(buf(np.ones(10)), buf(np.ones(11)))


# --------------------------------------------------------------- centroid


def test_centroid_examples():
    a = generate_sine(1000.0, 1.0, 0.5, 44100)
    b = generate_sine(2000.0, 1.0, 0.5, 44100)
    assert spectral_centroid_error(a, a) == 0.0
    assert abs(spectral_centroid_error(a, b) - 1000.0) < 50.0
    z = buf(np.zeros(4096))
    assert spectral_centroid_error(z, z) == 0.0
    with pytest.raises(TooShort):
        spectral_centroid_error(buf(np.ones(100)), buf(np.ones(100)))


# ----------------------------------------------------------------- report


def test_metric_report_zero_on_identical():
    x = music_like(3)
    report = metric_report(x, x)
    assert list(report) == list(METRIC_NAMES)
    assert all(v == 0.0 for v in report.values())
    with pytest.raises(ValueError):
        metric_report(x, x, ["pesq"])


@settings(max_examples=15, deadline=None)
@given(gain_db=st.floats(-30, 30), seed=st.integers(0, 100))
def test_gain_response(gain_db, seed):
    x = music_like(seed, n=22050)
    y = buf(x.samples * 10 ** (gain_db / 20))
    assert abs(loudness_error(y, x) - abs(gain_db)) < 0.01
    assert abs(rms_energy_error(y, x) - abs(gain_db)) < 0.01
