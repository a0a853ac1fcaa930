"""Evaluation metrics comparing a rendered prediction against its target.

Loudness uses un-gated K-weighted power. The K-weighting filter is the
usual two-biquad chain (high-frequency shelf, then high-pass) designed by
the bilinear transform at the buffer's own sample rate, which reproduces the
standard 48 kHz coefficients.

The transient metric is this toolkit's own reconstruction: onsets are found
on the target by thresholded spectral flux, each onset opens a 50 ms region,
and the metric is the mean absolute error over the union of regions.
"""

from __future__ import annotations

import numpy as np

from . import dsp, kernels, losses
from .audio_io import AudioBuffer
from .errors import LengthMismatch, SampleRateMismatch, SilentSignal, TooShort

METRIC_NAMES = ("esr", "loudness_db", "crest_db", "rms_db", "transient", "centroid_hz")

# K-weighting analog prototypes (centre frequency, Q, gain)
_SHELF_F0 = 1681.9744509555319
_SHELF_GAIN_DB = 3.99984385397
_SHELF_Q = 0.7071752369554193
_SHELF_VB_EXP = 0.499666774155
_HP_F0 = 38.13547087613982
_HP_Q = 0.5003270373253953


def _pair(pred, target):
    if isinstance(pred, AudioBuffer) and isinstance(target, AudioBuffer):
        if pred.sample_rate != target.sample_rate:
            raise SampleRateMismatch(f"{pred.sample_rate} Hz vs {target.sample_rate} Hz")
    if len(pred) != len(target):
        raise LengthMismatch(f"pred has {len(pred)} samples, target {len(target)}")
    return pred.samples, target.samples, target.sample_rate


def k_weighting_coefficients(sr):
    """Return ``[(b0, b1, b2, a1, a2), ...]`` for the shelf and high-pass stages."""
    K = np.tan(np.pi * _SHELF_F0 / sr)
    Vh = 10.0 ** (_SHELF_GAIN_DB / 20.0)
    Vb = Vh ** _SHELF_VB_EXP
    a0 = 1.0 + K / _SHELF_Q + K * K
    shelf = ((Vh + Vb * K / _SHELF_Q + K * K) / a0,
             2.0 * (K * K - Vh) / a0,
             (Vh - Vb * K / _SHELF_Q + K * K) / a0,
             2.0 * (K * K - 1.0) / a0,
             (1.0 - K / _SHELF_Q + K * K) / a0)
    K = np.tan(np.pi * _HP_F0 / sr)
    a0 = 1.0 + K / _HP_Q + K * K
    highpass = (1.0, -2.0, 1.0, 2.0 * (K * K - 1.0) / a0, (1.0 - K / _HP_Q + K * K) / a0)
    return [shelf, highpass]


def k_weight(x, sr):
    y = np.asarray(x, dtype=np.float64)
    for b0, b1, b2, a1, a2 in k_weighting_coefficients(sr):
        y = kernels.biquad(y, b0, b1, b2, a1, a2)
    return y


def loudness(buf: AudioBuffer):
    """Un-gated K-weighted level ``10 log10(mean(y^2)) - 0.691``."""
    if buf.duration < 0.4:
        raise TooShort(f"loudness needs at least 400 ms, got {buf.duration * 1000:.1f} ms")
    y = k_weight(buf.samples, buf.sample_rate)
    power = float(np.mean(y * y))
    if power <= 0:
        return -np.inf
    return 10.0 * np.log10(power) - 0.691


def loudness_error(pred: AudioBuffer, target: AudioBuffer):
    _pair(pred, target)
    lp, lt = loudness(pred), loudness(target)
    if lp == lt:
        return 0.0
    return float(abs(lp - lt))


def crest_factor(x):
    x = np.asarray(x, dtype=np.float64)
    rms = np.sqrt(np.mean(x * x)) if x.size else 0.0
    if rms <= 0:
        raise SilentSignal("crest factor of a silent signal is undefined")
    return 20.0 * np.log10(np.max(np.abs(x)) / rms)


def crest_factor_error(pred, target):
    p, t, _ = _pair(pred, target)
    return float(abs(crest_factor(p) - crest_factor(t)))


def rms_energy_error(pred, target, frame=2048, hop=512, eps=1e-9):
    """Mean absolute difference of per-frame RMS levels in dB."""
    p, t, _ = _pair(pred, target)
    if p.size < frame:
        raise TooShort(f"{p.size} samples is shorter than one {frame}-sample frame")
    fp = dsp.frame_signal(p, frame, hop)
    ft = dsp.frame_signal(t, frame, hop)
    lp = 20.0 * np.log10(np.sqrt(np.mean(fp * fp, axis=1)) + eps)
    lt = 20.0 * np.log10(np.sqrt(np.mean(ft * ft, axis=1)) + eps)
    return float(np.mean(np.abs(lp - lt)))


# -------------------------------------------------------------- transients

TRANSIENT_FFT = 1024
TRANSIENT_HOP = 256
TRANSIENT_REGION_S = 0.05
# flux must also exceed this fraction of the mean frame magnitude, so that
# stationary signals whose flux is pure numerical ripple yield no onsets
TRANSIENT_FLOOR = 0.05


def spectral_flux(x, fft_size=TRANSIENT_FFT, hop=TRANSIENT_HOP):
    """Half-wave rectified magnitude increase per frame; frame 0 has flux 0."""
    mag = np.abs(dsp.stft_frames(np.asarray(x, dtype=np.float64), fft_size, hop))
    flux = np.zeros(mag.shape[0])
    if mag.shape[0] > 1:
        flux[1:] = np.maximum(mag[1:] - mag[:-1], 0.0).sum(axis=1)
    return flux, mag


def detect_onsets(x, fft_size=TRANSIENT_FFT, hop=TRANSIENT_HOP):
    """Frame indices whose flux exceeds ``median + 2 * MAD`` and the stationarity floor."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < fft_size:
        return np.zeros(0, dtype=int)
    flux, mag = spectral_flux(x, fft_size, hop)
    med = np.median(flux)
    mad = np.median(np.abs(flux - med))
    floor = TRANSIENT_FLOOR * float(mag.sum(axis=1).mean())
    return np.flatnonzero((flux > med + 2.0 * mad) & (flux > floor))


def transient_mask(x, sr, fft_size=TRANSIENT_FFT, hop=TRANSIENT_HOP):
    """Boolean mask of samples inside a region opened by an onset frame.

    A region starts at the centre of its onset frame, the usual time stamp
    of a non-centred analysis frame.
    """
    x = np.asarray(x)
    mask = np.zeros(x.size, dtype=bool)
    width = int(round(TRANSIENT_REGION_S * sr))
    for t in detect_onsets(x, fft_size, hop):
        start = t * hop + fft_size // 2
        mask[start:start + width] = True
    return mask


def transient_error(pred, target):
    p, t, sr = _pair(pred, target)
    mask = transient_mask(t, sr)
    if not mask.any():
        return 0.0
    return float(np.mean(np.abs(p[mask] - t[mask])))


# ---------------------------------------------------------------- centroid


def spectral_centroid_error(pred, target, fft_size=2048, hop=512):
    p, t, sr = _pair(pred, target)
    if p.size < fft_size:
        raise TooShort(f"{p.size} samples is shorter than fft size {fft_size}")
    cp = dsp.spectral_centroid_frames(dsp.stft(AudioBuffer(p, sr), fft_size, hop))
    ct = dsp.spectral_centroid_frames(dsp.stft(AudioBuffer(t, sr), fft_size, hop))
    return float(np.mean(np.abs(cp - ct)))


# ------------------------------------------------------------------ report


def metric_report(pred: AudioBuffer, target: AudioBuffer, names=METRIC_NAMES):
    """Compute the requested metrics as a ``{name: value}`` dict."""
    fns = {
        "esr": lambda: losses.esr(pred, target)[0],
        "loudness_db": lambda: loudness_error(pred, target),
        "crest_db": lambda: crest_factor_error(pred, target),
        "rms_db": lambda: rms_energy_error(pred, target),
        "transient": lambda: transient_error(pred, target),
        "centroid_hz": lambda: spectral_centroid_error(pred, target),
    }
    out = {}
    for name in names:
        if name not in fns:
            raise ValueError(f"unknown metric {name!r}")
        out[name] = float(fns[name]())
    return out
