"""Probe any processor with test signals: harmonic response, sine sweep, waveform comparison.

A processor is anything with ``process(AudioBuffer, cond) -> AudioBuffer``.

The aliasing ratio is this toolkit's own scalar for fold-back: the energy
of a swept-sine response outside a mask around the harmonics of the
instantaneous sweep frequency, relative to the energy inside it. Every
harmonic below Nyquist is in the mask: a strongly saturating effect keeps
real harmonics well above the noise floor far past the tenth, and leaving
them out would count them as fold-back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp, plotting
from .audio_io import AudioBuffer
from .errors import DegenerateEnergy, LengthMismatch, WindowOutOfRange

HARMONIC_FFT = 1 << 16
N_HARMONICS = 10
SETTLE_S = 0.5
SWEEP_FFT, SWEEP_HOP = 2048, 512
SEMITONE = 2.0 ** (1.0 / 12.0)
MASK_GUARD_BINS = 2  # half-width of the Hann main lobe, added around each semitone band
FLOOR_DB = -240.0


def _db(a):
    return 20.0 * np.log10(np.maximum(a, 10.0 ** (FLOOR_DB / 20.0)))


def _process(proc, buf, cond):
    out = proc.process(buf, cond)
    if len(out) != len(buf):
        raise LengthMismatch(f"processor returned {len(out)} samples for {len(buf)}")
    return out


# ---------------------------------------------------------------- harmonic


@dataclass
class HarmonicReport:
    f0: float
    sample_rate: int
    levels_dbfs: list
    bin_hz: np.ndarray
    spectra_db: list          # one-sided dBFS spectrum per level
    harmonics_dbfs: list      # absolute level of H1..HK per level
    harmonics_db: list        # H1..HK relative to H1 per level
    thd: list

    @property
    def n_harmonics(self):
        return len(self.harmonics_db[0]) if self.harmonics_db else 0


def snap_to_bin(f0, sr, fft_size=HARMONIC_FFT):
    k = max(1, int(round(f0 * fft_size / sr)))
    return k, k * sr / fft_size


def harmonic_response(proc, f0, levels_dbfs, cond, sample_rate=None) -> HarmonicReport:
    """Sine probes at each level; one Hann-windowed 2^16 frame after 0.5 s settling.

    ``f0`` is moved to the nearest bin of the analysis FFT. Levels are peak
    amplitudes in dBFS. The probe lasts at least 2 s and always long enough
    for the settle time plus one full frame.
    """
    sr = int(sample_rate or getattr(proc, "sample_rate", None) or 48000)
    N = HARMONIC_FFT
    k0, f0 = snap_to_bin(f0, sr)
    settle = int(round(SETTLE_S * sr))
    duration = max(2.0, (settle + N) / sr)
    n_total = max(int(round(duration * sr)), settle + N)
    w = dsp.hann(N)
    norm = 2.0 / w.sum()
    harmonics = [k for k in range(1, N_HARMONICS + 1) if k * k0 < N // 2]
    report = HarmonicReport(f0, sr, [float(v) for v in levels_dbfs], np.arange(N // 2 + 1) * sr / N,
                            [], [], [], [])
    t = np.arange(n_total) / sr
    for level in report.levels_dbfs:
        x = AudioBuffer(10.0 ** (level / 20.0) * np.sin(2 * np.pi * f0 * t), sr)
        y = _process(proc, x, cond).samples
        amp = np.abs(dsp.rfft(y[settle:settle + N] * w)) * norm
        a = amp[[k * k0 for k in harmonics]]
        report.spectra_db.append(_db(amp))
        report.harmonics_dbfs.append(_db(a))
        report.harmonics_db.append(_db(a) - _db(a[0]))
        report.thd.append(float(np.sqrt(np.sum(a[1:] ** 2)) / a[0]) if a[0] > 0 else float("inf"))
    return report


# ------------------------------------------------------------------- sweep


@dataclass
class SweepResult:
    spectrogram: dsp.Spectrogram
    aliasing_ratio: float
    mask: np.ndarray          # [frames, bins] True inside the harmonic tracks
    inside_energy: float
    outside_energy: float
    f1: float
    f2: float

    def __iter__(self):
        return iter((self.spectrogram, self.aliasing_ratio))


def harmonic_mask(f_lo, f_hi, fft_size, sr, n_harmonics=None):
    """Per-frame bins within one semitone of ``k * f`` for ``f`` in ``[f_lo, f_hi]``.

    ``f_lo``/``f_hi`` are the instantaneous frequencies at the first and last
    sample of each frame, so a frame covering a fast part of the sweep gets a
    band spanning everything its window saw. The band is widened by the
    Hann main lobe and stops at Nyquist. Harmonic ``k`` is tracked while
    ``k * f_lo`` is below Nyquist; ``n_harmonics`` caps ``k`` (default: no cap,
    so every harmonic the sample rate can represent counts as signal).
    """
    n_bins = fft_size // 2 + 1
    df = sr / fft_size
    mask = np.zeros((len(f_lo), n_bins), dtype=bool)
    for t, (fa, fb) in enumerate(zip(f_lo, f_hi)):
        k = 1
        while k * fa < 0.5 * sr and (n_harmonics is None or k <= n_harmonics):
            lo = int(np.floor(k * fa / SEMITONE / df)) - MASK_GUARD_BINS
            hi = int(np.ceil(k * fb * SEMITONE / df)) + MASK_GUARD_BINS
            mask[t, max(lo, 0):min(hi, n_bins - 1) + 1] = True
            k += 1
    return mask


def sweep_response(proc, f1=20.0, f2=None, duration=5.0, cond=(), sample_rate=None,
                   n_harmonics=None) -> SweepResult:
    """Exponential sweep through ``proc``; aliasing is the energy outside the harmonic tracks.

    ``aliasing_ratio = 10 log10(outside / inside)`` on the 2048/512 STFT of
    the output, with the mask from :func:`harmonic_mask`.
    """
    sr = int(sample_rate or getattr(proc, "sample_rate", None) or 48000)
    f2 = 0.45 * sr if f2 is None else float(f2)
    x, inst = dsp.generate_exp_sweep(f1, f2, duration, sr)
    y = _process(proc, x, cond)
    spec = dsp.stft(y, SWEEP_FFT, SWEEP_HOP)
    starts = np.arange(spec.num_frames) * SWEEP_HOP
    mask = harmonic_mask(inst[starts], inst[starts + SWEEP_FFT - 1], SWEEP_FFT, sr, n_harmonics)
    power = np.abs(spec.frames) ** 2
    inside = float(power[mask].sum())
    outside = float(power[~mask].sum())
    if inside <= 0:
        raise DegenerateEnergy("no energy inside the harmonic mask")
    ratio = 10.0 * np.log10(outside / inside) if outside > 0 else float("-inf")
    return SweepResult(spec, float(ratio), mask, inside, outside, float(f1), f2)


# ----------------------------------------------------------------- compare


@dataclass
class ComparisonTable:
    n: np.ndarray
    target: np.ndarray
    pred: np.ndarray
    diff: np.ndarray

    def rows(self):
        return list(zip(self.n.tolist(), self.target.tolist(), self.pred.tolist(), self.diff.tolist()))

    def __len__(self):
        return len(self.n)


def waveform_compare(pred: AudioBuffer, target: AudioBuffer, window=(0, None)) -> ComparisonTable:
    """Rows ``(n, target[n], pred[n], pred[n] - target[n])`` over ``window = (start, length)``."""
    if len(pred) != len(target):
        raise LengthMismatch(f"pred has {len(pred)} samples, target {len(target)}")
    start, length = window
    length = len(target) - start if length is None else length
    if start < 0 or length < 0 or start + length > len(target):
        raise WindowOutOfRange(f"window ({start}, {length}) outside 0..{len(target)}")
    sl = slice(start, start + length)
    p, t = pred.samples[sl], target.samples[sl]
    return ComparisonTable(np.arange(start, start + length), t.copy(), p.copy(), p - t)


# ------------------------------------------------------------------ export


def _fmt(v):
    return repr(float(v))


def export_report(report, path, format=None):
    """Write a report as CSV or SVG. ``format`` defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt not in ("csv", "svg"):
        raise ValueError(f"unknown report format {fmt!r}")
    if isinstance(report, HarmonicReport):
        (_harmonic_csv if fmt == "csv" else _harmonic_svg)(report, path)
    elif isinstance(report, SweepResult):
        (_sweep_csv if fmt == "csv" else _sweep_svg)(report, path)
    elif isinstance(report, ComparisonTable):
        (_compare_csv if fmt == "csv" else _compare_svg)(report, path)
    else:
        raise TypeError(f"cannot export {type(report).__name__}")


def _harmonic_csv(r, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["level_dbfs", "bin_hz", "mag_db"])
        for level, spec in zip(r.levels_dbfs, r.spectra_db):
            lv = _fmt(level)
            w.writerows((lv, _fmt(hz), _fmt(m)) for hz, m in zip(r.bin_hz, spec))


def _harmonic_svg(r, path):
    keep = (r.bin_hz > 0) & (r.bin_hz <= min(r.sample_rate / 2, (N_HARMONICS + 2) * r.f0))
    series = [(f"{lv:g} dBFS", r.bin_hz[keep], s[keep]) for lv, s in zip(r.levels_dbfs, r.spectra_db)]
    top = max(float(np.max(s)) for _, _, s in series) if series else 0.0
    plotting.line_plot(series, path, title=f"Harmonic response, f0 = {r.f0:.2f} Hz",
                       xlabel="frequency (Hz)", ylabel="magnitude (dBFS)", logx=True,
                       ylim=(top - 140.0, top + 5.0))


def _sweep_csv(r, path):
    spec = r.spectrogram
    mag = _db(np.abs(spec.frames) * 2.0 / dsp.hann(spec.fft_size).sum())
    hz = spec.bin_freqs
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["frame", "bin_hz", "mag_db", "in_mask"])
        for t in range(spec.num_frames):
            w.writerows((t, _fmt(b), _fmt(m), int(k)) for b, m, k in zip(hz, mag[t], r.mask[t]))


def _sweep_svg(r, path):
    spec = r.spectrogram
    mag = _db(np.abs(spec.frames) * 2.0 / dsp.hann(spec.fft_size).sum())
    mag = np.maximum(mag, mag.max() - 120.0)
    times = spec.frame_times
    plotting.heatmap(mag.T, path, title=f"Sweep response, aliasing ratio {r.aliasing_ratio:.1f} dB",
                     xlabel="time (s)", ylabel="frequency (Hz)",
                     extent=(float(times[0]), float(times[-1]), 0.0, spec.sample_rate / 2))


def _compare_csv(r, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["n", "target", "pred", "diff"])
        w.writerows((int(n), _fmt(t), _fmt(p), _fmt(d)) for n, t, p, d in r.rows())


def _compare_svg(r, path):
    series = [("target", r.n, r.target), ("pred", r.n, r.pred), ("diff", r.n, r.diff)] if len(r) else []
    plotting.line_plot(series, path, title="Waveform comparison", xlabel="sample", ylabel="amplitude")
