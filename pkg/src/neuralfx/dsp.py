"""FFT/STFT, Hann windows, probe signals and first-order filters.

Conventions shared by every consumer: periodic Hann window, frames start at
``t * hop`` with no centering or end padding (a trailing partial frame is
dropped), one-sided spectra of real signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .audio_io import AudioBuffer
from .errors import CoefficientOutOfRange, FrequencyOutOfRange, NonPowerOfTwo, SignalTooShort


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size):
    return np.exp(-2j * np.pi * np.arange(size // 2) / size)


def fft(x):
    """Unnormalized radix-2 DFT along the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise NonPowerOfTwo(f"FFT length {n} is not a power of two")
    lead = x.shape[:-1]
    out = x[..., _bit_reverse(n)]
    size = 2
    while size <= n:
        half = size // 2
        out = out.reshape(*lead, n // size, size)
        even = out[..., :half]
        odd = out[..., half:] * _twiddles(size)
        out = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return out.reshape(*lead, n)


def ifft(X):
    """Inverse of :func:`fft` (carries the 1/N factor)."""
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.shape[-1]


def rfft(x):
    """One-sided spectrum (bins ``0..N/2``) of real input."""
    n = np.shape(x)[-1]
    return fft(x)[..., :n // 2 + 1]


@lru_cache(maxsize=None)
def _hann_cached(n):
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


def hann(n):
    """Periodic Hann window of length ``n``."""
    return _hann_cached(int(n))


def num_frames(length, fft_size, hop):
    return 0 if length < fft_size else (length - fft_size) // hop + 1


def frame_signal(x, fft_size, hop):
    """View of ``x`` as ``(num_frames, fft_size)`` frames starting at ``t * hop``."""
    x = np.asarray(x)
    if x.shape[-1] < fft_size:
        raise SignalTooShort(f"signal of {x.shape[-1]} samples is shorter than fft_size {fft_size}")
    return np.lib.stride_tricks.sliding_window_view(x, fft_size, axis=-1)[..., ::hop, :]


def stft_frames(x, fft_size, hop):
    """Complex one-sided STFT of an ndarray, shape ``(frames, fft_size//2 + 1)``."""
    if not is_power_of_two(fft_size):
        raise NonPowerOfTwo(f"fft_size {fft_size} is not a power of two")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    return rfft(frame_signal(x, fft_size, hop) * hann(fft_size))


def stft_adjoint(grad, fft_size, hop, length):
    """Map a gradient wrt STFT bins back to the time signal.

    ``grad`` holds ``dL/dRe(X) + 1j * dL/dIm(X)`` per one-sided bin. Returns
    ``dL/dx`` of length ``length`` for real ``x``.
    """
    frames = grad.shape[0]
    full = np.zeros((frames, fft_size), dtype=np.complex128)
    full[:, :fft_size // 2 + 1] = grad
    # d Re/Im(X_k) / dx_n = w_n cos / -w_n sin  ->  w_n * Re(sum_k G_k e^{+i 2 pi k n / N})
    per_frame = (ifft(full).real * fft_size) * hann(fft_size)
    out = np.zeros(length)
    for t in range(frames):
        out[t * hop:t * hop + fft_size] += per_frame[t]
    return out


@dataclass(frozen=True, eq=False)
class Spectrogram:
    frames: np.ndarray
    fft_size: int
    hop: int
    sample_rate: int
    window: str = "hann"

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def bin_freqs(self):
        return np.arange(self.fft_size // 2 + 1) * self.sample_rate / self.fft_size

    @property
    def frame_times(self):
        """Centre time (seconds) of each frame."""
        return (np.arange(self.num_frames) * self.hop + self.fft_size / 2) / self.sample_rate


def stft(buf: AudioBuffer, fft_size: int, hop: int) -> Spectrogram:
    """Hann-windowed, non-centred STFT of a buffer."""
    return Spectrogram(stft_frames(buf.samples, fft_size, hop), fft_size, hop, buf.sample_rate)


# ----------------------------------------------------------------- probes


def _check_freq(freq, sr):
    if not 0 < freq < sr / 2:
        raise FrequencyOutOfRange(f"frequency {freq} Hz outside (0, {sr / 2}) Hz")


def generate_sine(freq, amplitude, duration, sr) -> AudioBuffer:
    _check_freq(freq, sr)
    n = np.arange(int(round(duration * sr)))
    return AudioBuffer(amplitude * np.sin(2.0 * np.pi * freq * n / sr), sr)


def generate_exp_sweep(f1, f2, duration, sr):
    """Exponential sine sweep and its per-sample instantaneous frequency."""
    _check_freq(f1, sr)
    _check_freq(f2, sr)
    if not f1 < f2:
        raise FrequencyOutOfRange("sweep needs f1 < f2")
    rate = math.log(f2 / f1) / duration
    t = np.arange(int(round(duration * sr))) / sr
    x = np.sin(2.0 * np.pi * f1 / rate * np.expm1(t * rate))
    return AudioBuffer(x, sr), f1 * np.exp(t * rate)


# ---------------------------------------------------------------- filters


def one_pole_filter(buf, kind, coeff=0.85):
    """First-order pre-emphasis high-pass or one-pole low-pass.

    ``highpass_pre_emph``: ``y[n] = x[n] - coeff * x[n-1]``.
    ``lowpass``: ``y[n] = (1 - coeff) * x[n] + coeff * y[n-1]``.
    Accepts an :class:`AudioBuffer` or an ndarray and returns the same kind.
    """
    x = buf.samples if isinstance(buf, AudioBuffer) else np.asarray(buf, dtype=np.float64)
    if kind == "highpass_pre_emph":
        if not 0.0 <= coeff < 1.0:
            raise CoefficientOutOfRange(f"pre-emphasis coefficient {coeff} outside [0, 1)")
        y = x.copy()
        y[1:] -= coeff * x[:-1]
    elif kind == "lowpass":
        if not abs(coeff) < 1.0:
            raise CoefficientOutOfRange(f"low-pass coefficient {coeff} outside (-1, 1)")
        y = kernels.one_pole_lowpass(x, float(coeff))
    else:
        raise ValueError(f"unknown filter kind {kind!r}")
    return AudioBuffer(y, buf.sample_rate) if isinstance(buf, AudioBuffer) else y


def spectral_centroid_frames(spec: Spectrogram) -> np.ndarray:
    """Magnitude-weighted mean frequency per frame; silent frames give 0 Hz."""
    mag = np.abs(spec.frames)
    total = mag.sum(axis=1)
    weighted = mag @ spec.bin_freqs
    out = np.zeros(spec.num_frames)
    ok = total >= 1e-12
    out[ok] = weighted[ok] / total[ok]
    return out
