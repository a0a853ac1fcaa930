"""Training objectives with analytic gradients.

Every loss takes ``(pred, target)`` as :class:`AudioBuffer` or 1-D arrays and
returns ``(value, grad)`` where ``grad`` is ``dL/dpred`` as a float64 array.
Spectral losses share the STFT conventions of :mod:`neuralfx.dsp` and push
their gradients back through :func:`neuralfx.dsp.stft_adjoint`.

The complex STFT loss and the pre-emphasis variants are reconstructions:
the complex loss is the mean absolute difference of real and imaginary
parts, and ``lowpassed_highpass`` is a first-order high-pass followed by a
one-pole low-pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsp, kernels
from .audio_io import AudioBuffer
from .errors import ConfigError, LengthMismatch, SignalTooShort, SilentTarget

EPS_LOG = 1e-7
TERM_KINDS = ("esr", "mae", "mrstft", "stft_complex", "dc")
TIME_TERMS = ("esr", "mae", "dc")
DEFAULT_RESOLUTIONS = ((512, 128), (1024, 256), (2048, 512))
PRE_EMPHASIS_KINDS = ("none", "highpass", "lowpassed_highpass")


def _pair(pred, target):
    p = pred.samples if isinstance(pred, AudioBuffer) else np.asarray(pred, dtype=np.float64)
    t = target.samples if isinstance(target, AudioBuffer) else np.asarray(target, dtype=np.float64)
    p = p.astype(np.float64, copy=False).reshape(-1)
    t = t.astype(np.float64, copy=False).reshape(-1)
    if p.shape != t.shape:
        raise LengthMismatch(f"pred has {p.size} samples, target {t.size}")
    if p.size < 1:
        raise LengthMismatch("signals are empty")
    return p, t


def _energy(t):
    e = float(np.dot(t, t))
    if e <= 1e-12:
        raise SilentTarget(f"target energy {e:.3g} is too small for a normalized loss")
    return e


# ------------------------------------------------------------ time domain


def esr(pred, target):
    """Error-to-signal ratio ``sum((t - p)^2) / sum(t^2)``."""
    p, t = _pair(pred, target)
    den = _energy(t)
    d = t - p
    return float(np.dot(d, d) / den), -2.0 * d / den


def dc_loss(pred, target):
    """``(mean(t) - mean(p))^2 / mean(t^2)``."""
    p, t = _pair(pred, target)
    n = t.size
    den = _energy(t) / n
    diff = t.mean() - p.mean()
    return float(diff * diff / den), np.full(n, -2.0 * diff / (den * n))


def mae(pred, target):
    """Mean absolute error; the subgradient is 0 at exact ties."""
    p, t = _pair(pred, target)
    d = p - t
    return float(np.mean(np.abs(d))), np.sign(d) / d.size


# ----------------------------------------------------------- spectral


def _spectra(p, t, fft_size, hop):
    if p.size < fft_size:
        raise SignalTooShort(f"{p.size} samples is shorter than fft size {fft_size}")
    return dsp.stft_frames(p, fft_size, hop), dsp.stft_frames(t, fft_size, hop)


def _single_resolution(p, t, fft_size, hop):
    P, T = _spectra(p, t, fft_size, hop)
    mp, mt = np.abs(P), np.abs(T)
    diff = mt - mp
    dnorm = float(np.sqrt(np.sum(diff * diff)))
    tnorm = max(float(np.sqrt(np.sum(mt * mt))), EPS_LOG)
    sc = dnorm / tnorm
    logdiff = np.log(mt + EPS_LOG) - np.log(mp + EPS_LOG)
    lm = float(np.mean(np.abs(logdiff)))

    g_mag = np.zeros_like(mp)
    if dnorm > 0:
        g_mag -= diff / (dnorm * tnorm)
    g_mag -= np.sign(logdiff) / (mp + EPS_LOG) / logdiff.size
    # d|P|/dP is P/|P|; at |P| = 0 the magnitude is not differentiable and we take 0
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mp > 0, P / np.where(mp > 0, mp, 1.0), 0.0)
    grad = dsp.stft_adjoint(g_mag * unit, fft_size, hop, p.size)
    return sc + lm, grad


def mrstft(pred, target, resolutions=DEFAULT_RESOLUTIONS):
    """Multi-resolution STFT loss: spectral convergence plus log-magnitude L1, averaged."""
    p, t = _pair(pred, target)
    resolutions = [tuple(r) for r in resolutions]
    if not resolutions:
        raise ValueError("at least one resolution is required")
    longest = max(f for f, _ in resolutions)
    if p.size < longest:
        raise SignalTooShort(f"{p.size} samples is shorter than fft size {longest}")
    total, grad = 0.0, np.zeros_like(p)
    for fft_size, hop in resolutions:
        v, g = _single_resolution(p, t, fft_size, hop)
        total += v
        grad += g
    n = len(resolutions)
    return total / n, grad / n


def stft_complex(pred, target, fft_size=1024, hop=256):
    """Mean over frames and bins of ``|Re(T - P)| + |Im(T - P)|``."""
    p, t = _pair(pred, target)
    P, T = _spectra(p, t, fft_size, hop)
    D = T - P
    value = float(np.mean(np.abs(D.real) + np.abs(D.imag)))
    G = -(np.sign(D.real) + 1j * np.sign(D.imag)) / D.size
    return value, dsp.stft_adjoint(G, fft_size, hop, p.size)


# -------------------------------------------------------- pre-emphasis


@dataclass(frozen=True)
class PreEmphasis:
    kind: str = "none"
    coeff: float = 0.85
    lp_coeff: float = 0.85

    def __post_init__(self):
        if self.kind not in PRE_EMPHASIS_KINDS:
            raise ConfigError(f"unknown pre-emphasis kind {self.kind!r}")

    def apply(self, x):
        if self.kind == "none":
            return x
        y = dsp.one_pole_filter(x, "highpass_pre_emph", self.coeff)
        if self.kind == "lowpassed_highpass":
            y = dsp.one_pole_filter(y, "lowpass", self.lp_coeff)
        return y

    def transpose(self, g):
        """Apply the adjoint filter chain to a gradient."""
        if self.kind == "none":
            return g
        g = np.asarray(g, dtype=np.float64)
        if self.kind == "lowpassed_highpass":
            g = kernels.one_pole_lowpass(g[::-1].copy(), float(self.lp_coeff))[::-1]
        out = g.copy()
        out[:-1] -= self.coeff * g[1:]
        return out


@dataclass(frozen=True)
class LossSpec:
    terms: tuple = (("esr", 1.0),)
    pre_emphasis: PreEmphasis = field(default_factory=PreEmphasis)
    resolutions: tuple = DEFAULT_RESOLUTIONS
    stft_fft_size: int = 1024
    stft_hop: int = 256
    emphasize_spectral: bool = False

    def __post_init__(self):
        terms = tuple((str(k), float(w)) for k, w in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "resolutions", tuple(tuple(int(v) for v in r) for r in self.resolutions))
        if not terms:
            raise ConfigError("loss needs at least one term")
        for kind, w in terms:
            if kind not in TERM_KINDS:
                raise ConfigError(f"unknown loss term {kind!r}")
            if not np.isfinite(w) or w < 0:
                raise ConfigError(f"loss weight for {kind} must be finite and >= 0, got {w}")
        if not any(w > 0 for _, w in terms):
            raise ConfigError("at least one loss term needs a positive weight")

    def to_dict(self):
        return {"terms": [{"kind": k, "weight": w} for k, w in self.terms],
                "pre_emphasis": {"kind": self.pre_emphasis.kind, "coeff": self.pre_emphasis.coeff,
                                 "lp_coeff": self.pre_emphasis.lp_coeff},
                "resolutions": [list(r) for r in self.resolutions],
                "stft_fft_size": self.stft_fft_size, "stft_hop": self.stft_hop,
                "emphasize_spectral": self.emphasize_spectral}

    @property
    def min_length(self):
        """Shortest signal every term accepts."""
        n = 1
        for kind, _ in self.terms:
            if kind == "mrstft":
                n = max(n, max(f for f, _ in self.resolutions))
            elif kind == "stft_complex":
                n = max(n, self.stft_fft_size)
        return n


def apply_pre_emphasis(spec: LossSpec, pred, target):
    """Filter both signals with the pre-emphasis chain of a LossSpec."""
    return spec.pre_emphasis.apply(pred), spec.pre_emphasis.apply(target)


def _term(spec, kind, p, t):
    if kind == "esr":
        return esr(p, t)
    if kind == "mae":
        return mae(p, t)
    if kind == "dc":
        return dc_loss(p, t)
    if kind == "mrstft":
        return mrstft(p, t, spec.resolutions)
    return stft_complex(p, t, spec.stft_fft_size, spec.stft_hop)


def composite_loss(spec: LossSpec, pred, target):
    """Weighted sum of a LossSpec's terms with the summed gradient."""
    p, t = _pair(pred, target)
    pe, te = apply_pre_emphasis(spec, p, t)
    total, g_plain, g_emph = 0.0, np.zeros_like(p), np.zeros_like(p)
    for kind, w in spec.terms:
        if w == 0:
            continue
        emph = kind in TIME_TERMS or spec.emphasize_spectral
        v, g = _term(spec, kind, pe, te) if emph else _term(spec, kind, p, t)
        total += w * v
        if emph:
            g_emph += w * g
        else:
            g_plain += w * g
    return total, g_plain + spec.pre_emphasis.transpose(g_emph)
