"""Deterministic reference effects, dataset rendering and a synthetic corpus.

The effects are ground truth for training data and oracles for analysis.
Knob-to-parameter mappings are fixed formulas:

* ``tanh_drive``: ``g = 1 + 19 * knob``, ``y = tanh(g x) / tanh(g)``
* ``hard_clip``: ``y = clamp(x, -thr, thr) / thr``
* ``one_pole_tone``: one-pole low-pass with coefficient ``0.99 * (1 - knob)``
* ``ff_compressor``: peak-envelope feed-forward compressor
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp, kernels
from .audio_io import AudioBuffer, DatasetManifest, Entry, read_wav, save_manifest, write_wav
from .errors import ConditionDimMismatch

COMPRESSOR_EPS = 1e-9


def tanh_drive(x: AudioBuffer, gain_knob: float) -> AudioBuffer:
    g = 1.0 + 19.0 * float(gain_knob)
    return AudioBuffer(np.tanh(g * x.samples) / np.tanh(g), x.sample_rate)


def hard_clip(x: AudioBuffer, threshold: float) -> AudioBuffer:
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return AudioBuffer(np.clip(x.samples, -threshold, threshold) / threshold, x.sample_rate)


def one_pole_tone(x: AudioBuffer, tone_knob: float) -> AudioBuffer:
    return dsp.one_pole_filter(x, "lowpass", 0.99 * (1.0 - float(tone_knob)))


def time_coeff(ms, sr):
    """One-pole smoothing coefficient ``exp(-1 / (tau * sr))``; 0 for an instant response."""
    if ms <= 0:
        return 0.0
    return float(np.exp(-1.0 / (ms * 1e-3 * sr)))


def compressor_envelope(x: AudioBuffer, attack_ms, release_ms):
    """Peak detector: ``e[n] = a e[n-1] + (1 - a)|x[n]|``, ``a`` = attack when rising."""
    sr = x.sample_rate
    return kernels.peak_envelope(np.abs(x.samples), time_coeff(attack_ms, sr),
                                 time_coeff(release_ms, sr))


def ff_compressor(x: AudioBuffer, threshold_db, ratio=4.0, attack_ms=5.0, release_ms=50.0):
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    env = compressor_envelope(x, attack_ms, release_ms)
    level = 20.0 * np.log10(env + COMPRESSOR_EPS)
    gain_db = np.minimum(0.0, (threshold_db - level) * (1.0 - 1.0 / ratio))
    return AudioBuffer(x.samples * 10.0 ** (gain_db / 20.0), x.sample_rate)


# ------------------------------------------------------------- processors


@dataclass(frozen=True)
class EffectDef:
    fn: object
    knob: str
    lo: float
    hi: float


EFFECTS = {
    "tanh_drive": EffectDef(tanh_drive, "gain", 0.0, 1.0),
    "hard_clip": EffectDef(hard_clip, "threshold", 0.01, 1.0),
    "one_pole_tone": EffectDef(one_pole_tone, "tone", 0.0, 1.0),
    "ff_compressor": EffectDef(ff_compressor, "threshold_db", -60.0, 0.0),
    "identity": EffectDef(lambda x, _k: x, "unused", 0.0, 1.0),
}


class EffectProcessor:
    """Wraps a reference effect in the processor contract ``process(buf, cond)``.

    ``cond`` holds the raw knob value (one entry).
    """

    def __init__(self, name, sample_rate=None):
        if name not in EFFECTS:
            raise ValueError(f"unknown effect {name!r}; choose from {sorted(EFFECTS)}")
        self.name = name
        self.sample_rate = sample_rate
        self.n_conds = 1

    def process(self, buf: AudioBuffer, cond) -> AudioBuffer:
        c = np.asarray(cond, dtype=np.float64).reshape(-1)
        if c.size != 1:
            raise ConditionDimMismatch(f"{self.name} takes one knob value, got {c.size}")
        return EFFECTS[self.name].fn(buf, float(c[0]))


class GainProcessor:
    """Linear gain, handy as an LTI probe target."""

    n_conds = 0

    def __init__(self, gain=1.0, sample_rate=None):
        self.gain = float(gain)
        self.sample_rate = sample_rate

    def process(self, buf, cond=()):
        return AudioBuffer(buf.samples * self.gain, buf.sample_rate)


# ----------------------------------------------------------- dataset render


def assign_splits(n_items, fractions, seed):
    """Per-item split labels; the item order is shuffled by ``seed``.

    Valid and test counts are ``round(fraction * n)``, raised to 1 for a
    nonzero fraction while at least one item is left for training. Train
    gets the rest.
    """
    f_train, f_valid, f_test = (float(f) for f in fractions)
    if min(f_train, f_valid, f_test) < 0 or abs(f_train + f_valid + f_test - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be >= 0 and sum to 1, got {fractions}")
    n_valid = int(round(f_valid * n_items))
    if f_valid > 0 and n_valid == 0 and n_items >= 2:
        n_valid = 1
    n_test = min(int(round(f_test * n_items)), n_items - n_valid)
    if f_test > 0 and n_test == 0 and n_items - n_valid >= 2:
        n_test = 1
    order = np.random.default_rng(seed).permutation(n_items)
    labels = ["train"] * n_items
    for rank, item in enumerate(order):
        if rank < n_valid:
            labels[item] = "valid"
        elif rank < n_valid + n_test:
            labels[item] = "test"
    return labels


def render_dataset(effect, grid, corpus, out_dir, split_fractions=(0.8, 0.1, 0.1), seed=0):
    """Render ``corpus x grid`` through a reference effect and write a manifest.

    Inputs are stored once per corpus item as float32 WAV. Targets are
    rendered from the stored (float32-rounded) input, so re-applying the
    effect to the file read back reproduces the target exactly.
    """
    name = effect if isinstance(effect, str) else effect.name
    proc = EffectProcessor(name)
    grid = [float(v) for v in grid]
    corpus = list(corpus)
    if not grid or not corpus:
        raise ValueError("render_dataset needs a nonempty corpus and knob grid")
    rates = {b.sample_rate for b in corpus}
    if len(rates) != 1:
        raise ValueError(f"corpus mixes sample rates {sorted(rates)}")
    sr = rates.pop()
    out = Path(out_dir)
    (out / "input").mkdir(parents=True, exist_ok=True)
    (out / "target").mkdir(parents=True, exist_ok=True)
    labels = assign_splits(len(corpus), split_fractions, seed)
    entries = []
    for i, buf in enumerate(corpus):
        ipath = out / "input" / f"item{i:04d}.wav"
        write_wav(ipath, buf, "float32")
        stored = read_wav(ipath)
        for j, knob in enumerate(grid):
            tpath = out / "target" / f"item{i:04d}_k{j:02d}.wav"
            write_wav(tpath, proc.process(stored, [knob]), "float32")
            entries.append(Entry(ipath, tpath, (knob,), labels[i]))
    manifest = DatasetManifest(sr, (EFFECTS[name].knob,), ((min(grid), max(grid)),),
                               tuple(entries), out)
    save_manifest(manifest, out / "manifest.json")
    return manifest


# --------------------------------------------------------------- corpus


def synth_corpus(total_seconds=60.0, item_seconds=3.0, sr=44100, seed=0):
    """Synthetic training material: sine bursts, noise bursts and click trains.

    Items cycle through the three kinds. Levels are drawn so that the drive
    effects see both their linear region and saturation.
    """
    rng = np.random.default_rng(seed)
    n_items = max(1, int(round(total_seconds / item_seconds)))
    n = int(round(item_seconds * sr))
    t = np.arange(n) / sr
    items = []
    for i in range(n_items):
        kind = i % 3
        x = np.zeros(n)
        if kind == 0:
            pos = 0
            while pos < n:
                length = int(rng.uniform(0.1, 0.5) * sr)
                f = np.exp(rng.uniform(np.log(60.0), np.log(2000.0)))
                amp = 10.0 ** rng.uniform(-1.5, -0.05)
                seg = slice(pos, min(n, pos + length))
                env = np.minimum(1.0, np.minimum(np.arange(seg.stop - seg.start),
                                                 np.arange(seg.stop - seg.start)[::-1]) / (0.005 * sr))
                x[seg] = amp * env * np.sin(2 * np.pi * f * t[seg] + rng.uniform(0, 2 * np.pi))
                pos += length + int(rng.uniform(0.0, 0.1) * sr)
        elif kind == 1:
            pos = 0
            while pos < n:
                length = int(rng.uniform(0.05, 0.4) * sr)
                amp = 10.0 ** rng.uniform(-1.5, -0.3)
                seg = slice(pos, min(n, pos + length))
                burst = rng.standard_normal(seg.stop - seg.start)
                burst = dsp.one_pole_filter(burst, "lowpass", rng.uniform(0.0, 0.9))
                x[seg] = amp * burst / max(1e-9, np.max(np.abs(burst)))
                pos += length + int(rng.uniform(0.02, 0.2) * sr)
        else:
            period = int(rng.uniform(0.02, 0.25) * sr)
            decay = np.exp(-np.arange(int(0.03 * sr)) / (rng.uniform(0.001, 0.01) * sr))
            for start in range(int(rng.uniform(0, period)), n, period):
                amp = 10.0 ** rng.uniform(-1.2, 0.0) * rng.choice([-1.0, 1.0])
                seg = slice(start, min(n, start + decay.size))
                x[seg] += amp * decay[:seg.stop - seg.start]
            x = np.clip(x, -1.0, 1.0)
        items.append(AudioBuffer(x, sr))
    return items
