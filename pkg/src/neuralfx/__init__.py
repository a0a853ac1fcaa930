"""Neural audio effect modelling toolkit.

Black-box emulation of audio effects with convolutional and recurrent
backbones, conditioning mechanisms for effect knobs, spectral and
time-domain losses, evaluation metrics and system-analysis probes. The
numerical core is numpy plus a small compiled kernel module for the
sample-level recurrent loops (a pure-Python fallback is used when the
extension is unavailable or ``NFX_PURE_PYTHON=1``).
"""

from .analysis import (ComparisonTable, HarmonicReport, SweepResult, export_report,
                       harmonic_response, sweep_response, waveform_compare)
from .audio_io import (AudioBuffer, DatasetManifest, Entry, Segment, load_manifest,
                       normalize_condition, read_wav, save_manifest, segment_dataset, write_wav)
from .backbones import ModelSpec, build_model, receptive_field
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .config import TrainConfig, parse_config
from .dsp import (Spectrogram, fft, generate_exp_sweep, generate_sine, ifft, one_pole_filter,
                  spectral_centroid_frames, stft)
from .effects import (EffectProcessor, ff_compressor, hard_clip, one_pole_tone, render_dataset,
                      synth_corpus, tanh_drive)
from .kernels import BACKEND
from .losses import LossSpec, PreEmphasis, composite_loss, dc_loss, esr, mae, mrstft, stft_complex
from .metrics import (crest_factor_error, loudness_error, metric_report, rms_energy_error,
                      spectral_centroid_error, transient_error)
from .training import analyze, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "BACKEND", "ComparisonTable", "DatasetManifest", "EffectProcessor", "Entry",
    "HarmonicReport", "LossSpec", "ModelSpec", "PreEmphasis", "Segment", "Spectrogram",
    "SweepResult", "TrainConfig", "analyze", "build_model", "composite_loss",
    "crest_factor_error", "dc_loss", "esr", "evaluate", "export_report", "ff_compressor", "fft",
    "generate_exp_sweep", "generate_sine", "hard_clip", "harmonic_response", "ifft",
    "load_checkpoint", "load_manifest", "loudness_error", "mae", "metric_report", "mrstft",
    "normalize_condition", "one_pole_filter", "one_pole_tone", "parse_config", "read_checkpoint",
    "read_wav", "receptive_field", "render_dataset", "rms_energy_error", "save_checkpoint",
    "save_manifest", "segment_dataset", "spectral_centroid_error", "spectral_centroid_frames",
    "stft", "stft_complex", "sweep_response", "synth_corpus", "tanh_drive", "train",
    "transient_error", "waveform_compare", "write_wav",
]
