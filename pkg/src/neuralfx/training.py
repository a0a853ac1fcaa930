"""Training, evaluation and analysis workflows driven by a :class:`TrainConfig`.

Training is strictly sequential and seeded, so a config and seed reproduce
the same checkpoint bytes and loss columns on one platform.

Batch regime: each optimizer step sees ``batch_size`` segments. The loss of
a step is the configured loss on the concatenation of the batch's
predictions and targets, which keeps normalized terms such as ESR stable
on quiet chunks. Items are run one at a time and their gradients summed.

* CNN backbones process each segment with its receptive-field context and
  take one step per batch.
* Recurrent backbones first run over the context without gradients to warm
  up the state, then walk the segment in ``tbptt_len`` chunks, taking one
  step per chunk and carrying the (detached) state across chunks.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import analysis, nn
from .audio_io import (AudioBuffer, load_manifest, load_pair, normalize_condition,
                       segment_dataset)
from .backbones import Model, build_model
from .checkpoint import checkpoint_bytes, load_checkpoint
from .config import TrainConfig
from .effects import EffectProcessor
from .errors import EmptySplit, NonFiniteLoss, SampleRateMismatch, SilentTarget
from .losses import composite_loss
from .metrics import METRIC_NAMES, metric_report

LOG_COLUMNS = ("step", "train_loss", "valid_loss", "wall_ms")
EVAL_CHUNK = 16384


@dataclass
class TrainResult:
    model: Model
    checkpoint_path: Path
    log_path: Path
    metrics_path: Path
    best_valid: float | None
    steps: int


class _Batches:
    """Endless stream of index batches; each epoch is a fresh seeded permutation."""

    def __init__(self, n, batch_size, rng):
        self.n, self.batch_size, self.rng = n, batch_size, rng
        self.order, self.pos = rng.permutation(n), 0

    def next(self):
        out = []
        while len(out) < self.batch_size:
            if self.pos == self.n:
                self.order, self.pos = self.rng.permutation(self.n), 0
            out.append(int(self.order[self.pos]))
            self.pos += 1
        return out


def _fmt(v):
    return "" if v is None else repr(float(v))


def _write_config_echo(cfg: TrainConfig, out_dir: Path):
    (out_dir / "config.yml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))


def _batch_step(model, items, loss_spec, step):
    """One optimizer step's worth of gradient.

    Each ``(x, target, cond, state, crop)`` item runs on its own tape; the
    loss is taken on the concatenation and backpropagated into every tape.
    Returns ``(loss, new_states)``, with ``loss`` None when the batch target
    is silent.
    """
    tapes, preds, targets, states = [], [], [], []
    for x, target, cond, state, crop in items:
        with nn.Tape() as tape:
            y, new_state = model(x, cond, state)
            if crop:
                y = nn.take(y, slice(crop, None))
        tapes.append((tape, y))
        preds.append(y.data.astype(np.float64))
        targets.append(target)
        states.append(new_state)
    try:
        value, grad = composite_loss(loss_spec, np.concatenate(preds), np.concatenate(targets))
    except SilentTarget:
        return None, states
    if not np.isfinite(value):
        raise NonFiniteLoss(step, value)
    pos = 0
    for tape, y in tapes:
        n = y.shape[0]
        tape.backward(y, grad[pos:pos + n])
        pos += n
    return value, states


def validation_loss(model, manifest, loss_spec, indices, ranges=None):
    """Mean training loss over whole entries rendered with streaming forward."""
    values = []
    for idx in indices:
        x, y = load_pair(manifest, idx)
        cond = normalize_condition(ranges or manifest.condition_ranges,
                                   manifest.entries[idx].condition_raw)
        pred = render(model, x, cond)
        values.append(composite_loss(loss_spec, pred, y)[0])
    return float(np.mean(values))


def render(model: Model, x: AudioBuffer, cond, chunk=EVAL_CHUNK) -> AudioBuffer:
    """Streaming forward over ``x`` in fixed chunks with carried state."""
    state, parts = None, []
    for start in range(0, len(x), chunk):
        y, state = model.forward(AudioBuffer(x.samples[start:start + chunk], x.sample_rate),
                                 cond, state)
        parts.append(y.samples)
    return AudioBuffer(np.concatenate(parts), x.sample_rate)


def train(cfg: TrainConfig) -> TrainResult:
    t0 = time.perf_counter()
    spec, tr, data = cfg.model, cfg.train, cfg.data
    manifest = load_manifest(data.manifest)
    if manifest.sample_rate != spec.sample_rate:
        raise SampleRateMismatch(f"model {spec.sample_rate} Hz, data {manifest.sample_rate} Hz")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_config_echo(cfg, out_dir)

    segments, _ = segment_dataset(manifest, "train", data.segment_len, data.context_len, data.hop)
    segments = [s for s in segments if float(np.dot(s.target, s.target)) > 1e-12]
    if not segments:
        raise EmptySplit("the train split has no usable (non-silent) segments")
    valid_idx = manifest.split_entries("valid")

    model = build_model(spec, seed=tr.seed, dtype=np.float32)
    opt = nn.Adam(model.parameters(), lr=tr.lr)
    batches = _Batches(len(segments), tr.batch_size, np.random.default_rng(tr.seed))
    echo = cfg.to_dict()
    meta = dict(condition_ranges=manifest.condition_ranges,
                condition_names=manifest.condition_names)

    log_path = out_dir / "log.csv"
    ckpt_path = out_dir / "best.nfxc"
    best_valid, best_bytes = None, checkpoint_bytes(model, echo, **meta)
    step = 0

    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)

        def finish_step(value):
            nonlocal step, best_valid, best_bytes
            if tr.grad_clip_norm:
                nn.clip_grad_norm(model.parameters(), tr.grad_clip_norm)
            opt.step()
            step += 1
            if tr.lr_decay_every and step % tr.lr_decay_every == 0:
                opt.set_lr(opt.lr * tr.lr_decay_factor)
            valid = None
            if valid_idx and (step % tr.valid_every == 0 or step == tr.max_steps):
                valid = validation_loss(model, manifest, cfg.loss, valid_idx)
                if best_valid is None or valid < best_valid:
                    best_valid, best_bytes = valid, checkpoint_bytes(model, echo, **meta)
            writer.writerow([step, _fmt(value), _fmt(valid),
                             f"{(time.perf_counter() - t0) * 1000:.1f}"])

        while step < tr.max_steps:
            batch = [segments[i] for i in batches.next()]
            if spec.family == "cnn":
                items = [(s.input, s.target, s.condition, None, data.context_len) for s in batch]
                opt.zero_grad()
                value, _ = _batch_step(model, items, cfg.loss, step + 1)
                if value is not None:
                    finish_step(value)
                continue
            states = []
            with nn.no_grad():
                for s in batch:
                    ctx = s.input[:data.context_len]
                    states.append(model(ctx, s.condition)[1] if len(ctx) else None)
            body = [s.input[data.context_len:] for s in batch]
            for start in range(0, data.segment_len, tr.tbptt_len):
                if step >= tr.max_steps:
                    break
                sl = slice(start, start + tr.tbptt_len)
                items = [(b[sl], s.target[sl], s.condition, st, 0)
                         for b, s, st in zip(body, batch, states)]
                opt.zero_grad()
                value, states = _batch_step(model, items, cfg.loss, step + 1)
                if value is not None:
                    finish_step(value)

    if not valid_idx:
        # without a validation split the final parameters are kept
        best_bytes = checkpoint_bytes(model, echo, **meta)
    ckpt_path.write_bytes(best_bytes)

    metrics_path = out_dir / "metrics.json"
    best = load_checkpoint(ckpt_path)
    try:
        evaluate(best, manifest, cfg.eval.split, cfg.eval.metrics, out_path=metrics_path)
    except EmptySplit as exc:
        metrics_path.write_text(json.dumps({"split": cfg.eval.split, "error": str(exc)},
                                           indent=2, sort_keys=True) + "\n")
    return TrainResult(best, ckpt_path, log_path, metrics_path, best_valid, step)


# ---------------------------------------------------------------- evaluate


def evaluate(model, manifest, split="test", metrics=METRIC_NAMES, out_path=None):
    """Render every entry of ``split`` and compute per-entry and mean metrics."""
    if not isinstance(model, Model):
        model = load_checkpoint(model)
    if not hasattr(manifest, "entries"):
        manifest = load_manifest(manifest)
    if manifest.sample_rate != model.spec.sample_rate:
        raise SampleRateMismatch(
            f"checkpoint is {model.spec.sample_rate} Hz, manifest is {manifest.sample_rate} Hz")
    indices = manifest.split_entries(split)
    if not indices:
        raise EmptySplit(f"split {split!r} has no entries")
    header = getattr(model, "checkpoint", None) or {}
    ranges = [tuple(r) for r in header.get("condition_ranges") or manifest.condition_ranges]
    entries = []
    for idx in indices:
        e = manifest.entries[idx]
        x, y = load_pair(manifest, idx)
        pred = render(model, x, normalize_condition(ranges, e.condition_raw))
        row = {"index": idx, "input": e.input_path.name, "target": e.target_path.name,
               "condition": list(e.condition_raw)}
        row.update(metric_report(pred, y, metrics))
        entries.append(row)
    aggregate = {m: float(np.mean([r[m] for r in entries])) for m in metrics}
    report = {"split": split, "entries": entries, "aggregate": aggregate}
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


# ----------------------------------------------------------------- analyze


class ModelProcessor:
    """A trained model behind the processor contract; ``cond`` holds raw knob values."""

    def __init__(self, model: Model):
        self.model = model
        self.sample_rate = model.spec.sample_rate
        header = getattr(model, "checkpoint", None) or {}
        self.ranges = [tuple(r) for r in header.get("condition_ranges") or []]

    def process(self, buf, cond):
        cond = np.asarray(cond, dtype=np.float64).reshape(-1)
        if self.ranges:
            cond = normalize_condition(self.ranges, cond)
        return render(self.model, buf, cond)


PROBES = ("harmonic", "sweep", "compare")


def make_processor(source, sample_rate=None):
    if isinstance(source, str):
        return EffectProcessor(source, sample_rate or 48000)
    if isinstance(source, Model):
        return ModelProcessor(source)
    return source


def analyze(source, probe, out_dir, cond=(), **args):
    """Run one probe on a checkpoint model, an effect name or a processor.

    Writes ``<probe>.csv``, ``<probe>.svg`` and ``<probe>.json`` (a summary) to
    ``out_dir`` and returns the summary.
    """
    if probe not in PROBES:
        raise ValueError(f"unknown probe {probe!r}; choose from {PROBES}")
    proc = make_processor(source, args.pop("sample_rate", None))
    sr = proc.sample_rate or 48000
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cond = list(cond)
    if probe == "harmonic":
        report = analysis.harmonic_response(proc, args.get("f0", 1000.0),
                                            args.get("levels", (-18.0, -12.0, -6.0)), cond, sr)
        summary = {"f0": report.f0, "sample_rate": sr, "levels_dbfs": report.levels_dbfs,
                   "harmonics_dbfs": [h.tolist() for h in report.harmonics_dbfs],
                   "harmonics_db": [h.tolist() for h in report.harmonics_db], "thd": report.thd}
    elif probe == "sweep":
        report = analysis.sweep_response(proc, args.get("f1", 20.0), args.get("f2"),
                                         args.get("duration", 5.0), cond, sr)
        summary = {"f1": report.f1, "f2": report.f2, "sample_rate": sr,
                   "aliasing_ratio": report.aliasing_ratio,
                   "inside_energy": report.inside_energy, "outside_energy": report.outside_energy}
    else:
        x = args.get("input")
        if x is None:
            f0, level = args.get("f0", 1000.0), args.get("level", -6.0)
            t = np.arange(int(sr)) / sr
            x = AudioBuffer(10.0 ** (level / 20.0) * np.sin(2 * np.pi * f0 * t), sr)
        pred = proc.process(x, cond)
        target = args.get("target")
        if target is None:
            effect = args.get("target_effect")
            target = EffectProcessor(effect).process(x, cond) if effect else x
        report = analysis.waveform_compare(pred, target, (args.get("start", 0), args.get("length")))
        summary = {"rows": len(report),
                   "max_abs_diff": float(np.max(np.abs(report.diff))) if len(report) else 0.0}
    analysis.export_report(report, out_dir / f"{probe}.csv")
    analysis.export_report(report, out_dir / f"{probe}.svg")
    (out_dir / f"{probe}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


__all__ = ["TrainResult", "train", "evaluate", "analyze", "render", "validation_loss",
           "ModelProcessor", "make_processor", "PROBES"]
