"""YAML run configuration: parsing, defaults and validation.

Unknown keys are errors, so a misspelled option never silently falls back to
its default. Relative paths resolve against the config file's directory.

Defaults
========

======================  =========================================
key                     default
======================  =========================================
model.conditioning      concat
model.n_conds           taken from the manifest
model.sample_rate       taken from the manifest
loss.terms              ``[{kind: esr, weight: 1.0}]``
loss.pre_emphasis       ``{kind: none}``
loss.resolutions        ``[[512, 128], [1024, 256], [2048, 512]]``
data.segment_len        8192
data.context_len        CNN: receptive field - 1; recurrent: 1024
data.hop                segment_len
train.lr                0.005
train.batch_size        8
train.max_steps         2000
train.valid_every       200
train.seed              0
train.tbptt_len         1024
train.grad_clip_norm    none
train.lr_decay          none (``{every: steps, factor: f}``)
eval.metrics            all six metrics
eval.split              test
out_dir                 ``runs/<config file stem>``
======================  =========================================
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .backbones import ModelSpec, receptive_field
from .errors import ConfigError, SchemaError, UnknownKey
from .losses import TERM_KINDS, LossSpec, PreEmphasis
from .metrics import METRIC_NAMES

RNN_DEFAULT_CONTEXT = 1024


@dataclass(frozen=True)
class DataConfig:
    manifest: Path
    segment_len: int = 8192
    context_len: int | None = None
    hop: int | None = None


@dataclass(frozen=True)
class TrainSettings:
    lr: float = 5e-3
    batch_size: int = 8
    max_steps: int = 2000
    valid_every: int = 200
    seed: int = 0
    tbptt_len: int = 1024
    grad_clip_norm: float | None = None
    lr_decay_every: int | None = None
    lr_decay_factor: float = 1.0


@dataclass(frozen=True)
class EvalConfig:
    metrics: tuple = METRIC_NAMES
    split: str = "test"


@dataclass(frozen=True)
class TrainConfig:
    model: ModelSpec
    loss: LossSpec
    data: DataConfig
    train: TrainSettings = field(default_factory=TrainSettings)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: Path = Path("runs/default")
    source: Path | None = None
    # paths exactly as written in the file, so the echo does not depend on where it lives
    refs: tuple = ("", "")

    def to_dict(self):
        """Fully resolved config; stored in run directories and checkpoints."""
        t = self.train
        train = {"lr": t.lr, "batch_size": t.batch_size, "max_steps": t.max_steps,
                 "valid_every": t.valid_every, "seed": t.seed, "tbptt_len": t.tbptt_len,
                 "grad_clip_norm": t.grad_clip_norm}
        if t.lr_decay_every:
            train["lr_decay"] = {"every": t.lr_decay_every, "factor": t.lr_decay_factor}
        return {
            "model": self.model.to_dict(),
            "loss": self.loss.to_dict(),
            "data": {"manifest": self.refs[0] or str(self.data.manifest),
                     "segment_len": self.data.segment_len,
                     "context_len": self.data.context_len, "hop": self.data.hop},
            "train": train,
            "eval": {"metrics": list(self.eval.metrics), "split": self.eval.split},
            "out_dir": self.refs[1] or str(self.out_dir),
        }


# ----------------------------------------------------------------- parsing


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise SchemaError("must be a mapping", path or "$")
    for k in d:
        if k not in allowed:
            where = f"{path}.{k}" if path else str(k)
            raise UnknownKey(f"unknown key {k!r}", where)


def _int(v, path, lo=None, optional=False):
    if v is None and optional:
        return None
    if not isinstance(v, int) or isinstance(v, bool):
        raise SchemaError(f"must be an integer, got {v!r}", path)
    if lo is not None and v < lo:
        raise SchemaError(f"must be >= {lo}, got {v}", path)
    return v


def _num(v, path, lo=None, optional=False, strict=False):
    if v is None and optional:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SchemaError(f"must be a number, got {v!r}", path)
    v = float(v)
    if lo is not None and (v <= lo if strict else v < lo):
        raise SchemaError(f"must be {'>' if strict else '>='} {lo}, got {v}", path)
    return v


def _manifest_facts(path):
    try:
        doc = json.loads(Path(path).read_text())
        return int(doc["sample_rate"]), len(doc["condition_names"])
    except FileNotFoundError as exc:
        raise SchemaError(f"manifest not found: {path}", "data.manifest") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"unreadable manifest {path}: {exc}", "data.manifest") from exc


def _parse_model(d, sr, n_conds):
    names = {f.name for f in fields(ModelSpec)}
    _check_keys(d, names, "model")
    if "backbone" not in d:
        raise SchemaError("missing key", "model.backbone")
    d = dict(d)
    for key, value in (("n_conds", n_conds), ("sample_rate", sr)):
        if key in d and d[key] != value:
            raise SchemaError(f"manifest says {value}, config says {d[key]}", f"model.{key}")
        d[key] = value
    return ModelSpec(**d)


def _parse_loss(d):
    _check_keys(d, {"terms", "pre_emphasis", "resolutions", "stft_fft_size", "stft_hop",
                    "emphasize_spectral"}, "loss")
    kw = {}
    if "terms" in d:
        if not isinstance(d["terms"], list):
            raise SchemaError("must be a list", "loss.terms")
        terms = []
        for i, t in enumerate(d["terms"]):
            p = f"loss.terms[{i}]"
            _check_keys(t, {"kind", "weight"}, p)
            if t.get("kind") not in TERM_KINDS:
                raise SchemaError(f"must be one of {TERM_KINDS}", f"{p}.kind")
            terms.append((t["kind"], _num(t.get("weight", 1.0), f"{p}.weight", lo=0.0)))
        kw["terms"] = tuple(terms)
    if "pre_emphasis" in d:
        pe = d["pre_emphasis"]
        _check_keys(pe, {"kind", "coeff", "lp_coeff"}, "loss.pre_emphasis")
        kw["pre_emphasis"] = PreEmphasis(
            pe.get("kind", "none"),
            _num(pe.get("coeff", 0.85), "loss.pre_emphasis.coeff"),
            _num(pe.get("lp_coeff", 0.85), "loss.pre_emphasis.lp_coeff"))
    if "resolutions" in d:
        res = d["resolutions"]
        if not isinstance(res, list) or not res:
            raise SchemaError("must be a nonempty list of [fft_size, hop]", "loss.resolutions")
        for i, r in enumerate(res):
            if not isinstance(r, list) or len(r) != 2:
                raise SchemaError("must be [fft_size, hop]", f"loss.resolutions[{i}]")
            _int(r[0], f"loss.resolutions[{i}][0]", 2)
            _int(r[1], f"loss.resolutions[{i}][1]", 1)
        kw["resolutions"] = tuple(tuple(r) for r in res)
    for key in ("stft_fft_size", "stft_hop"):
        if key in d:
            kw[key] = _int(d[key], f"loss.{key}", 1)
    if "emphasize_spectral" in d:
        if not isinstance(d["emphasize_spectral"], bool):
            raise SchemaError("must be true or false", "loss.emphasize_spectral")
        kw["emphasize_spectral"] = d["emphasize_spectral"]
    return LossSpec(**kw)


def _parse_train(d):
    _check_keys(d, {"lr", "batch_size", "max_steps", "valid_every", "seed", "tbptt_len",
                    "grad_clip_norm", "lr_decay"}, "train")
    kw = {}
    if "lr" in d:
        kw["lr"] = _num(d["lr"], "train.lr", lo=0.0, strict=True)
    for key, lo in (("batch_size", 1), ("max_steps", 0), ("valid_every", 1), ("seed", 0),
                    ("tbptt_len", 1)):
        if key in d:
            kw[key] = _int(d[key], f"train.{key}", lo)
    if "grad_clip_norm" in d:
        kw["grad_clip_norm"] = _num(d["grad_clip_norm"], "train.grad_clip_norm", lo=0.0,
                                    optional=True, strict=True)
    if d.get("lr_decay") is not None:
        dec = d["lr_decay"]
        _check_keys(dec, {"every", "factor"}, "train.lr_decay")
        kw["lr_decay_every"] = _int(dec.get("every"), "train.lr_decay.every", 1)
        kw["lr_decay_factor"] = _num(dec.get("factor", 0.5), "train.lr_decay.factor", lo=0.0,
                                     strict=True)
    return TrainSettings(**kw)


def _parse_eval(d):
    _check_keys(d, {"metrics", "split"}, "eval")
    kw = {}
    if "metrics" in d:
        m = d["metrics"]
        if not isinstance(m, list) or any(x not in METRIC_NAMES for x in m):
            raise SchemaError(f"must be a list drawn from {METRIC_NAMES}", "eval.metrics")
        kw["metrics"] = tuple(m)
    if "split" in d:
        if d["split"] not in ("train", "valid", "test"):
            raise SchemaError("must be train, valid or test", "eval.split")
        kw["split"] = d["split"]
    return EvalConfig(**kw)


def config_from_dict(doc, base_dir=Path("."), name="default") -> TrainConfig:
    _check_keys(doc, {"model", "loss", "data", "train", "eval", "out_dir"}, "")
    for key in ("model", "data"):
        if key not in doc:
            raise SchemaError("missing section", key)
    data = doc["data"]
    _check_keys(data, {f.name for f in fields(DataConfig)}, "data")
    if "manifest" not in data or not isinstance(data["manifest"], str):
        raise SchemaError("must be a path string", "data.manifest")
    manifest = (base_dir / data["manifest"]).resolve()
    sr, n_conds = _manifest_facts(manifest)
    model = _parse_model(doc["model"], sr, n_conds)
    segment_len = _int(data.get("segment_len", 8192), "data.segment_len", 1)
    context = _int(data.get("context_len"), "data.context_len", 0, optional=True)
    if context is None:
        context = RNN_DEFAULT_CONTEXT if model.family == "rnn" else receptive_field(model) - 1
    hop = _int(data.get("hop"), "data.hop", 1, optional=True) or segment_len
    out_dir = doc.get("out_dir", f"runs/{name}")
    if not isinstance(out_dir, str):
        raise SchemaError("must be a path string", "out_dir")
    cfg = TrainConfig(
        model=model,
        loss=_parse_loss(doc.get("loss") or {}),
        data=DataConfig(manifest, segment_len, context, hop),
        train=_parse_train(doc.get("train") or {}),
        eval=_parse_eval(doc.get("eval") or {}),
        out_dir=(base_dir / out_dir).resolve(),
        refs=(data["manifest"], out_dir),
    )
    need = cfg.loss.min_length
    if segment_len < need:
        raise SchemaError(f"segment_len {segment_len} is shorter than the loss needs ({need})",
                          "data.segment_len")
    if model.family == "rnn" and min(segment_len, cfg.train.tbptt_len) * cfg.train.batch_size < need:
        raise SchemaError(f"tbptt_len x batch_size is shorter than the loss needs ({need})",
                          "train.tbptt_len")
    return cfg


def parse_config(path) -> TrainConfig:
    """Read, default-fill and validate a YAML run configuration."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise SchemaError(f"invalid YAML: {exc}", str(path)) from exc
    cfg = config_from_dict(doc if doc is not None else {}, path.parent.resolve(), path.stem)
    return TrainConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, "source": path})
