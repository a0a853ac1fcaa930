"""``nfx`` command line: preprocess, render-dataset, train, eval, analyze, make-corpus.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import effects
from .audio_io import load_manifest, read_wav, write_wav
from .checkpoint import load_checkpoint
from .config import parse_config
from .errors import ConfigError, NfxError
from .training import PROBES, analyze, evaluate, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _split_fractions(text):
    vals = _floats(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three fractions train,valid,test")
    return vals


def build_parser():
    p = _Parser(prog="nfx", description="Neural audio effect modelling toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("preprocess", help="validate a dataset manifest")
    s.add_argument("--manifest", required=True, type=Path)
    s.add_argument("--check", action="store_true", help="parse every referenced WAV file")

    s = sub.add_parser("make-corpus", help="write a synthetic input corpus")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seconds", type=float, default=60.0)
    s.add_argument("--item-seconds", type=float, default=3.0)
    s.add_argument("--sample-rate", type=int, default=44100)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("render-dataset", help="render a corpus through a reference effect")
    s.add_argument("--effect", required=True, choices=sorted(effects.EFFECTS))
    s.add_argument("--grid", required=True, type=_floats, help="comma-separated knob values")
    s.add_argument("--corpus", required=True, type=Path, help="directory of WAV files")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--splits", type=_split_fractions, default=[0.8, 0.1, 0.1])
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("train", help="train a model from a YAML config")
    s.add_argument("-c", "--config", required=True, type=Path)

    s = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    s.add_argument("--ckpt", required=True, type=Path)
    s.add_argument("--manifest", required=True, type=Path)
    s.add_argument("--split", default="test", choices=["train", "valid", "test"])
    s.add_argument("--out", type=Path, help="report path (default: print only)")

    s = sub.add_parser("analyze", help="probe a checkpoint or reference effect")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--ckpt", type=Path)
    src.add_argument("--effect", choices=sorted(effects.EFFECTS))
    s.add_argument("--probe", required=True, choices=PROBES)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--cond", type=_floats, default=None, help="raw knob values")
    s.add_argument("--sample-rate", type=int, default=None, help="for --effect (default 48000)")
    s.add_argument("--f0", type=float, default=1000.0)
    s.add_argument("--levels", type=_floats, default=[-18.0, -12.0, -6.0])
    s.add_argument("--level", type=float, default=-6.0, help="compare probe sine level")
    s.add_argument("--f1", type=float, default=20.0)
    s.add_argument("--f2", type=float, default=None)
    s.add_argument("--duration", type=float, default=5.0)
    s.add_argument("--input", type=Path, help="compare probe input WAV")
    s.add_argument("--target", type=Path, help="compare probe target WAV")
    s.add_argument("--target-effect", choices=sorted(effects.EFFECTS))
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--length", type=int, default=None)
    return p


def _preprocess(args):
    m = load_manifest(args.manifest)
    counts = {}
    for e in m.entries:
        counts[e.split] = counts.get(e.split, 0) + 1
    if args.check:
        for e in m.entries:
            read_wav(e.input_path)
            read_wav(e.target_path)
    print(json.dumps({"sample_rate": m.sample_rate, "conditions": list(m.condition_names),
                      "entries": len(m.entries), "splits": counts, "checked": bool(args.check)},
                     sort_keys=True))


def _make_corpus(args):
    args.out.mkdir(parents=True, exist_ok=True)
    items = effects.synth_corpus(args.seconds, args.item_seconds, args.sample_rate, args.seed)
    for i, buf in enumerate(items):
        write_wav(args.out / f"corpus{i:04d}.wav", buf, "float32")
    print(f"wrote {len(items)} files to {args.out}")


def _render(args):
    files = sorted(args.corpus.glob("*.wav"))
    if not files:
        raise UsageError(f"no .wav files in {args.corpus}")
    m = effects.render_dataset(args.effect, args.grid, [read_wav(f) for f in files], args.out,
                               args.splits, args.seed)
    print(f"wrote {len(m.entries)} entries to {args.out / 'manifest.json'}")


def _train(args):
    res = train(parse_config(args.config))
    best = "n/a" if res.best_valid is None else f"{res.best_valid:.6g}"
    print(f"steps={res.steps} best_valid={best} checkpoint={res.checkpoint_path}")


def _eval(args):
    report = evaluate(load_checkpoint(args.ckpt), load_manifest(args.manifest), args.split,
                      out_path=args.out)
    print(json.dumps(report["aggregate"], sort_keys=True))


def _analyze(args):
    if args.ckpt:
        source = load_checkpoint(args.ckpt)
        n = source.spec.n_conds
    else:
        source = args.effect
        n = 1
    cond = args.cond if args.cond is not None else ([] if n == 0 else [0.5] * n)
    extra = {}
    if args.input:
        extra["input"] = read_wav(args.input)
    if args.target:
        extra["target"] = read_wav(args.target)
    summary = analyze(source, args.probe, args.out, cond, sample_rate=args.sample_rate,
                      f0=args.f0, levels=args.levels, level=args.level, f1=args.f1, f2=args.f2,
                      duration=args.duration, target_effect=args.target_effect,
                      start=args.start, length=args.length, **extra)
    print(json.dumps(summary, sort_keys=True)[:2000])


COMMANDS = {"preprocess": _preprocess, "make-corpus": _make_corpus, "render-dataset": _render,
            "train": _train, "eval": _eval, "analyze": _analyze}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"nfx {args.command}: {exc}", file=sys.stderr)
        return 2
    except (NfxError, OSError, ValueError) as exc:
        print(f"nfx {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

