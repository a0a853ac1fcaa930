import csv
import json
import subprocess
import sys

import yaml

from neuralfx.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_preprocess(small_dataset, capsys):
    manifest, m = small_dataset
    code, out, _ = run(["preprocess", "--manifest", manifest, "--check"], capsys)
    assert code == 0
    info = json.loads(out)
    assert info["entries"] == len(m.entries) and info["checked"] is True
    assert info["splits"] == {"train": 6, "valid": 2, "test": 2}


def test_corpus_render_train_eval_analyze(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    assert run(["make-corpus", "--out", corpus, "--seconds", 2.0, "--item-seconds", 0.5,
                "--sample-rate", 8000], capsys)[0] == 0
    assert len(list(corpus.glob("*.wav"))) == 4
    data = tmp_path / "data"
    code, out, _ = run(["render-dataset", "--effect", "tanh_drive", "--grid", "0,0.5,1",
                        "--corpus", corpus, "--out", data, "--splits", "0.5,0.25,0.25"], capsys)
    assert code == 0 and "12 entries" in out
    cfg = tmp_path / "c.yml"
    cfg.write_text(yaml.safe_dump({
        "model": {"backbone": "tcn", "channels": 2, "layers": 2},
        "data": {"manifest": "data/manifest.json", "segment_len": 1000},
        "train": {"max_steps": 3, "valid_every": 1, "batch_size": 2}}))
    code, out, _ = run(["train", "-c", cfg], capsys)
    assert code == 0 and "steps=3" in out
    ckpt = tmp_path / "runs" / "c" / "best.nfxc"
    assert ckpt.exists()
    code, out, _ = run(["eval", "--ckpt", ckpt, "--manifest", data / "manifest.json",
                        "--out", tmp_path / "r.json"], capsys)
    assert code == 0 and "esr" in json.loads(out)
    code, out, _ = run(["analyze", "--ckpt", ckpt, "--probe", "compare", "--target-effect",
                        "tanh_drive", "--out", tmp_path / "an"], capsys)
    assert code == 0 and (tmp_path / "an" / "compare.csv").exists()


def test_analyze_effect_probes(tmp_path, capsys):
    code, out, _ = run(["analyze", "--effect", "tanh_drive", "--probe", "harmonic",
                        "--out", tmp_path, "--levels", "-12"], capsys)
    assert code == 0
    with open(tmp_path / "harmonic.csv") as f:
        assert next(csv.reader(f)) == ["level_dbfs", "bin_hz", "mag_db"]
    h = json.loads((tmp_path / "harmonic.json").read_text())["harmonics_db"][0]
    assert max(h) == h[0]
    code, out, _ = run(["analyze", "--effect", "identity", "--probe", "sweep", "--out", tmp_path,
                        "--sample-rate", 8000, "--duration", 1], capsys)
    assert code == 0 and json.loads(out)["aliasing_ratio"] < -40


def test_usage_errors_exit_2(tmp_path, small_dataset, capsys):
    assert run(["analyze", "--effect", "tanh_drive", "--probe", "phase", "--out", tmp_path],
               capsys)[0] == 2
    assert run(["analyze", "--probe", "sweep", "--out", tmp_path], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run([], capsys)[0] == 2
    assert run(["train", "-c", tmp_path / "none.yml"], capsys)[0] == 2
    manifest, _ = small_dataset
    bad = tmp_path / "bad.yml"
    bad.write_text(yaml.safe_dump({"model": {"backbone": "gru"},
                                   "data": {"manifest": str(manifest)},
                                   "train": {"learning_rat": 1}}))
    code, _, err = run(["train", "-c", bad], capsys)
    assert code == 2 and "train.learning_rat" in err
    assert run(["render-dataset", "--effect", "tanh_drive", "--grid", "a,b", "--corpus",
                tmp_path, "--out", tmp_path], capsys)[0] == 2
    assert run(["render-dataset", "--effect", "tanh_drive", "--grid", "0.5", "--corpus",
                tmp_path, "--out", tmp_path / "o"], capsys)[0] == 2


def test_runtime_errors_exit_1(tmp_path, small_dataset, capsys):
    manifest, _ = small_dataset
    junk = tmp_path / "junk.nfxc"
    junk.write_bytes(b"NFXC" + b"\0" * 3)
    code, _, err = run(["eval", "--ckpt", junk, "--manifest", manifest], capsys)
    assert code == 1 and "CorruptPayload" in err
    assert run(["preprocess", "--manifest", tmp_path / "missing.json"], capsys)[0] == 1


def test_help_and_console_script():
    proc = subprocess.run([sys.executable, "-m", "neuralfx.cli", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "analyze" in proc.stdout
