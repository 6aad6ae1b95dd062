import json
import os

import numpy as np
import pytest

from lexhmm import cli
from lexhmm.corpus import Corpus, read_vertical, write_conllx, write_vertical
from lexhmm.synthetic import three_tag_corpus


@pytest.fixture
def corpus_file(tmp_path):
    corpus, _ = three_tag_corpus(300, seed=0, types_per_tag=6)
    path = tmp_path / "train.conll"
    write_conllx(path, corpus)
    return str(path), corpus


def read_bytes(d):
    return {n: open(os.path.join(d, n), "rb").read()
            for n in ("tags.txt", "lexicon.tsv", "metrics.txt")}


def train(tmp_path, corpus_path, out, *extra):
    return cli.main(["train", "--corpus", corpus_path, "--out", str(tmp_path / out),
                     "--iterations", "2", "--particles", "3", "--checkpoint-every", "1", *extra])


def test_train_smoke(tmp_path, corpus_file, capsys):
    path, corpus = corpus_file
    assert train(tmp_path, path, "run") == 0
    out = tmp_path / "run"
    for name in ("tags.txt", "lexicon.tsv", "diagnostics.jsonl", "checkpoint.npz", "metrics.txt"):
        assert (out / name).exists()
    tags = read_vertical(out / "tags.txt")
    assert tags.sentences() == corpus.sentences()
    recs = [json.loads(l) for l in open(out / "diagnostics.jsonl")]
    assert [r["iteration"] for r in recs] == [1, 2]
    metrics = dict(l.split("=") for l in open(out / "metrics.txt").read().split())
    assert int(metrics["tags"]) == 3 and 0.0 <= float(metrics["m1"]) <= 1.0
    lex = [l.rstrip("\n").split("\t") for l in open(out / "lexicon.tsv", encoding="utf-8")]
    assert [w for w, _ in lex] == corpus.vocab


def test_train_is_deterministic(tmp_path, corpus_file):
    path, _ = corpus_file
    train(tmp_path, path, "a", "--hyper-every", "1")
    train(tmp_path, path, "b", "--hyper-every", "1")
    assert read_bytes(tmp_path / "a") == read_bytes(tmp_path / "b")


def test_resume_equals_uninterrupted(tmp_path, corpus_file):
    path, _ = corpus_file
    cli.main(["train", "--corpus", path, "--out", str(tmp_path / "full"), "--iterations", "4",
              "--particles", "3"])
    train(tmp_path, path, "part")
    assert cli.main(["train", "--corpus", path, "--out", str(tmp_path / "resumed"), "--iterations", "4",
                     "--particles", "3", "--resume", str(tmp_path / "part" / "checkpoint.npz")]) == 0
    assert read_bytes(tmp_path / "full") == read_bytes(tmp_path / "resumed")
    assert cli.main(["train", "--corpus", path, "--out", str(tmp_path / "bad"), "--particles", "5",
                     "--resume", str(tmp_path / "part" / "checkpoint.npz")]) == 2


def test_config_file_with_flag_override(tmp_path, corpus_file):
    path, _ = corpus_file
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# experiment\ncorpus = {path}\niterations = 1\nparticles = 2\nsampler = pyp-type\n")
    args = cli.parse_args(["train", "--config", str(cfg), "--particles", "4"])
    assert args.iterations == 1 and args.particles == 4 and args.sampler == "pyp-type"
    cfg.write_text("bogus = 1\n")
    assert cli.main(["train", "--config", str(cfg)]) == 2
    cfg.write_text("particles = many\n")
    assert cli.main(["train", "--config", str(cfg)]) == 2


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["train", "--corpus", str(tmp_path / "missing.conll")]) == 2
    vert = tmp_path / "plain.txt"
    vert.write_text("a\nb\n\n")
    assert cli.main(["train", "--corpus", str(vert), "--no-gold", "--out", str(tmp_path / "o")]) == 2
    assert "--tags" in capsys.readouterr().err
    assert cli.main(["train", "--corpus", str(vert), "--no-gold", "--tags", "2", "--iterations", "1",
                     "--out", str(tmp_path / "o")]) == 0


def test_eval_identical_is_perfect(tmp_path, corpus_file, capsys):
    path, corpus = corpus_file
    pred = tmp_path / "pred.txt"
    write_vertical(pred, corpus)
    report = tmp_path / "report.tsv"
    assert cli.main(["eval", str(pred), path, "--report", str(report), "--out", str(tmp_path / "m.txt")]) == 0
    out = capsys.readouterr().out
    assert "m1=1.000000" in out and "v_measure=1.000000" in out
    assert open(report).readline() == "rank\ttypes\ttags\ttop_word_types\n"


def test_eval_rejects_malformed_prediction(tmp_path, corpus_file):
    path, corpus = corpus_file
    bad = tmp_path / "bad.txt"
    bad.write_text("w0_0\tT0\textra\n")
    assert cli.main(["eval", str(bad), path]) == 2
    short = tmp_path / "short.txt"
    short.write_text("w0_0\tT0\n")
    assert cli.main(["eval", str(short), path]) == 2


def test_analyze(tmp_path, corpus_file, capsys):
    path, corpus = corpus_file
    pred = tmp_path / "pred.txt"
    write_vertical(pred, corpus)
    zipf = tmp_path / "zipf.tsv"
    assert cli.main(["analyze", str(pred), path, "--zipf", str(zipf), "--top", "2"]) == 0
    captured = capsys.readouterr()
    rows = captured.out.splitlines()
    assert rows[0] == "rank\ttypes\ttags\ttop_word_types"
    assert all(len(r.split("\t")) == 4 for r in rows)
    assert "distinct_classes=" in captured.err
    assert open(zipf).readline() == "rank\ttypes\tclass\n"


def test_analyze_singleton_corpus(tmp_path, capsys):
    p = tmp_path / "one.txt"
    p.write_text("x\tA\n\n")
    assert cli.main(["analyze", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1] == "1\t1\tA\tx (A 1.00)"
