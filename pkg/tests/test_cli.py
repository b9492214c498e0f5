import csv
import io
import json

import pytest

from treespec.cli import main
from treespec.lm import MaskedContext, NGramModel, load_model


@pytest.fixture
def target(tmp_path):
    path = tmp_path / "target.json"
    assert main(["make-model", "--vocab-size", "32", "--seed", "0", "--out", str(path)]) == 0
    return path


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def test_train_ngram_ids(tmp_path):
    corpus = tmp_path / "c.txt"
    corpus.write_text("0 1\n")
    out = tmp_path / "m.json"
    assert main(["train-ngram", str(corpus), "--order", "1", "--smoothing", "0",
                 "--out", str(out)]) == 0
    m = load_model(out)
    assert m.next_distribution(MaskedContext((0,)))[1] == 1.0
    again = tmp_path / "m2.json"
    main(["train-ngram", str(corpus), "--order", "1", "--smoothing", "0", "--out", str(again)])
    assert out.read_text() == again.read_text()


def test_train_ngram_round_trip(tmp_path):
    corpus = tmp_path / "c.txt"
    corpus.write_text("3 1 2\n2 2 1\n\n1 3\n")
    out = tmp_path / "m.json"
    main(["train-ngram", str(corpus), "--out", str(out)])
    direct = NGramModel.fit([[3, 1, 2], [2, 2, 1], [1, 3]], 2, 5, 4, smoothing=0.01)
    assert load_model(out) == direct


def test_train_words_and_bytes(tmp_path):
    corpus = tmp_path / "w.txt"
    corpus.write_text("the cat sat\nthe dog\n")
    out = tmp_path / "w.json"
    assert main(["train-ngram", str(corpus), "--format", "words", "--out", str(out)]) == 0
    m = load_model(out)
    assert m.vocab[:2] == ("the", "cat") and m.vocab[m.eos_id] == "<eos>"
    assert main(["train-ngram", str(corpus), "--format", "bytes", "--out", str(out)]) == 0
    assert load_model(out).vocab_size == 257


def test_train_errors(tmp_path, capsys):
    empty = tmp_path / "e.txt"
    empty.write_text("\n\n")
    assert main(["train-ngram", str(empty), "--out", str(tmp_path / "x.json")]) == 2
    bad = tmp_path / "b.txt"
    bad.write_text("1 2\n3 x\n")
    assert main(["train-ngram", str(bad), "--out", str(tmp_path / "x.json")]) == 2
    assert ":2:" in capsys.readouterr().err
    assert main(["train-ngram", str(tmp_path / "missing.txt"),
                 "--out", str(tmp_path / "x.json")]) == 3


def test_run_deterministic_json(target, tmp_path, capsys):
    args = ["run", "--target", str(target), "--n-prompts", "5", "--perturb-noise", "0.2"]
    code, a = _run(args, capsys)
    _, b = _run(args, capsys)
    assert code == 0 and a == b
    doc = json.loads(a)
    assert doc["schema"] == "treespec.run/v1"
    assert len(doc["prompts"]) == 5
    assert doc["speedup_vs_std"] > 1
    assert 0 <= doc["aggregate"]["acceptance_rate"] <= 1


def test_run_outputs_and_trace(target, tmp_path):
    prompts = tmp_path / "p.txt"
    prompts.write_text("1 2\n3\n")
    out, trace = tmp_path / "r.json", tmp_path / "t.jsonl"
    assert main(["run", "--target", str(target), "--prompts", str(prompts), "--out", str(out),
                 "--trace", str(trace)]) == 0
    doc = json.loads(out.read_text())
    assert [p["prompt"] for p in doc["prompts"]] == [[1, 2], [3]]
    events = [json.loads(l) for l in trace.read_text().splitlines()]
    kinds = {e["event"] for e in events}
    assert {"draft", "fallback", "verify", "commit", "pipeline"} <= kinds


def test_run_baselines(target, capsys):
    results = {}
    for b in ("none", "target-greedy", "sequence-sp", "naive-parallel"):
        code, out = _run(["run", "--target", str(target), "--n-prompts", "4",
                          "--baseline", b], capsys)
        assert code == 0
        doc = json.loads(out)
        results[b] = doc
    tokens = {b: [p["tokens"] for p in d["prompts"]] for b, d in results.items()}
    assert len({json.dumps(t) for t in tokens.values()}) == 1
    assert results["target-greedy"]["speedup_vs_std"] == 1.0


def test_identical_draft_speedup_bound(target, capsys):
    # no errors: every cycle costs one target step plus its drafts, so the
    # speedup cannot exceed the committed tokens per verification
    _, out = _run(["run", "--target", str(target), "--draft", str(target),
                   "--n-prompts", "5"], capsys)
    doc = json.loads(out)
    agg = doc["aggregate"]
    assert agg["acceptance_rate"] == 1.0
    assert 1 < doc["speedup_vs_std"] <= agg["committed_tokens"] / agg["verifications"]


def test_config_errors(target, tmp_path, capsys):
    assert main(["run", "--target", str(target), "--alpha", "0"]) == 2
    assert main(["run", "--target", str(target), "--branch-threshold", "1.5"]) == 2
    bad_cost = tmp_path / "cost.json"
    bad_cost.write_text(json.dumps({"nonsense": 1}))
    assert main(["run", "--target", str(target), "--cost-config", str(bad_cost)]) == 2
    other = tmp_path / "other.json"
    main(["make-model", "--vocab-size", "8", "--out", str(other)])
    assert main(["run", "--target", str(target), "--draft", str(other)]) == 2
    prompts = tmp_path / "p.txt"
    prompts.write_text("1 99\n")
    assert main(["run", "--target", str(target), "--prompts", str(prompts)]) == 2
    assert main(["run", "--target", str(tmp_path / "nope.json")]) == 3
    assert main(["sweep", "--target", str(target), "--param", "alpha", "--values", "a"]) == 2
    capsys.readouterr()


def test_cost_config_file(target, tmp_path, capsys):
    cost = tmp_path / "cost.json"
    cost.write_text(json.dumps({"target_load_total": 900.0}))
    _, out = _run(["run", "--target", str(target), "--n-prompts", "2",
                   "--cost-config", str(cost)], capsys)
    assert json.loads(out)["config"]["cost"]["target_load_total"] == 900.0


def _sweep(target, capsys, param, values, *extra):
    code, out = _run(["sweep", "--target", str(target), "--param", param,
                      "--values", values, *extra], capsys)
    assert code == 0
    return list(csv.DictReader(io.StringIO(out)))


def test_sweep_memory_trend(target, capsys):
    rows = _sweep(target, capsys, "resident_fraction", "0.9,0.5,0.2", "--n-prompts", "10")
    assert [r["param"] for r in rows] == ["resident_fraction"] * 3
    speedups = [float(r["speedup_vs_std"]) for r in rows]
    assert speedups[0] < speedups[1] < speedups[2]
    assert set(rows[0]) == {"param", "value", "per_token_time", "acceptance_rate",
                            "verifications", "speedup_vs_std"}


def test_sweep_single_point_equals_run(target, capsys):
    rows = _sweep(target, capsys, "alpha", "0.05", "--n-prompts", "3")
    _, out = _run(["run", "--target", str(target), "--alpha", "0.05", "--n-prompts", "3"], capsys)
    agg = json.loads(out)["aggregate"]
    assert float(rows[0]["per_token_time"]) == agg["simulated_per_token_time"]
    assert int(rows[0]["verifications"]) == agg["verifications"]


def test_sweep_noise_lowers_acceptance(target, capsys):
    rows = _sweep(target, capsys, "noise", "0,0.1,0.5", "--n-prompts", "100",
                  "--max-output", "32")
    acc = [float(r["acceptance_rate"]) for r in rows]
    assert acc[0] == 1.0 and acc[0] > acc[1] > acc[2]


def test_rouge_command(tmp_path, capsys):
    c, r = tmp_path / "c.txt", tmp_path / "r.txt"
    c.write_text("1 2 3 4\n5 6\n")
    r.write_text("1 3 4\n5 6\n")
    code, out = _run(["rouge", str(c), str(r)], capsys)
    doc = json.loads(out)
    assert code == 0
    assert round(doc["per_line"][0], 1) == 85.7 and doc["per_line"][1] == 100.0


def test_demos_run():
    import pathlib
    import runpy
    import contextlib
    import io as _io
    for path in sorted(pathlib.Path(__file__).parent.parent.joinpath("demos").glob("*.py")):
        with contextlib.redirect_stdout(_io.StringIO()):
            runpy.run_path(str(path), run_name="__main__")
