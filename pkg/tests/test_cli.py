import json
import pathlib

import pytest

from vulgraph.cli import load_run_config, main
from vulgraph.errors import ConfigError

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

FAST_CONFIG = {
    "epochs": 2,
    "embed_dim": 8,
    "gru_hidden": 8,
    "tree_hidden": 8,
    "stmt_dim": 12,
    "explain_iterations": 40,
    "real_ratio": 1.0,
}


# --- configuration ----------------------------------------------------------


def test_config_defaults_file_flags_precedence(tmp_path):
    assert load_run_config(None, {}).k == 5

    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"k": 7, "seed": 3}), encoding="utf-8")
    cfg = load_run_config(str(path), {})
    assert cfg.k == 7 and cfg.seed == 3

    cfg = load_run_config(str(path), {"k": 9, "seed": None})
    assert cfg.k == 9 and cfg.seed == 3  # flag overrides file; None means unset


def test_config_rejects_unknown_keys_and_bad_json(tmp_path):
    bad_key = tmp_path / "bad.json"
    bad_key.write_text(json.dumps({"warp_factor": 9}), encoding="utf-8")
    with pytest.raises(ConfigError, match="warp_factor"):
        load_run_config(str(bad_key), {})

    not_json = tmp_path / "broken.json"
    not_json.write_text("{nope", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(str(not_json), {})

    with pytest.raises(ConfigError):
        load_run_config(None, {"jobs": 0})


# --- parse ------------------------------------------------------------------


def test_parse_emits_golden_bytes(capsys):
    assert main(["parse", str(FIXTURES / "device_xcmd.c")]) == 0
    out = capsys.readouterr().out
    assert out == (FIXTURES / "device_xcmd.pdg.json").read_text()


def test_parse_writes_json_and_dot_files(tmp_path):
    out = tmp_path / "parsed"
    code = main(
        ["parse", str(FIXTURES / "device_xcmd.c"), "--out", str(out), "--dot"]
    )
    assert code == 0
    json_files = list(out.glob("*.pdg.json"))
    dot_files = list(out.glob("*.dot"))
    assert len(json_files) == 1 and len(dot_files) == 1
    assert dot_files[0].read_text().startswith("digraph")


def test_parse_missing_file_is_validation_error(capsys):
    assert main(["parse", "/nonexistent/source.c"]) == 1
    assert "error:" in capsys.readouterr().err


# --- pipeline ---------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-corpus -> train -> detect -> explain, with artifacts on disk."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg_path = root / "fast.json"
    cfg_path.write_text(json.dumps(FAST_CONFIG), encoding="utf-8")
    corpus = root / "tiny.jsonl"
    model = root / "model.json"

    assert main(["gen-corpus", "--n", "24", "--seed", "3", "--out", str(corpus)]) == 0
    assert (
        main(
            [
                "train", str(corpus), "--out", str(model),
                "--split-out", str(root / "splits"), "--config", str(cfg_path),
            ]
        )
        == 0
    )
    test_corpus = root / "splits.test.jsonl"
    detections = root / "det.json"
    assert (
        main(["detect", str(test_corpus), "--model", str(model), "--out", str(detections)])
        == 0
    )

    vuln_id = None
    for line in test_corpus.read_text().splitlines():
        entry = json.loads(line)
        if entry["label"] == "V":
            vuln_id = entry["id"]
            break
    assert vuln_id is not None

    explanations = root / "expl"
    assert (
        main(
            [
                "explain", str(test_corpus), "--model", str(model),
                "--method", vuln_id, "--out", str(explanations),
                "--config", str(cfg_path),
            ]
        )
        == 0
    )
    return {
        "root": root,
        "config": cfg_path,
        "corpus": corpus,
        "model": model,
        "test_corpus": test_corpus,
        "detections": detections,
        "explanations": explanations / "explanations.json",
        "vuln_id": vuln_id,
    }


def test_train_writes_checkpoint_log_and_splits(pipeline):
    root = pipeline["root"]
    assert pipeline["model"].exists()
    log = json.loads((root / "model.json.log.json").read_text())
    assert log["epochs"] and {"epoch", "loss", "tuning_auc"} <= set(log["epochs"][0])
    assert set(log["splits"]) == {"train", "tune", "test"}
    split_ids = [i for part in log["splits"].values() for i in part]
    assert len(split_ids) == len(set(split_ids))
    for name in ("train", "tune", "test"):
        assert (root / f"splits.{name}.jsonl").exists()


def test_detect_report_is_ranked(pipeline):
    report = json.loads(pipeline["detections"].read_text())
    rows = report["methods"]
    assert rows and [r["rank"] for r in rows] == list(range(1, len(rows) + 1))
    scores = [r["score"] for r in rows]
    assert scores == sorted(scores, reverse=True)
    assert all(r["decision"] in ("V", "NV") for r in rows)
    assert 0.0 <= report["threshold"] <= 1.0


def test_explain_report_contents(pipeline):
    rows = json.loads(pipeline["explanations"].read_text())
    assert len(rows) == 1
    row = rows[0]
    assert row["method"] == pipeline["vuln_id"]
    assert {"decision", "edges", "statements", "abstract", "score", "k"} <= set(row)
    masks = [e["mask"] for e in row["edges"]]
    assert masks == sorted(masks, reverse=True)
    labels = [label for _, label in row["abstract"]["nodes"]]
    assert labels and all("VAR" in l or "LITERAL" in l or "(" in l for l in labels)
    dot = (pipeline["explanations"].parent / f"{row['method']}.dot").read_text()
    assert dot.startswith("digraph")


def test_evaluate_full_report(pipeline, capsys):
    code = main(
        [
            "evaluate",
            "--detections", str(pipeline["detections"]),
            "--explanations", str(pipeline["explanations"]),
            "--corpus", str(pipeline["test_corpus"]),
        ]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert {"auc", "classification", "ranking", "interpretation", "counts"} <= set(report)
    assert report["counts"]["explanations_evaluated"] == 1
    assert 0.0 <= report["interpretation"]["accuracy"] <= 1.0


def test_evaluate_without_explanations_skips_interpretation(pipeline, capsys):
    code = main(
        [
            "evaluate",
            "--detections", str(pipeline["detections"]),
            "--corpus", str(pipeline["test_corpus"]),
        ]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert "interpretation" not in report


def test_evaluate_unknown_method_is_validation_error(pipeline, tmp_path, capsys):
    bogus = tmp_path / "det.json"
    bogus.write_text(
        json.dumps(
            {"methods": [{"method": "ghost", "score": 0.9, "decision": "V", "rank": 1}]}
        ),
        encoding="utf-8",
    )
    code = main(
        [
            "evaluate",
            "--detections", str(bogus),
            "--corpus", str(pipeline["test_corpus"]),
        ]
    )
    assert code == 1
    assert "ghost" in capsys.readouterr().err


def test_detect_bytes_stable_across_runs_and_jobs(pipeline, tmp_path):
    for jobs in ("1", "3"):
        out = tmp_path / f"det_{jobs}.json"
        assert (
            main(
                [
                    "detect", str(pipeline["test_corpus"]),
                    "--model", str(pipeline["model"]),
                    "--out", str(out), "--jobs", jobs,
                ]
            )
            == 0
        )
    assert (tmp_path / "det_1.json").read_bytes() == (tmp_path / "det_3.json").read_bytes()
    assert (tmp_path / "det_1.json").read_bytes() == pipeline["detections"].read_bytes()


def test_explain_bytes_stable_across_runs(pipeline, tmp_path):
    out = tmp_path / "expl_again"
    assert (
        main(
            [
                "explain", str(pipeline["test_corpus"]),
                "--model", str(pipeline["model"]),
                "--method", pipeline["vuln_id"], "--out", str(out),
                "--config", str(pipeline["config"]),
            ]
        )
        == 0
    )
    assert (out / "explanations.json").read_bytes() == pipeline["explanations"].read_bytes()


def test_explain_unknown_method_is_validation_error(pipeline, capsys):
    code = main(
        [
            "explain", str(pipeline["test_corpus"]),
            "--model", str(pipeline["model"]), "--method", "nope",
        ]
    )
    assert code == 1
    assert "nope" in capsys.readouterr().err


# --- mine -------------------------------------------------------------------


def _fake_explanation(method):
    return {
        "method": method,
        "decision": "V",
        "k": 2,
        "score": 0.9,
        "edges": [],
        "statements": [],
        "abstract": {
            "nodes": [[0, "int VAR = read_input(VAR);"], [1, "copy_bytes(VAR, VAR);"]],
            "edges": [[0, 1, "data"]],
        },
    }


def test_mine_reports_patterns_and_count_table(tmp_path, capsys):
    path = tmp_path / "expl.json"
    path.write_text(
        json.dumps([_fake_explanation("a"), _fake_explanation("b")]), encoding="utf-8"
    )
    assert main(["mine", str(path), "--min-support", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["min_support"] == 2
    assert len(report["patterns"]) == 1
    assert report["patterns"][0]["support"] == 2
    table = report["count_table"]
    assert table["sizes"] == [2, 3, 4, 5] and table["supports"] == [2, 3, 4, 5]


def test_mine_writes_dot_files(tmp_path):
    path = tmp_path / "expl.json"
    path.write_text(
        json.dumps([_fake_explanation("a"), _fake_explanation("b")]), encoding="utf-8"
    )
    out = tmp_path / "mined"
    assert main(["mine", str(path), "--min-support", "2", "--out", str(out)]) == 0
    assert (out / "patterns.json").exists()
    assert (out / "pattern_000.dot").read_text().startswith("digraph")


def test_mine_requires_abstract_graphs(tmp_path, capsys):
    path = tmp_path / "expl.json"
    row = _fake_explanation("a")
    del row["abstract"]
    path.write_text(json.dumps([row]), encoding="utf-8")
    assert main(["mine", str(path)]) == 1
    assert "abstract" in capsys.readouterr().err


# --- developer utilities ----------------------------------------------------


def test_gradcheck_passes_and_reports_table(capsys):
    assert main(["gradcheck"]) == 0
    captured = capsys.readouterr()
    rows = json.loads(captured.out)
    assert len(rows) >= 25
    assert all(row["pass"] for row in rows)
    assert all(row["max_rel_err"] < 1e-4 for row in rows)


def test_gen_corpus_counts(tmp_path):
    out = tmp_path / "c.jsonl"
    assert main(["gen-corpus", "--n", "20", "--seed", "1", "--out", str(out)]) == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(lines) == 20
    assert sum(1 for l in lines if l["label"] == "V") == 10


def test_usage_error_exit_code(capsys):
    assert main(["no-such-command"]) == 1
    assert main([]) == 1
    capsys.readouterr()


def test_internal_error_exit_code(monkeypatch, capsys):
    import vulgraph.cli as cli_mod

    def boom(seed=0):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(cli_mod, "run_gradcheck", boom)
    assert main(["gradcheck"]) == 2
    assert "internal error" in capsys.readouterr().err


def test_corrupt_checkpoint_is_validation_error(pipeline, tmp_path, capsys):
    bad = tmp_path / "model.json"
    bad.write_text("{}", encoding="utf-8")
    code = main(["detect", str(pipeline["test_corpus"]), "--model", str(bad)])
    assert code == 1
    assert "error:" in capsys.readouterr().err