import json

import pytest

from docparse_eval.cli import main, run_oracle_checks


@pytest.fixture()
def corpus(tmp_path):
    out = tmp_path / "c"
    args = ["synth", "--seed", "7", "--pages", "8", "--out", str(out), "--split-prob", "0.4", "--drop-prob", "0.2"]
    args += ["--jitter", "3", "--text-noise", "0.1", "--shuffle"]
    assert main(args) == 0
    return out


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_self_evaluation(capsys, corpus):
    code, out, _ = run(capsys, ["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "gt"), "--report", "json"])
    assert code == 0
    overall = json.loads(out)["overall"]
    assert overall["overall_edit"] == 0.0
    assert overall["detection"]["f1"] == 1.0


def test_synth_then_evaluate_matches_sidecar(capsys, corpus):
    code, out, _ = run(capsys, ["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "pred"), "--manifest", str(corpus / "manifest.json")])
    assert code == 0
    report = json.loads(out)
    expected = json.loads((corpus / "expected.json").read_text())["pages"]
    assert set(report["groups"]) == set(json.loads((corpus / "manifest.json").read_text()).values())
    for doc in report["documents"]:
        exp = expected[doc["id"]]
        d = doc["detection"]
        assert [d["tp"], d["fp"], d["fn"]] == exp["tally"]
        for name in ("text_edit", "reading_order_edit", "table_edit", "formula_edit"):
            assert doc[name]["normalized"] == pytest.approx(exp[name]["normalized"], abs=1e-9)


def test_identical_invocations_identical_bytes(capsys, corpus):
    argv = ["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "pred"), "--report", "markdown"]
    first = run(capsys, argv)[1]
    assert first == run(capsys, argv)[1]
    assert "| Group | Pages | OverallEdit↓" in first


def test_output_file(capsys, corpus, tmp_path):
    target = tmp_path / "r.json"
    assert main(["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "pred"), "-o", str(target)]) == 0
    assert json.loads(target.read_text())["empty"] is False


def test_config_file_and_flag_precedence(capsys, corpus, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gt": str(corpus / "gt"), "pred": str(corpus / "pred"), "iou-threshold": 0.3, "report": "markdown"}))
    code, out, _ = run(capsys, ["evaluate", "--config", str(cfg), "--report", "json"])
    assert code == 0
    assert json.loads(out)["config"]["iou_threshold"] == 0.3


def test_validate_clean_and_inverted(capsys, corpus, tmp_path):
    assert run(capsys, ["validate", "--gt", str(corpus / "gt")])[0] == 0
    bad = tmp_path / "bad"
    bad.mkdir()
    doc = {"id": "x", "page": {"width": 100, "height": 100}, "blocks": [{"bbox": [50, 0, 10, 10], "category": "text", "text": ""}]}
    (bad / "x.json").write_text(json.dumps(doc))
    code, out, _ = run(capsys, ["validate", "--gt", str(bad)])
    assert code != 0
    assert len(out.strip().splitlines()) == 1
    assert "x1 >= x2" in out


def test_missing_path(capsys, tmp_path):
    code, _, err = run(capsys, ["evaluate", "--gt", str(tmp_path / "nope"), "--pred", str(tmp_path)])
    assert code == 2 and "nope" in err


def test_malformed_annotation(capsys, corpus):
    target = sorted((corpus / "pred").glob("*.json"))[0]
    target.write_text('{\n  "id": "x",\n  broken\n}\n')
    code, _, err = run(capsys, ["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "pred")])
    assert code == 3
    assert target.name in err and "line 3" in err


@pytest.mark.parametrize("extra", [["--iou-threshold", "1.5"], ["--mode", "fuzzy"], ["--workers", "0"], ["--report", "xml"]])
def test_config_errors(capsys, corpus, extra):
    code, _, _ = run(capsys, ["evaluate", "--gt", str(corpus / "gt"), "--pred", str(corpus / "pred"), *extra])
    assert code == 4


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"speed": 3}')
    assert run(capsys, ["evaluate", "--config", str(cfg)])[0] == 4


def test_empty_corpus(capsys, tmp_path):
    (tmp_path / "g").mkdir()
    code, out, _ = run(capsys, ["evaluate", "--gt", str(tmp_path / "g"), "--pred", str(tmp_path / "g")])
    assert code == 0 and json.loads(out)["empty"] is True


def test_oracle_check_command(capsys):
    code, _, err = run(capsys, ["oracle-check", "--seed", "3", "--instances", "50", "--tree-pairs", "30", "--mixtures", "5"])
    assert code == 0 and "agree" in err
    assert run_oracle_checks(4, 20, 10, 3) == []
