import json

import pytest

from apfa_lab.automaton import isomorphism
from apfa_lab.catalog import full_support_data, memory_gap_chain, shared_future_example
from apfa_lab.cli import main
from apfa_lab.dataset import read_dataset, write_dataset
from apfa_lab.io import load_apfa, save_apfa


@pytest.fixture
def files(tmp_path):
    write_dataset(full_support_data(), tmp_path / "d.csv", header=False)
    save_apfa(shared_future_example(), tmp_path / "gen.json")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_tree_fit_merge_and_test(files, capsys):
    code, out, _ = run(capsys, "tree", files / "d.csv", "-o", files / "t.json", "--reproducible")
    assert code == 0 and out == ""
    doc = json.loads((files / "t.json").read_text())
    assert "created" not in doc["provenance"] and len(doc["provenance"]["dataset_sha256"]) == 64

    code, out, _ = run(capsys, "fit", files / "t.json", files / "d.csv")
    assert code == 0
    assert json.loads(out)["fit"]["loglik"] == pytest.approx(-116.2117, abs=1e-3)

    code, out, err = run(capsys, "merge", files / "t.json", "--states", "2,3", "-o", files / "m.json")
    assert code == 0 and "{2,3} {4,6} {5,7}" in err

    code, out, _ = run(capsys, "test", files / "d.csv", "--states", "2,3")
    res = json.loads(out)
    assert res["g2"] == pytest.approx(53.1228, abs=1e-3) and res["df_adjusted"] == 3

    code, out, _ = run(capsys, "test", files / "d.csv", "--model", files / "t.json", "--nested", files / "m.json", "--table")
    assert code == 0 and "total" in out and "53.12" in out


def test_select_is_deterministic_across_threads(files, capsys):
    code, _, _ = run(capsys, "simulate", files / "gen.json", "-n", 3000, "--seed", 4, "-o", files / "s.csv")
    assert code == 0
    outs = []
    for threads in (1, 3):
        code, out, _ = run(capsys, "select", files / "s.csv", "--threads", threads, "--seedless-trace", "--reproducible")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert doc["selection"]["merges"] == len(doc["trace"]) and all("seconds" not in s for s in doc["trace"])


def test_simulate_then_tree_counts_all_rows(files, capsys):
    run(capsys, "simulate", files / "gen.json", "-n", 500, "--seed", 1, "--header", "-o", files / "s.csv")
    d = read_dataset(files / "s.csv", header=True)
    assert d.n == 500
    code, out, _ = run(capsys, "tree", files / "s.csv", "--header")
    doc = json.loads(out)
    assert sum(e["count"] for e in doc["edges"] if e["source"] == 1) == 500


def test_equiv_and_dot(files, capsys):
    save_apfa(memory_gap_chain(), files / "gap.json")
    code, out, _ = run(capsys, "equiv", files / "gap.json")
    assert code == 0 and json.loads(out)["dag"]["parents"]["3"] == [1]
    (files / "g.json").write_text(json.dumps({"schema": "apfa-lab/ug/1", "p": 3, "edges": [[1, 2], [1, 3]]}))
    code, out, _ = run(capsys, "equiv", "--ug", files / "g.json", "--reproducible")
    (files / "back.json").write_text(out)
    assert code == 0 and isomorphism(load_apfa(files / "back.json"), memory_gap_chain()) is not None
    code, out, _ = run(capsys, "export-dot", files / "gen.json")
    assert code == 0 and out.startswith("digraph")


@pytest.mark.parametrize(
    "argv, code",
    [
        (["bogus"], 1),
        (["select", "{d}", "--alpha", "-1"], 1),
        (["select", "{d}", "--alpha", "bic", "--mu", "0.1"], 1),
        (["test", "{d}", "--nested", "{m}"], 1),
        (["equiv"], 1),
        (["tree", "{bad}"], 2),
        (["tree", "{missing}"], 2),
        (["merge", "{m}", "--states", "1,2"], 3),
        (["fit", "{broken}", "{d}"], 3),
        (["equiv", "--dag", "{dag}"], 3),
    ],
)
def test_exit_codes(files, capsys, argv, code):
    (files / "bad.csv").write_text("1,2\n1,x\n")
    (files / "broken.json").write_text("{")
    (files / "dag.json").write_text(json.dumps({"schema": "apfa-lab/dag/1", "p": 3, "parents": {"3": [1]}}))
    names = {"d": files / "d.csv", "m": files / "gen.json", "bad": files / "bad.csv",
             "missing": files / "nope.csv", "broken": files / "broken.json", "dag": files / "dag.json"}
    got, _, err = run(capsys, *[a.format(**names) for a in argv])
    assert got == code
    assert err


def test_bad_row_message_names_the_line(files, capsys):
    (files / "bad.csv").write_text("1,2\n1,x\n")
    code, _, err = run(capsys, "tree", files / "bad.csv")
    assert code == 2 and "row 2" in err
