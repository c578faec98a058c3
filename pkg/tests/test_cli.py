import json

import pytest

from rankcot.cli import main
from rankcot.core import one_eval


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def test_family_then_rank(tmp_path, capsys):
    tree = tmp_path / "t.json"
    assert run(capsys, "family", "one", "--n", "6", "--k", "2", "--emit", "tree", "-o", str(tree))[0] == 0
    assert run(capsys, "rank", "yesdepth", str(tree)) == (0, "2", "")


def test_compile_eval_round_trip(tmp_path, capsys):
    tree, machine, words = tmp_path / "t.json", tmp_path / "m.json", tmp_path / "w.json"
    run(capsys, "family", "one", "--n", "5", "--k", "2", "-o", str(tree))
    assert run(capsys, "compile", "--tree", str(tree), "-o", str(machine))[0] == 0
    fixture = [[0, 0, 0, 0, 0], [1, 0, 1, 0, 0], [0, 1, 1, 1, 1], [0, 0, 0, 1, 1]]
    words.write_text(json.dumps(fixture))
    _, a, _ = run(capsys, "eval", "--tree", str(tree), "--words", str(words))
    _, b, _ = run(capsys, "eval", "--machine", str(machine), "--words", str(words))
    assert a == b
    assert [r["output"] for r in json.loads(a)] == [one_eval(5, 2, w) - 1 for w in fixture]


def test_extract(tmp_path, capsys):
    machine = tmp_path / "m.json"
    run(capsys, "family", "comp", "--n", "3", "--t", "2", "--emit", "decoder", "-o", str(machine))
    code, out, _ = run(capsys, "extract", "--machine", str(machine))
    assert code == 0 and json.loads(out)["heads"] == 1


def test_separate_worked_instance(capsys):
    assert run(capsys, "separate") == (1, "None", "")


def test_separate_found(tmp_path, capsys):
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"universe": ["u", "v"], "F": [["u"]], "G": [["v"]]}))
    code, out, _ = run(capsys, "separate", "--instance", str(inst))
    assert code == 0 and set(json.loads(out)) == {"first", "second"}


def test_consistency_unsat(tmp_path, capsys):
    sample = tmp_path / "s.json"
    sample.write_text(json.dumps({"sigma_sizes": [2, 2], "pairs": [[[0, 0], 0], [[0, 1], 1], [[1, 0], 1], [[1, 1], 0]]}))
    assert run(capsys, "consistency", "--sample", str(sample), "--k", "1")[:2] == (1, "unsat")
    code, out, _ = run(capsys, "consistency", "--sample", str(sample), "--k", "2")
    assert code == 0 and "root" in json.loads(out)


def test_reduce_and_gadget(tmp_path, capsys):
    phi = tmp_path / "f.nae"
    phi.write_text("p nae3 3 1\n1 2 3\n")
    code, out, _ = run(capsys, "reduce-nae", str(phi))
    assert code == 0 and len(json.loads(out)["universe"]) == 16
    code, out, _ = run(capsys, "reduce-nae", str(phi), "--sample")
    assert code == 0 and len(json.loads(out)["sigma_sizes"]) == 51
    code, out, _ = run(capsys, "gadget-verify")
    assert code == 0 and all(r["separates"] for r in json.loads(out))


def test_protocol_trace(tmp_path, capsys):
    tree = tmp_path / "t.json"
    run(capsys, "family", "one", "--n", "8", "--k", "2", "-o", str(tree))
    code, out, _ = run(capsys, "protocol", "compile", "--tree", str(tree), "--alice", "1,2,3,4")
    assert code == 0 and json.loads(out)["total_bits"] == 16
    code, out, _ = run(capsys, "protocol", "run", "--tree", str(tree), "--alice", "1,2,3,4",
                       "--word", "0,1,0,0,1,0,0,0", "--trace")
    row = json.loads(out)[0]
    assert row["output"] == 4 and len(row["trace"]) == 3


def test_rank_mh(tmp_path, capsys):
    table = tmp_path / "x.json"
    table.write_text(json.dumps({"sigma_sizes": [2, 2], "out_size": 2, "outputs": [0, 1, 1, 0]}))
    assert run(capsys, "rank", "mh", str(table), "--heads", "2")[:2] == (0, "1")
    assert run(capsys, "rank", "mh", str(table), "--heads", "1", "--max-depth", "1")[:2] == (1, "None")
    assert run(capsys, "rank", "minimax", str(table))[:2] == (0, "2")


def test_learn_is_deterministic(capsys):
    a = run(capsys, "learn", "--n", "5", "--k", "1", "--seed", "3")
    b = run(capsys, "learn", "--n", "5", "--k", "1", "--seed", "3")
    assert a == b and a[0] == 0
    assert json.loads(a[1])["sample_size"] > 0


def test_exit_codes(tmp_path, capsys, monkeypatch):
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "rank", "yesdepth", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "family", "comp", "--n", "3")[0] == 2
    table = tmp_path / "t.json"
    run(capsys, "family", "one", "--n", "8", "--k", "2", "--emit", "table", "-o", str(table))
    monkeypatch.setenv("RANKCOT_BUDGET", "10")
    code, _, err = run(capsys, "rank", "yesdepth", str(table))
    assert code == 3 and "budget" in err
