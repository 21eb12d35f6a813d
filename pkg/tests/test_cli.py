import csv
import json

import pytest

from curvmix.chain import read_chain
from curvmix.cli import main
from curvmix.generators import cycle
from curvmix.transport import NONNEGATIVE


def test_generate_roundtrip(tmp_path):
    out = tmp_path / "c.json"
    assert main(["generate", "cycle", "--n", "6", "--out", str(out)]) == 0
    assert read_chain(out).P == cycle(6).P
    out2 = tmp_path / "c2.json"
    assert main(["generate", "--out", str(out2), "cycle", "--n", "6"]) == 0
    assert out.read_text() == out2.read_text()


def test_generate_abelian_cayley_is_deterministic(capsys):
    argv = ["generate", "abelian-cayley", "--group", "8", "--degree", "2", "--seed", "3"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    assert json.loads(first)["n"] == 8


def test_generate_size_error(capsys):
    assert main(["generate", "cycle", "--n", "2"]) == 2
    assert "SizeError" in capsys.readouterr().err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["generate", "torus"])
    assert exc.value.code == 2


def test_analyze_with_trace(tmp_path, capsys):
    chain = tmp_path / "c.json"
    chain.write_text(json.dumps(cycle(4).to_json_dict()))
    trace = tmp_path / "trace.csv"
    assert main(["analyze", str(chain), "--trace", str(trace)]) == 0
    profile = json.loads(capsys.readouterr().out)
    assert profile["t_mix"] == 1 and profile["curvature"]["verdict"] == NONNEGATIVE
    rows = list(csv.reader(trace.open()))
    assert rows[0][-1] == "phi_pt" and rows[2][-1].startswith("1/4|")


def test_analyze_rejects_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", str(bad)]) == 2
    assert "ParseError" in capsys.readouterr().err
    reducible = tmp_path / "red.json"
    reducible.write_text(json.dumps({"n": 2, "rows": [[1, 0], [0, 1]]}))
    assert main(["analyze", str(reducible)]) == 2
    assert "ReducibleError" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["--horizon", "0"], ["--enum-limit", "40"], ["--seed", "-1"]])
def test_analyze_bad_config(tmp_path, argv):
    chain = tmp_path / "c.json"
    chain.write_text(json.dumps(cycle(4).to_json_dict()))
    with pytest.raises(SystemExit) as exc:
        main(["analyze", str(chain), *argv])
    assert exc.value.code == 2


def test_verify_empty_corpus(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--corpus", "none", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["reports"] == [] and doc["summary"]["total"] == 0
