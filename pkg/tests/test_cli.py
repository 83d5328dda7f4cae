import json

import numpy as np
import pytest

from opineq import cli
from opineq.cli import InputError, dump_sequence, load_sequence, load_step_function, main
from opineq.reports import InequalityReport
from opineq.sequence import OperatorSequence
from opineq.symcore import random_psd


def _write(path, obj):
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_no_arguments_prints_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_flag_is_usage_error():
    assert main(["verify", "--trials", "x"]) == 2
    assert main(["frobnicate"]) == 2


def test_tg_on_repeated_tuple(tmp_path, capsys):
    a = [2.0, 1.0, 1.0, 3.0]
    path = _write(tmp_path / "ops.json", {"dim": 2, "terms": [a, a]})
    assert main(["tg", "--input", path]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[0] == "limit" and float(lines[0].split()[1]) == pytest.approx(5.0, rel=1e-10)
    assert lines[1].split() == ["logexp", "5"]


def test_tg_singular_is_undefined(tmp_path, capsys):
    path = _write(tmp_path / "ops.json", {"dim": 2, "terms": [[1, 0, 0, 0], [4, 0, 0, 1]]})
    out = tmp_path / "tg.json"
    assert main(["tg", "--input", path, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "logexp undefined" in text
    doc = json.loads(out.read_text())
    assert doc["limit"] == pytest.approx(2.0, rel=1e-10) and doc["logexp"] is None


def test_verify_suite_writes_reports(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "--suite", "quick", "--trials", "3", "--seed", "7", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data) == 12 and all(r["passed"] for r in data)
    text = capsys.readouterr().out
    assert "worst gap" in text and "best ratio" in text and "total: 12 checks" in text
    csv_out = tmp_path / "r.csv"
    assert main(["verify", "--suite", "quick", "--trials", "2", "--out", str(csv_out), "--format", "csv"]) == 0
    assert csv_out.read_text().splitlines()[0] == "name,p,dim,N,M,seed,gap,ratio,passed"


def test_verify_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["verify", "--suite", "quick", "--trials", "4", "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_verify_flags(tmp_path):
    out = tmp_path / "r.json"
    args = ["verify", "--suite", "quick", "--checkers", "tracial_hardy", "--trials", "3",
            "--dims", "2", "--p", "4.5", "--M", "100", "--out", str(out)]
    assert main(args) == 0
    data = json.loads(out.read_text())
    assert all(r["params"]["dim"] == 2 and r["params"]["p"] == 4.5 and r["params"]["M"] == 100 for r in data)
    assert main(["verify", "--suite", "quick", "--p", "3.0"]) == 2
    assert main(["verify", "--suite", "nope"]) == 2
    assert main(["verify", "--suite", "quick", "--M", "3"]) == 2
    assert main(["verify", "--suite", "quick", "--trials", "-1"]) == 2


def test_failed_check_exits_one(monkeypatch, tmp_path):
    def failing(a, p, tol, m):
        return InequalityReport(name="discrete_hardy", gap=-1.0, tolerance=1e-8)

    monkeypatch.setattr(cli, "check_discrete_hardy", failing)
    path = _write(tmp_path / "s.json", {"dim": 1, "terms": [[1], [0]]})
    assert main(["verify", "--input", path, "--p", "2"]) == 1


def test_verify_input(tmp_path, capsys):
    path = _write(tmp_path / "s.json", {"dim": 1, "terms": [[1], [0]]})
    assert main(["verify", "--input", path, "--p", "1.5,3"]) == 0
    assert "tracial_hardy: 2 checks" in capsys.readouterr().out


def test_config_overrides_flags(tmp_path):
    out = tmp_path / "r.json"
    cfg = _write(tmp_path / "c.json", {"suite": "quick", "trials": 2, "seed": 3, "dims": [1], "out": str(out)})
    assert main(["verify", "--trials", "50", "--config", cfg]) == 0
    data = json.loads(out.read_text())
    assert len(data) == 8 and all(r["params"]["dim"] == 1 for r in data)


@pytest.mark.parametrize(
    "content,needle",
    [
        ('{"trials": 2,\n "seed": }', "line 2"),
        ({"bogus": 1}, "unknown field 'bogus'"),
        ({"trials": "many"}, "field 'trials'"),
        ([1, 2], "top level"),
    ],
)
def test_malformed_config(tmp_path, capsys, content, needle):
    cfg = _write(tmp_path / "c.json", content)
    assert main(["verify", "--config", cfg]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config(capsys):
    assert main(["verify", "--config", "/nonexistent/c.json"]) == 2


def test_probe_commands(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["probe", "--kind", "carleman", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data[0]["trace"][0] == [1, 1.0]
    assert main(["probe", "--kind", "extremal", "--p", "2", "--N", "1000"]) == 0
    assert main(["probe", "--kind", "optimize", "--p", "1.5", "--dims", "2", "--N", "6", "--trials", "20"]) == 0
    assert main(["probe", "--kind", "violation", "--p", "3", "--N", "2", "--trials", "0"]) == 0
    assert main(["probe", "--kind", "violation", "--p", "2"]) == 2
    assert "no candidate" in capsys.readouterr().out


def test_lemma_commands(tmp_path):
    path = _write(tmp_path / "g.json", {"breakpoints": [0.5, 1.0, 3.0], "values": [[1, 0, 0, 2], [2, 1, 1, 2]]})
    assert main(["lemma", "--input", path, "--p", "1,1.5,4"]) == 0
    assert main(["lemma", "--trials", "2"]) == 0
    bad = _write(tmp_path / "h.json", {"breakpoints": [1.0, 0.5], "values": [[1]]})
    assert main(["lemma", "--input", bad]) == 2


def test_load_sequence_scalar(tmp_path):
    a = load_sequence(_write(tmp_path / "s.json", {"dim": 1, "terms": [[1], [0]]}))
    np.testing.assert_array_equal(a.terms.ravel(), [1.0, 0.0])


def test_sequence_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    a = OperatorSequence(np.array([random_psd(3, 2, rng) * 10.0 ** rng.uniform(-5, 5) for _ in range(6)]))
    path = tmp_path / "s.json"
    dump_sequence(a, path)
    b = load_sequence(path)
    assert np.array_equal(a.terms, b.terms)
    assert a.terms.tobytes() == b.terms.tobytes()


@pytest.mark.parametrize(
    "doc,needle",
    [
        ({"dim": 1, "terms": [[1], [-1e-3]]}, "term 1"),
        ({"dim": 2, "terms": [[1, 0, 0, 1], [1, 0.5, 0, 1]]}, "terms[1]: not symmetric"),
        ({"dim": 2, "terms": [[1, 0, 0, 1], [1, 0, 1]]}, "terms[1]: expected 4 numbers"),
        ({"dim": 0, "terms": [[1]]}, "'dim'"),
        ({"dim": 1, "terms": [["a"]]}, "numbers"),
        ({"dim": 1}, "'terms'"),
    ],
)
def test_load_sequence_errors(tmp_path, doc, needle):
    with pytest.raises(InputError) as info:
        load_sequence(_write(tmp_path / "s.json", doc))
    assert needle in str(info.value)


def test_small_asymmetry_is_symmetrized(tmp_path):
    a = load_sequence(_write(tmp_path / "s.json", {"dim": 2, "terms": [[1, 0.5, 0.5 + 1e-12, 1]]}))
    assert a.terms[0, 0, 1] == a.terms[0, 1, 0]


def test_load_step_function(tmp_path):
    g = load_step_function(_write(tmp_path / "g.json", {"breakpoints": [1, 2], "values": [[4]]}))
    assert g.dim == 1 and g.values[0, 0, 0] == 4.0
