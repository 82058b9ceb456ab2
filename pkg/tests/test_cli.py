import json
import math

import pytest

from prunewalk.cli import run
from prunewalk.report import ReportError, make_report, render_csv, render_json, write_report


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_prune_command(tmp_path, capsys):
    p = tmp_path / "path.json"
    p.write_text(json.dumps([[0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 1, 0]]))
    code, out, _ = _run(capsys, "prune", "--path", str(p))
    assert code == 0
    rep = json.loads(out)
    assert rep["experiment"] == "prune" and rep["failures"] == []
    assert rep["aggregate"]["skeleton"] == [[0, 0, 0], [0, 1, 0]]


def test_enumerate_csv(capsys):
    code, out, _ = _run(capsys, "enumerate", "--max-len", "6", "--format", "csv")
    assert code == 0
    assert out.splitlines() == ["length,count", "0,1", "1,0", "2,1", "3,0", "4,2", "5,0", "6,5"]


def test_tree_and_es_roundtrip(tmp_path, capsys):
    seg = tmp_path / "seg.json"
    seg.write_text(json.dumps([[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 0, 0], [0, 0, 0]]))
    for cmd in ("tree", "es"):
        code, out, _ = _run(capsys, cmd, "--segment", str(seg))
        assert code == 0
        assert json.loads(out)["aggregate"]["roundtrip_ok"] is True


def test_exit_codes(tmp_path, capsys):
    code, _, err = _run(capsys, "enumerate", "--out", str(tmp_path / "missing" / "x.json"))
    assert code == 2 and "missing" in err
    assert _run(capsys, "enumerate", "--family", "nonsense")[0] == 2
    assert _run(capsys, "enumerate", "--bogus")[0] == 2
    assert _run(capsys, "estimate", "gamma", "--d", "2", "--samples", "10")[0] == 2
    bad = tmp_path / "fam.json"
    bad.write_text('{"d": 3, "loops": [[[0,0,0],[1,0,0],[0,0,0],[1,0,0],[0,0,0]]]}')
    code, _, err = _run(capsys, "enumerate", "--family", str(bad))
    assert code == 2 and "loop 0" in err
    assert _run(capsys, "enumerate", "--max-len", "40")[0] == 3


def test_report_file_determinism(tmp_path, capsys):
    outs = []
    for threads in ("1", "3"):
        f = tmp_path / f"g{threads}.json"
        code, _, _ = _run(capsys, "estimate", "gamma", "--horizon", "500", "--samples", "3000",
                          "--seed", "4", "--threads", threads, "--out", str(f))
        assert code == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert set(rep) == {"experiment", "config", "per_seed", "aggregate", "failures"}
    assert {"estimate", "stderr", "n", "horizon", "seed"} <= set(rep["aggregate"])


def test_tail_csv_header(capsys):
    code, out, _ = _run(capsys, "experiment", "tail", "--N", "300", "--seeds", "20", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "t,survival,stderr"


def test_render_helpers(tmp_path):
    rep = make_report("x", {"a": 1}, [], {"v": math.inf, "rows": [[0, 0.5, 0.1]]}, [])
    text = render_json(rep)
    assert '"inf"' in text and text.endswith("\n")
    assert render_json(rep) == text
    assert render_csv([(1, 0.25, 0.0)]) == "t,survival,stderr\n1,0.25,0.0\n"
    assert write_report(rep, str(tmp_path / "r.json")) == text
    with pytest.raises(ReportError):
        write_report(rep, str(tmp_path / "no" / "r.json"))
    with pytest.raises(ReportError):
        write_report(make_report("y", {}), None, "csv")
