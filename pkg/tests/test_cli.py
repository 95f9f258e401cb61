import json

import numpy as np
import pytest

from irkwavelab import cli
from irkwavelab.butcher import builtin_scheme


def call(tmp_path, *args):
    return cli.main(["--output-dir", str(tmp_path), *args])


def test_schemes_show(capsys, tmp_path):
    assert call(tmp_path, "schemes", "show", "IRK24") == 0
    d = json.loads(capsys.readouterr().out)
    assert d["b"] == [0.5, 0.5]


def test_schemes_list(capsys, tmp_path):
    assert call(tmp_path, "schemes", "list") == 0
    out = capsys.readouterr().out
    assert "S3D1" in out and "IRK36" in out


def test_unknown_scheme_is_usage_error(capsys, tmp_path):
    assert call(tmp_path, "schemes", "show", "NOPE") == 2
    assert "NOPE" in capsys.readouterr().err


def test_too_few_samples_rejected(tmp_path):
    assert call(tmp_path, "analyze", "IRK24", "--samples", "8") == 2
    assert not (tmp_path / "manifest.json").exists()


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        call(tmp_path, "verify")
    assert exc.value.code == 2


def test_analyze_writes_curve_and_report(tmp_path):
    assert call(tmp_path, "analyze", "S2B1", "--samples", "64") == 0
    lines = (tmp_path / "S2B1_curve.csv").read_text().splitlines()
    assert len(lines) == 65
    report = json.loads((tmp_path / "S2B1_report.json").read_text())
    assert report["order"] == 2
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["artifacts"][-1].endswith("manifest.json")


def test_analyze_reads_tableau_file(tmp_path):
    path = tmp_path / "mine.json"
    path.write_text(json.dumps(builtin_scheme("S3B1").to_dict()))
    assert call(tmp_path, "analyze", str(path), "--samples", "32") == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": [[0.5]],\n "b": [1.0,]}')
    assert call(tmp_path, "analyze", str(bad)) == 2


def test_optimize_recovers_registry_row(tmp_path):
    code = call(tmp_path, "optimize", "--family", "2", "--alpha", "0",
                "--closures", "b1 = b2; a11 = a22")
    assert code == 0
    log = json.loads((tmp_path / "S2A1_derivation.json").read_text())
    assert log["param_min"] == pytest.approx(-0.0952154411, abs=1e-9)
    assert log["residual"] < 1e-12
    assert log["max_abs_diff_to_reference"] < 1e-8


def test_optimize_bad_closures(tmp_path, capsys):
    assert call(tmp_path, "optimize", "--family", "2", "--alpha", "0", "--closures", "b7 = 1") == 2
    assert "line 1" in capsys.readouterr().err


def test_run_zero_span_is_empty_success(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": 1, "scheme": "IRK24", "t_end": 0.0, "output": "z"}))
    assert call(tmp_path, "run", "--config", str(cfg)) == 0
    assert (tmp_path / "z.csv").read_text() == "problem,scheme,dt,t_end,steps,error\n"


def test_run_missing_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scheme": "IRK24"}))
    assert call(tmp_path, "run", "--config", str(cfg)) == 2


def test_run_outputs_are_byte_identical(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": 3, "scheme": "S2B1", "nc": 2.0, "h": 0.05,
                               "t_end": 2.0, "output": "p3"}))
    blobs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert cli.main(["--output-dir", str(out), "run", "--config", str(cfg)]) == 0
        blobs.append(((out / "p3.csv").read_bytes(), (out / "p3_state.csv").read_bytes()))
    assert blobs[0] == blobs[1]


def test_map_writes_grid(tmp_path):
    code = call(tmp_path, "map", "--scheme", "IRK24", "--operator", "CD6", "--nodes", "101",
                "--nc", "0.5:1.0:2", "--kh", "0.5:1.5:3")
    assert code == 0
    rows = (tmp_path / "map_IRK24_CD6.csv").read_text().splitlines()
    assert len(rows) == 1 + 6


def test_map_bad_operator(tmp_path):
    assert call(tmp_path, "map", "--scheme", "IRK24", "--operator", "XX") == 2


def test_parse_range():
    np.testing.assert_allclose(cli.parse_range("0:1:3"), [0, 0.5, 1])
    np.testing.assert_allclose(cli.parse_range("2.5"), [2.5])
    with pytest.raises(cli.UsageError):
        cli.parse_range("0:1")


def test_verify_table10_passes(tmp_path):
    assert call(tmp_path, "verify", "--table", "10") == 0
    rows = (tmp_path / "verify10.csv").read_text().splitlines()
    assert rows[0] == "table,scheme,column,measured,paper,rule,status"
    assert all(not r.endswith("FAIL") for r in rows)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert all(man["checks"].values())


def test_verify_bad_table(tmp_path):
    assert call(tmp_path, "verify", "--table", "3") == 2
