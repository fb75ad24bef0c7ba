import json

import pytest

from cuspext.cli import EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, main


def _record(out, command):
    return json.loads((out / f"{command}.json").read_text())


def test_exponents(capsys, tmp_path):
    assert main(["exponents", "--p", "3", "--q", "3", "--direction", "in", "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "P=3, Q=3/2"
    rec = _record(tmp_path, "exponents")
    assert rec["results"] == {"P": "3", "Q": "3/2"}
    assert rec["tool"] == "cuspext"
    assert "wall_clock_seconds" in rec


def test_exponents_p_lambda(capsys):
    assert main(["exponents", "--p-lambda", "3", "--no-files"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "P=3, Q=3/2"


def test_extend_writes_series(tmp_path):
    code = main(["extend", "--s", "2", "--q", "4", "--gamma", "0.2", "--levels", "6", "--n", "16",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    rec = _record(tmp_path, "extend")
    assert rec["results"]["P"] == "2" and rec["results"]["Q"] == "8/5"
    lines = (tmp_path / "extend.csv").read_text().strip().splitlines()
    assert lines[0] == "level,cutoff,source_seminorm,extension_seminorm,ratio"
    assert len(lines) == 1 + 7
    assert rec["results"]["continuity_max_relative_jump"] <= 1e-2


def test_extend_non_member(capsys, tmp_path):
    code = main(["extend", "--s", "2", "--q", "4", "--gamma", "-0.9", "--out", str(tmp_path)])
    assert code == EXIT_PRECONDITION
    assert "gamma > 1 - 2/P" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["exponents", "--bogus"]) == EXIT_USAGE


def test_bad_value():
    assert main(["exponents", "--p", "1/2", "--q", "2", "--no-files"]) == EXIT_PRECONDITION


def test_distortion_scan(tmp_path):
    assert main(["distortion-scan", "--s", "3/2", "--p", "2", "--n", "32", "--out", str(tmp_path)]) == EXIT_OK
    cell = _record(tmp_path, "distortion-scan")["results"]["cells"][0]
    assert cell["verdict"] == "finite"
    assert cell["oracle_threshold"] == "3"
    assert cell["profile_oracle"] == "2/3"
    header = (tmp_path / "distortion-scan.csv").read_text().splitlines()[0]
    assert header.startswith("s,p,I_0,") and header.endswith(",verdict,oracle_threshold")


def test_classify(capsys):
    assert main(["classify", "--increments", "1,1,1,1", "--no-files"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "divergent"
    assert main(["classify", "--values", "0,1,2", "--no-files"]) == EXIT_PRECONDITION
    assert main(["classify", "--no-files"]) == EXIT_PRECONDITION


def test_sharpness_files(tmp_path):
    assert main(["sharpness", "--p", "4", "--q", "2", "--s", "3/2,2", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "sharpness.csv").exists()
    assert (tmp_path / "phase-diagram.svg").exists()


def test_config_file_and_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.toml"
    cfg.write_text('p = "3"\nq = "3"\nout = "from-config"\n')
    env_out = tmp_path / "env"
    monkeypatch.setenv("CUSPEXT_OUT", str(env_out))
    assert main(["exponents", "--config", str(cfg), "--q", "2"]) == EXIT_OK
    rec = _record(env_out, "exponents")
    assert rec["results"] == {"P": "3", "Q": "4/3"}
    flag_out = tmp_path / "flag"
    assert main(["exponents", "--config", str(cfg), "--out", str(flag_out)]) == EXIT_OK
    assert _record(flag_out, "exponents")["results"]["Q"] == "3/2"


def test_report(tmp_path, capsys):
    main(["exponents", "--out", str(tmp_path)])
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    rec = _record(tmp_path, "report")
    assert [e["command"] for e in rec["results"]["records"]] == ["exponents"]


def test_missing_config():
    assert main(["exponents", "--config", "/nonexistent/cfg.toml", "--no-files"]) == EXIT_PRECONDITION


def test_version(capsys):
    with pytest.raises(SystemExit):
        raise SystemExit(main(["--version"]))
    assert "cuspext" in capsys.readouterr().out
