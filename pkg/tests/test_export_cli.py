import json
import re

import numpy as np
import pytest

from peakonlab import LambdaRect, build_grid, evolve_full, phi, pseudospectral_scan
from peakonlab.cli import ConfigError, main, parse_config, run_scenario
from peakonlab.export import dumps, export, fmt, write_text
from peakonlab.report import Check, RunReport


@pytest.fixture(scope="module")
def scan():
    return pseudospectral_scan("L", 2.0, build_grid(10.0, 40, 2.0), LambdaRect(0.0, 1.0, -0.5, 0.5, 3, 2))


@pytest.fixture(scope="module")
def trace():
    g = build_grid(20.0, 100, 3.0)
    return evolve_full("eigp4", phi(g), 3.0, 0.2)


# ---------------------------------------------------------------------- export


def test_number_rendering_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e22, 123456789.123456789):
        assert float(fmt(x)) == x
    assert fmt(3) == "3" and fmt(True) == "true"
    assert fmt(1 - 2j) == "1-2j"


def test_json_is_ordered_and_null_for_nonfinite():
    text = dumps({"z": 1.0, "a": [np.nan, np.inf, 2], "c": np.float64(0.5)})
    assert text.index('"z"') < text.index('"a"')
    assert json.loads(text) == {"z": 1.0, "a": [None, None, 2], "c": 0.5}
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_scan_csv_schema(scan, tmp_path):
    export(scan, "csv", tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "re_lambda,im_lambda,sigma_min"
    assert len(lines) == 1 + 6
    assert [float(v) for v in lines[2].split(",")[:2]] == [0.5, -0.5]


def test_scan_svg_is_self_contained(scan, tmp_path):
    export(scan, "svg", tmp_path / "s.svg")
    text = (tmp_path / "s.svg").read_text()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    assert "href" not in text and "<script" not in text


def test_trace_svg_has_one_polyline_per_series(trace, tmp_path):
    export(trace, "svg", tmp_path / "t.svg")
    text = (tmp_path / "t.svg").read_text()
    assert text.count("<polyline") == len(trace.COLUMNS) - 1


def test_trace_csv_columns(trace, tmp_path):
    export(trace, "csv", tmp_path / "t.csv")
    head = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert head == "t,l2_total,l2_left,l2_right,alpha,beta,inv_one,inv_sgn,balance_residual"


def test_export_is_byte_identical(scan, trace, tmp_path):
    for obj in (scan, trace):
        for f in ("csv", "json", "svg"):
            export(obj, f, tmp_path / f"a.{f}")
            export(obj, f, tmp_path / f"b.{f}")
            assert (tmp_path / f"a.{f}").read_bytes() == (tmp_path / f"b.{f}").read_bytes()


def test_export_errors(scan, tmp_path):
    with pytest.raises(ValueError):
        export(scan, "png", tmp_path / "x.png")
    with pytest.raises(ValueError):
        export({"a": 1}, "csv", tmp_path / "x.csv")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=re.escape(str(blocker / "x.json"))):
        write_text(blocker / "x.json", "{}")


# ---------------------------------------------------------------------- reports


def test_check_relations():
    assert Check("a", 1.05, 1.0, 0.1).passed
    assert not Check("a", 1.2, 1.0, 0.1).passed
    assert Check("a", 0.5, 0.0, 1.0, "<=").passed and not Check("a", 1.5, 0.0, 1.0, "<=").passed
    assert Check("a", 0.85, 1.0, 0.2, ">=").passed and not Check("a", 0.7, 1.0, 0.2, ">=").passed
    assert not Check("a", float("nan"), 0.0, 1.0, "<=").passed
    with pytest.raises(ValueError):
        Check("a", 1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        Check("a", 1.0, 1.0, 0.0, "<")


def test_report_status_is_conjunction():
    r = RunReport("x", {})
    assert r.passed
    r.add(Check("ok", 0.0, 0.0, 1.0, "<="))
    assert r.passed
    r.add(Check("bad", 2.0, 0.0, 1.0, "<="))
    assert not r.passed
    d = r.to_dict()
    assert d["passed"] is False and "timings" not in d
    assert r.summary().splitlines()[-1] == "x: FAILED"


# ---------------------------------------------------------------------- config


def test_parse_config_examples():
    cfg = parse_config("scenario = identities\nb = 2, 3")
    assert cfg.scenario == "identities" and cfg.b == [2.0, 3.0]
    with pytest.raises(ConfigError, match="unknown scenario"):
        parse_config("scenario = bogus")
    with pytest.raises(ConfigError, match="minimum"):
        parse_config("scenario = identities\nn_half = 4")


@pytest.mark.parametrize(
    "text,match",
    [
        ("scenario = identities\nfoo = 1", "line 2: unknown key"),
        ("scenario = identities\nb 2", "line 2: expected"),
        ("scenario = identities\nb = 2\nb = 3", "line 3: duplicate"),
        ("b = 2", "missing required key"),
        ("scenario = identities\nR = -1", "R > 0"),
        ("scenario = identities\ngamma = 0.5", "gamma >= 1"),
        ("scenario = identities\nformats = csv, pdf", "bad value"),
        ("scenario = spectrum-scan\nre_min = 1\nre_max = 0", "re_min <= re_max"),
        ("scenario = full-evolution\ndt = 1", "dt <="),
    ],
)
def test_parse_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nscenario = appendix-null   # trailing\nb = 2.5, 4\n")
    assert cfg.b == [2.5, 4.0]


# ---------------------------------------------------------------------- scenarios


def test_identities_scenario(tmp_path):
    cfg = parse_config(f"scenario = identities\nb = 2\nn_half = 1000\noutput_dir = {tmp_path}")
    report = run_scenario(cfg)
    assert report.passed, report.summary()
    assert (tmp_path / "report.json").exists() and (tmp_path / "timings.json").exists()


def test_ivp_growth_scenario():
    report = run_scenario(parse_config("scenario = ivp-growth\nb = 2.5, 3.5\ninitial = plateau"))
    assert report.passed, report.summary()
    assert any("norm drift" in c.name for c in report.checks)


def test_appendix_scenario():
    report = run_scenario(parse_config("scenario = appendix-null\nb = 2.5, 4, 5\nn_half = 1000"))
    assert report.passed, report.summary()


def test_full_evolution_scenario():
    text = "scenario = full-evolution\nb = 3\ninitial = phi\nR = 20\nn_half = 400\nT = 1"
    report = run_scenario(parse_config(text))
    assert report.passed, report.summary()


def test_spectrum_scenario_is_deterministic(tmp_path):
    text = "scenario = spectrum-scan\nb = 3.5\nn_half = 60\nR = 20\nn_re = 3\nn_im = 1\nim_min = 0\nim_max = 0\nformats = csv, json, svg"
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        cfg = parse_config(text + f"\noutput_dir = {d}")
        run_scenario(cfg)
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timings.json"})
    assert outs[0] == outs[1]
    assert {"scan_b3p5.csv", "report.json", "report.svg"} <= set(outs[0])


def test_cli_run_and_exit_codes(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("scenario = appendix-null\nb = 4\nn_half = 500\n")
    out = tmp_path / "out"
    monkeypatch.setenv("PEAKONLAB_OUT", str(out))
    assert main(["--format", "json", "run", str(cfg)]) == 0
    assert json.loads((out / "report.json").read_text())["passed"] is True
    assert "all checks passed" in capsys.readouterr().out


def test_cli_failing_check_exits_one(tmp_path):
    cfg = tmp_path / "f.cfg"
    # too coarse for the identity tolerances
    cfg.write_text("scenario = identities\nb = 2\nn_half = 16\nR = 10\n")
    assert main(["run", str(cfg)]) == 1


def test_cli_malformed_rectangle_writes_nothing(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("scenario = spectrum-scan\nn_re = 1\n")
    out = tmp_path / "out"
    assert main(["--out", str(out), "run", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err
    assert not out.exists()


def test_cli_missing_file_and_bad_criteria(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert main(["check", "--criteria", "99"]) == 2


def test_cli_check_subset(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "check", "--criteria", "4,9"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(line.startswith(("PASS", "FAIL", "check:")) for line in lines)
    assert (tmp_path / "check.json").exists()
