import copy
import csv
import json
import os

import pytest

from mqkansa import cli
from mqkansa.config import ConfigError, RunConfig, load_config, parse_config_text
from mqkansa.precision import BigScalar, PrecisionContext
from mqkansa.report import SchemaError, build_report, load_report, verify, write_report
from mqkansa.search import SweepRecord, TabulatedCriterion

CUSTOM = """\
mode: sweep
problem:
  sigma: 1
  a: 0
  b: 3
  dim: 1
  points_per_axis: 9
digits: 60
tests: 11
c_list: [0.5, 0.8, "1.1"]
out: {out}
"""


def strip_timing(report):
    """Report without the wall-clock column (the only nondeterministic cell)."""
    r = copy.deepcopy(report)
    k = r["columns"].index("solve_seconds")
    for row in r["rows"]:
        row[k] = None
    return r


def small_report(**rms):
    ctx = PrecisionContext(50)
    recs = [SweepRecord(ctx.scalar(c), ctx.scalar(rms.get(f"c{c}", "1e-100")), ctx.scalar("2e-110"),
                        ctx.scalar("3e500")) for c in (1, 2, 3)]
    return build_report(recs)


# ---------------------------------------------------------------------------
# reports and verify

def test_identical_report_passes(tmp_path, capsys):
    rep = small_report()
    write_report(rep, str(tmp_path / "a.json"))
    assert (tmp_path / "a.csv").exists()
    assert load_report(str(tmp_path / "a.json")) == rep
    assert all(c.ok for c in verify(rep, rep))
    assert cli.main(["verify", str(tmp_path / "a.json"), str(tmp_path / "a.json")]) == 0
    assert "9/9 cells within tolerance" in capsys.readouterr().out


def test_one_bad_cell_fails(tmp_path, capsys):
    ref = small_report()
    bad = small_report(c2="1e-95")
    write_report(ref, str(tmp_path / "ref.json"))
    write_report(bad, str(tmp_path / "bad.json"))
    cells = verify(bad, ref)
    failed = [c for c in cells if not c.ok]
    assert len(failed) == 1 and failed[0].column == "RMS" and failed[0].delta == pytest.approx(5)
    assert cli.main(["verify", str(tmp_path / "bad.json"), str(tmp_path / "ref.json")]) == 3
    out = capsys.readouterr().out
    assert "FAIL c=2e+0 RMS" in out and "8/9" in out
    # a looser tolerance accepts it
    assert cli.main(["verify", str(tmp_path / "bad.json"), str(tmp_path / "ref.json"),
                     "--tol-rms", "5"]) == 0


def test_missing_row_fails():
    ref = small_report()
    rep = small_report()
    rep["rows"] = rep["rows"][:2]
    cells = verify(rep, ref)
    assert sum(not c.ok for c in cells) == 3


def test_unknown_schema_is_rejected(tmp_path):
    rep = small_report()
    rep["schema"] = "mqkansa.report/99"
    with pytest.raises(SchemaError):
        verify(rep, small_report())
    write_report(rep, str(tmp_path / "v99.json"))
    assert cli.main(["verify", str(tmp_path / "v99.json"), "table1"]) == 1
    broken = small_report()
    broken["rows"][0] = broken["rows"][0][:3]
    with pytest.raises(SchemaError):
        verify(broken, small_report())


def test_numbers_are_decimal_text():
    rep = small_report()
    assert all(isinstance(v, str) for row in rep["rows"] for v in row[:4] + row[5:6])
    # full round-trip precision, not a rounded display value
    ctx = PrecisionContext(50)
    assert BigScalar.from_decimal(rep["rows"][0][1], ctx) == ctx.scalar("1e-100")


# ---------------------------------------------------------------------------
# configuration

def test_config_errors_name_field_and_line(tmp_path):
    text = "mode: solve\nproblem: paper-1d\ndigits: 20\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.field == "digits" and exc.value.line == 3
    assert "line 3" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse_config_text("mode: sweep\nproblem: paper-2d\nc_list: [1, -2]\n")
    assert exc.value.field == "c_list" and exc.value.line == 3
    with pytest.raises(ConfigError) as exc:
        parse_config_text("mode: solve\ncolour: red\n")
    assert exc.value.field == "colour" and exc.value.line == 2
    with pytest.raises(ConfigError) as exc:
        parse_config_text("mode: [unclosed\n")
    assert exc.value.line is not None
    with pytest.raises(ConfigError):
        parse_config_text("mode: search\nproblem: paper-1d\nsteps: [1]\nc_list: [1, 2]\n")
    with pytest.raises(ConfigError):
        RunConfig(mode="solve", beta=2).validate()


def test_config_keeps_exact_decimals():
    cfg = parse_config_text("mode: solve\nproblem: paper-2d\nc: 800*sqrt(2)*1e14\n")
    assert cfg.c == "800*sqrt(2)*1e14" and cfg.digits == 1200
    cfg = parse_config_text('{"mode": "sweep", "problem": "paper-1d", "c_list": [0.1, 120]}')
    assert cfg.c_list == ["0.1", "120"]


def test_cli_validation_exit_code(tmp_path, capsys):
    assert cli.main(["solve", "--problem", "paper-1d", "--digits", "10", "--out", str(tmp_path)]) == 1
    assert "digits" in capsys.readouterr().err
    assert cli.main(["search", "--problem", "paper-1d", "--max-evals", "2", "--out", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# runs

def test_sweep_run_outputs_and_manifest_rerun(tmp_path):
    cfg_path = tmp_path / "sweep.yaml"
    cfg_path.write_text(CUSTOM.format(out=tmp_path / "run1"))
    assert cli.main(["-q", "sweep", "--config", str(cfg_path)]) == 0
    run1 = tmp_path / "run1"
    for name in ("report.json", "report.csv", "manifest.json", "trace.jsonl", "plot.csv"):
        assert (run1 / name).exists()
    rep = load_report(str(run1 / "report.json"))
    assert len(rep["rows"]) == 3
    with open(run1 / "plot.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["log10_c", "log10_RMS", "log10_RMSbdy"] and len(rows) == 4
    manifest = json.loads((run1 / "manifest.json").read_text())
    assert manifest["precision"]["digits"] == 60 and manifest["problem"]["n_data"] == 9
    # the manifest is itself a config
    assert load_config(str(run1 / "manifest.json")).c_list == ["0.5", "0.8", "1.1"]
    assert cli.main(["-q", "sweep", "--config", str(run1 / "manifest.json"),
                     "--out", str(tmp_path / "run2")]) == 0
    rep2 = load_report(str(tmp_path / "run2" / "report.json"))
    assert strip_timing(rep2) == strip_timing(rep)


def test_solve_run_writes_solution(tmp_path):
    cfg = tmp_path / "solve.yaml"
    cfg.write_text(CUSTOM.format(out=tmp_path / "s").replace("mode: sweep", "mode: solve")
                   .replace('c_list: [0.5, 0.8, "1.1"]', "c: 0.8"))
    assert cli.main(["-q", "solve", "--config", str(cfg)]) == 0
    rep = load_report(str(tmp_path / "s" / "report.json"))
    assert len(rep["rows"]) == 1 and rep["rows"][0][-1] is None
    assert (tmp_path / "s" / "solution.json").exists()
    # a config for another mode is a validation error
    assert cli.main(["-q", "sweep", "--config", str(cfg)]) == 1


def test_singular_system_is_a_numerical_failure(tmp_path):
    # at 50 digits a huge c makes every kernel value round to 1/c: identical rows
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(CUSTOM.format(out=tmp_path / "bad").replace("mode: sweep", "mode: solve")
                   .replace('c_list: [0.5, 0.8, "1.1"]', "c: 1e100").replace("digits: 60", "digits: 50"))
    assert cli.main(["-q", "solve", "--config", str(cfg)]) == 2
    rep = load_report(str(tmp_path / "bad" / "report.json"))
    assert "SingularMatrixError" in rep["rows"][0][-1]


def test_partial_sweep_failure_is_recorded(tmp_path):
    cfg = RunConfig(mode="sweep", problem="paper-1d", digits=50, c_list=["1", "2", "5"],
                    out=str(tmp_path)).validate()
    rep = cli.run(cfg, criterion=TabulatedCriterion({1: 3, 2: 1}, PrecisionContext(50)))
    assert [r[-1] is None for r in rep["rows"]] == [True, True, False]
    assert rep["summary"]["failures"] == 1
    with pytest.raises(cli.NumericalFailure):
        cli.run(cfg, criterion=TabulatedCriterion({}, PrecisionContext(50)))


def test_mocked_search_trace(tmp_path):
    cfg = RunConfig(mode="search", problem="paper-1d", digits=50, c0="2", steps=["1"],
                    out=str(tmp_path)).validate()
    crit = TabulatedCriterion({1: 5, 2: 3, 3: 1, 4: 2}, PrecisionContext(50))
    rep = cli.run(cfg, criterion=crit)
    with open(tmp_path / "trace.jsonl") as fh:
        trace = [json.loads(line) for line in fh]
    assert len(trace) == 4 and [t["seq"] for t in trace] == [1, 2, 3, 4]
    assert [float(t["c"]) for t in trace] == [2, 1, 3, 4]
    assert float(rep["summary"]["best_c"]) == 3 and rep["summary"]["status"] == "converged"
    # the report table is sorted by c
    assert [float(r[0]) for r in rep["rows"]] == [1, 2, 3, 4]


def test_shipped_references_load():
    for name in ("table1", "paper-1d-published"):
        rep = load_report(cli.shipped_reference(name))
        assert rep["rows"]
    assert len(load_report(cli.shipped_reference("table1"))["rows"]) == 14
    if os.path.exists(cli.shipped_reference("paper-1d")):
        assert len(load_report(cli.shipped_reference("paper-1d"))["rows"]) == 1
