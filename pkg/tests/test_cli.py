import subprocess
import sys

import numpy as np
import pytest

from vkmorley.cli import (
    CSV_HEADER,
    ERROR_KEYS,
    RunConfig,
    emit_plot_script,
    format_table,
    main,
    report_from_csv,
    report_to_csv,
    run,
)
from vkmorley.mesh import level_mesh
from vkmorley.morley import build_dof_map


@pytest.fixture(scope="module")
def two_level(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "ex1.csv"
    report = run(RunConfig(example=1, levels=2, out=str(out)))
    return report, out


def test_csv_header_is_exact(two_level):
    _, out = two_level
    lines = out.read_text().splitlines()
    assert lines[0] == (
        "level,n,unknowns,h,e2_u,rate2_u,e1_u,rate1_u,e0_u,rate0_u,"
        "e2_v,rate2_v,e1_v,rate1_v,e0_v,rate0_v"
    )
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[:3] == ["1", "2", "25"]
    assert first[5] == "" and first[7] == ""  # no rate on the first level
    assert lines[2].split(",")[:3] == ["2", "4", "113"]


def test_csv_roundtrip(two_level):
    report, out = two_level
    back = report_from_csv(out.read_text(), example=1)
    for a, b in zip(report.rows, back.rows):
        assert (a.level, a.n, a.unknowns) == (b.level, b.n, b.unknowns)
        for k in ERROR_KEYS:
            assert b.errors[k] == pytest.approx(a.errors[k], rel=1e-8)
    assert report_to_csv(back) == out.read_text()
    with pytest.raises(ValueError):
        report_from_csv("a,b\n1,2\n")


def test_meta_sidecar(two_level):
    _, out = two_level
    meta = dict(line.split("=", 1) for line in out.with_suffix(".meta").read_text().splitlines())
    for key in ("tolerance", "quad_assembly", "quad_load", "quad_error", "git_describe",
                "effective_p_over_D", "newton_level1", "newton_level2"):
        assert key in meta
    assert meta["newton_level2"].startswith("converged:")
    assert not any(k.startswith("seconds_") for k in meta)  # deterministic by default


def test_unknown_counts_per_level():
    counts = [build_dof_map(level_mesh("unit-square", k)[0]).n_free for k in range(1, 6)]
    assert counts == [25, 113, 481, 1985, 8065]


def test_single_level_report_has_no_rates(tmp_path):
    out = tmp_path / "one.csv"
    rep = run(RunConfig(example=3, levels=1, out=str(out)))
    row = out.read_text().splitlines()[1].split(",")
    assert all(row[i] == "" for i in (5, 7, 9, 11, 13, 15))
    script = emit_plot_script(rep)
    assert "set label" not in script
    assert "plot " in script


def test_plot_script_is_deterministic(two_level):
    report, _ = two_level
    a, b = emit_plot_script(report), emit_plot_script(report)
    assert a == b
    assert "set logscale xy" in a
    assert a.count("set label") == len(ERROR_KEYS)
    assert "slope -1/2" in a and "slope -1'" in a
    assert "113 " in a


def test_table_layout(two_level):
    report, _ = two_level
    text = format_table(report)
    assert "# unknowns" in text and "(u)" in text and "(v)" in text
    assert text.count("\n        25 |") == 2


def test_config_errors():
    with pytest.raises(ValueError):
        RunConfig(example=4)
    with pytest.raises(ValueError):
        RunConfig(levels=0)
    assert main(["--levels", "0"]) == 2


def test_newton_failure_exit_code(tmp_path, capsys):
    out = tmp_path / "fail.csv"
    status = main(["--example", "1", "--levels", "2", "--max-iter", "1", "--out", str(out)])
    assert status == 1
    assert "Newton" in capsys.readouterr().err
    assert out.exists()  # partial results are flushed


def test_main_writes_csv_and_plot(tmp_path, capsys):
    out, plot = tmp_path / "r.csv", tmp_path / "r.gp"
    assert main(["--example", "3", "--levels", "2", "--out", str(out), "--plot", str(plot)]) == 0
    assert plot.read_text().startswith("# convergence history")
    assert "113" in capsys.readouterr().out
    rep = report_from_csv(out.read_text())
    assert np.all(np.diff(rep.column("e2_u")) < 0)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "vkmorley", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--example", "--levels", "--p-over-d", "--tol", "--max-iter", "--quad-assembly",
                 "--quad-load", "--quad-error", "--deterministic", "--out"):
        assert flag in res.stdout
