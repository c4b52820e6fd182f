import csv
import io
import subprocess
import sys

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from blprecond.cli import main
from blprecond.experiments import (CSV_HEADER, Case, ExperimentSpec, TableRow, banded_reference,
                                   banded_reference_2d, format_csv, run_table, run_verification)

from conftest import system_2d


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(Case.ONE_D, [0.0], [128])
    with pytest.raises(ValueError):
        ExperimentSpec(Case.PARABOLIC, [1e-4], [127])
    with pytest.raises(ValueError):
        ExperimentSpec(Case.EXPONENTIAL, [1e-4], [96])
    ExperimentSpec(Case.PARABOLIC, [1e-4], [96])
    with pytest.raises(ValueError):
        Case.ONE_D.layer_case


def test_csv_formatting_of_missing_values():
    row = TableRow(Case.PARABOLIC, 1e-5, 128, np.nan, 3, 0.1, 0.2, converged=False)
    fields = row.csv_fields()
    assert fields[:5] == ["parabolic", "1.000000e-05", "128", "", "3"]
    assert fields[-1] == ""
    text = format_csv([row])
    assert text.splitlines()[0] == ",".join(CSV_HEADER)


def test_run_table_sorted_and_written(tmp_path):
    out = tmp_path / "t.csv"
    rows = run_table(ExperimentSpec(Case.ONE_D, [1e-8, 1e-4], [256, 128], out=out))
    assert [(r.eps, r.N) for r in rows] == [(1e-4, 128), (1e-4, 256), (1e-8, 128), (1e-8, 256)]
    recs = parse(out.read_text())
    assert [int(r["iters"]) for r in recs] == [2, 4, 1, 1]
    assert float(recs[0]["error"]) == pytest.approx(4.800e-2, abs=5e-5)


def test_banded_reference_matches_sparse_lu(layer_case):
    mc, mesh, part, _, _ = system_2d(layer_case, 1e-5, 16)
    from blprecond.discretize import assemble_upwind_2d
    A, b = assemble_upwind_2d(mesh, mc.problem, 1e-5)
    x = banded_reference(A, b, 15)
    ref = spla.spsolve(sp.csc_matrix(A), b)
    assert np.abs(x - ref).max() <= 1e-9 * np.abs(ref).max()
    with pytest.raises(ValueError):
        banded_reference(A, b, 3)
    with pytest.raises(ValueError):
        banded_reference_2d(Case(layer_case.value), 1e-5, 512)


@pytest.mark.parametrize("case", ["1d", "parabolic", "exponential"])
def test_verification_passes_and_corruption_fails(case):
    spec = ExperimentSpec(Case(case), [1e-4, 1e-6], [16, 32] if case != "1d" else [128])
    good = run_verification(spec)
    assert good.passed and good.exit_code == 0
    assert all(line.startswith("PASS") for line in good.lines())
    bad = run_verification(spec, corrupt=True)
    assert not bad.passed and bad.exit_code == 2
    assert any(line.startswith("FAIL") for line in bad.lines())


def test_cli_table1d_stdout(capsys):
    assert main(["table1d", "--eps", "1e-8", "--n", "128", "256"]) == 0
    recs = parse(capsys.readouterr().out)
    assert [r["N"] for r in recs] == ["128", "256"]
    assert all(r["case"] == "1d" for r in recs)


def test_cli_table2d_to_file(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["table2d", "--case", "exponential", "--eps", "1e-6", "--n", "64", "--out", str(out)]) == 0
    (rec,) = parse(out.read_text())
    assert rec["case"] == "exponential" and int(rec["iters"]) >= 1
    assert float(rec["mg_cycles"]) > 0


def test_cli_solver_failure_exit_code(capsys):
    assert main(["table2d", "--case", "parabolic", "--eps", "1e-4", "--n", "64", "--max-iters", "1"]) == 1
    assert "solver failure" in capsys.readouterr().err


def test_cli_bad_input_exit_code(capsys):
    assert main(["table1d", "--eps", "2", "--n", "128"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_verify_exit_codes(capsys):
    assert main(["verify", "--case", "1d", "--eps", "1e-6", "--n", "256"]) == 0
    assert main(["verify", "--case", "1d", "--eps", "1e-6", "--n", "256", "--corrupt"]) == 2
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" in out


def test_cli_dump_matrix(tmp_path):
    mtx, st = tmp_path / "a.mtx", tmp_path / "s.csv"
    args = ["dump-matrix", "--case", "parabolic", "--eps", "1e-6", "--n", "32", "--out", str(mtx),
            "--stencils", str(st)]
    assert main(args) == 0
    A = scipy.io.mmread(str(mtx))
    assert A.shape == (31 * 31, 31 * 31)
    assert st.read_text().startswith("level,i,j,")
    with pytest.raises(SystemExit):
        main(["dump-matrix", "--eps", "1e-6", "--n", "32"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blprecond", "table1d", "--eps", "1e-6", "--n", "128"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("case,eps,N,error,iters")
