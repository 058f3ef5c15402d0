import csv
import json

import pytest

from starkscat import cli


def run(argv):
    return cli.main([str(a) for a in argv])


def load(path):
    data = json.loads(path.read_text())
    data.pop("timing")
    return data


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_parabolic_writes_csv_and_report(tmp_path):
    assert run(["parabolic", "check", "--points", 20, "--out", tmp_path]) == 0
    assert header(tmp_path / "parabolic.csv") == ["x", "y1", "y2", "residual_name", "value"]
    rep = load(tmp_path / "parabolic.json")
    assert rep["passed"] and rep["command"] == "parabolic"
    assert [c["status"] for c in rep["checks"]] == ["pass"] * 3


def test_orbit_output_and_explicit_point(tmp_path):
    out = tmp_path / "orb.csv"
    assert run(["orbit", "--point", "5,1,0,1,0.2,0.1", "--T", 10, "--samples", 11,
                "--out", out]) == 0
    assert header(out) == ["t", "x", "y1", "y2", "eta", "zeta1", "zeta2", "a", "energy"]
    rep = load(tmp_path / "orb.json")
    assert rep["metrics"]["initial_point"] == [5.0, 1.0, 0.0, 1.0, 0.2, 0.1]
    assert len(rep["metrics"]["zeta_plus"]) == 2


def test_orbit_point_length_is_a_config_error(tmp_path):
    assert run(["orbit", "--point", "1,2,3", "--out", tmp_path]) == 2


def test_reruns_are_byte_identical_apart_from_timing(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["--seed", 7, "invariance", "--seeds", 50, "--sign", "+", "--out", out]) == 0
    assert load(a / "invariance.json") == load(b / "invariance.json")
    assert run(["orbit", "--seed", 3, "--T", 5, "--out", a]) == 0
    assert run(["orbit", "--seed", 3, "--T", 5, "--out", b]) == 0
    assert (a / "orbits.csv").read_bytes() == (b / "orbits.csv").read_bytes()


def test_symbols_without_borel(tmp_path):
    assert run(["symbols", "--order", 1, "--grid", 5, "--no-borel", "--out", tmp_path]) == 0
    for k in (0, 1):
        assert header(tmp_path / f"symbols_b{k}.csv")[-3:] == ["Re_b", "Im_b", "residual"]
    assert not (tmp_path / "symbols_cutoffs.json").exists()


def test_symbols_borel_zero_potential(tmp_path):
    assert run(["symbols", "--order", 2, "--grid", 4, "--potential", "zero",
                "--out", tmp_path]) == 0
    C = json.loads((tmp_path / "symbols_cutoffs.json").read_text())["C"]
    assert C[0] == 2.0 and C[1] > 3 and C[2] > 1 + C[1]


def test_eigenfunction_grid(tmp_path):
    assert run(["eigenfunction", "--profile", "0.3:0.5", "--grid", "5,10,2:-1,1,3", "--d", 2,
                "--out", tmp_path]) == 0
    with open(tmp_path / "eigenfunction.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y1", "Re", "Im", "abs"] and len(rows) == 7


def test_eigenfunction_bad_profile(tmp_path):
    assert run(["eigenfunction", "--profile", "0.3", "--out", tmp_path]) == 2


def test_stationary_phase_check(tmp_path, capsys):
    assert run(["stationary-phase-check", "--x-list", "25,100,400", "--out", tmp_path]) == 0
    printed = json.loads(capsys.readouterr().out.splitlines()[0])
    assert abs(printed["slope"] - 1) <= 0.3


def test_born_kernel_and_refit(tmp_path, capsys):
    assert run(["born-kernel", "--out", tmp_path]) == 0
    assert header(tmp_path / "kernel.csv") == ["s", "ReT", "ImT", "absT"]
    capsys.readouterr()
    assert run(["singularity-fit", "--in", tmp_path / "kernel.csv", "--pin", -1.5,
                "--out", tmp_path]) == 0
    fit = json.loads(capsys.readouterr().out.splitlines()[0])
    assert fit["exponent"] == pytest.approx(-1.5, abs=0.05)
    assert fit["coeff_im"] == pytest.approx(-0.3989, rel=0.05)


def test_born_kernel_without_singular_part_is_skipped(tmp_path):
    assert run(["born-kernel", "--kappa", 0, "--out", tmp_path]) == 0
    rep = load(tmp_path / "kernel.json")
    assert rep["checks"][0]["status"] == "skip"
    assert rep["checks"][0]["message"] == "no singular part"


def test_singularity_fit_missing_input(tmp_path):
    assert run(["singularity-fit", "--in", tmp_path / "nope.csv", "--out", tmp_path]) == 2


def test_config_errors_exit_2(tmp_path, capsys):
    assert run(["invariance", "--eps", 1.5, "--out", tmp_path]) == 2
    assert "epsilon" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("epsilon: [\n")
    assert run(["--config", bad, "parabolic", "--out", tmp_path]) == 2
    assert run(["orbit", "--potential", "yukawa", "--out", tmp_path]) == 2
    assert run(["--seed", -4, "parabolic", "--out", tmp_path]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["no-such-command"])
    assert info.value.code == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    # the slow alpha = 0.8 tail makes the kernel depend on the symbol window
    code = run(["born-kernel", "--potential", "power-law:alpha=0.8,delta=0.3",
                "--out", tmp_path])
    assert code == 3
    assert "AccuracyError" in capsys.readouterr().err


def test_inadmissible_potential_is_a_config_error(tmp_path):
    assert run(["born-kernel", "--potential", "power-law:alpha=0.5,delta=0.1",
                "--out", tmp_path]) == 2


def test_config_file_and_flags_merge(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("d: 2\nseed: 11\n")
    assert run(["--config", cfg, "parabolic", "--points", 5, "--out", tmp_path]) == 0
    rep = load(tmp_path / "parabolic.json")
    assert rep["seed"] == 11
    assert header(tmp_path / "parabolic.csv")[:2] == ["x", "y1"]


def test_suite_subset(tmp_path, capsys):
    assert run(["suite", "--only", "7,9,10", "--out", tmp_path]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "criterion" in l]
    assert len(lines) == 3 and all(l.startswith("[PASS]") for l in lines)
    rep = load(tmp_path / "suite.json")
    assert rep["passed"] and len(rep["checks"]) == 3
