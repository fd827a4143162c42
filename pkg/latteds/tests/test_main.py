from pathlib import Path
from unittest.mock import Mock, patch

import pytest

from latteds.exceptions import IntegrationBlowUp
from latteds.main import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, build_parser, main
from latteds.models import BoundReport, CheckResult


def write_config(tmp_path, *lines):
    path = tmp_path / "run.conf"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_parser_maps_recurrence_flags():
    args = build_parser().parse_args(["recurrence", "--N", "2", "--lambda", "1", "--eps", "0.01"])
    assert (args.dim, args.lambda_rec, args.eps_rec) == (2, 1.0, 0.01)
    assert args.r_max == 32 and args.method == "bisection"


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["plot"])


def test_diagnose_radii_list():
    args = build_parser().parse_args(["diagnose", "--trajectory", "runs/a", "--radii", "2,4, 8"])
    assert args.radii == [2, 4, 8]
    assert args.trajectory == Path("runs/a")


def test_simulate_end_to_end(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(
        tmp_path, "window.radius = 8", "integrator.dt = 0.01", "integrator.t_end = 0.2",
        f"output.dir = {out}", "output.snapshot_every = 1",
    )
    assert main(["simulate", "--config", str(path)]) == EXIT_OK
    assert (out / "energy_flux.csv").exists()
    assert f"wrote {out}" in capsys.readouterr().out
    assert main(["diagnose", "--trajectory", str(out), "--radii", "1,2"]) == EXIT_OK
    assert (out / "diagnose" / "energy_flux.csv").exists()


def test_failed_bound_sets_exit_status(tmp_path):
    failed = BoundReport(kind="flux-N1", N=1, R=2, bound=1.0, observed=2.0, satisfied=False)
    result = Mock(directory=tmp_path, reports=[failed], failed=[failed])
    path = write_config(tmp_path, "window.radius = 8")
    with patch("latteds.main.simulate", return_value=result) as simulate:
        assert main(["simulate", "--config", str(path)]) == EXIT_CHECK_FAILED
    simulate.assert_called_once()


def test_configuration_error_is_reported(tmp_path, capsys):
    path = write_config(tmp_path, "window.radius = 8", "model.colour = red")
    assert main(["simulate", "--config", str(path)]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.startswith("latteds simulate: ConfigError:")
    assert "model.colour" in err


def test_blow_up_is_reported(tmp_path, capsys):
    path = write_config(tmp_path, "window.radius = 8")
    error = IntegrationBlowUp(time=1.5, site=(3,), magnitude=1e13)
    with patch("latteds.main.simulate", side_effect=error):
        assert main(["simulate", "--config", str(path)]) == EXIT_ERROR
    assert "IntegrationBlowUp" in capsys.readouterr().err


def test_recurrence_to_stdout(capsys):
    status = main(["recurrence", "--N", "1", "--lambda", "1", "--eps", "1", "--r-max", "3", "--method", "pullback"])
    assert status == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "r,g_s,bound_ricatti1_or_all,bound_ricatti2,satisfied"
    assert len(lines) == 4
    assert lines[1].startswith("1,1.0,")


def test_recurrence_to_file(tmp_path):
    target = tmp_path / "rec.csv"
    argv = ["recurrence", "--N", "2", "--lambda", "1", "--eps", "0.25", "--r-max", "4", "--output", str(target)]
    assert main(argv) == EXIT_OK
    assert len(target.read_text().splitlines()) == 5


def test_recurrence_rejects_nonpositive_parameters(capsys):
    assert main(["recurrence", "--N", "1", "--lambda", "-1", "--eps", "1"]) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("latteds recurrence:")


def test_coarsen_command(tmp_path, capsys):
    path = tmp_path / "coarsen.conf"
    path.write_text(
        "coarsening.radius = 8\ncoarsening.t_end = 1\ncoarsening.snapshot_every = 0.5\n"
        f"output.dir = {tmp_path / 'out'}\n",
        encoding="utf-8",
    )
    assert main(["coarsen", "--config", str(path)]) == EXIT_OK
    assert "flip fraction" in capsys.readouterr().out


def test_verify_summary(capsys):
    results = [
        CheckResult(suite="calculus", name="stokes", passed=True, detail="600 fields"),
        CheckResult(suite="balance", name="residual", passed=False, detail="2e-5"),
    ]
    with patch("latteds.main.verify", return_value=results) as verify:
        assert main(["verify", "--suite", "calculus"]) == EXIT_CHECK_FAILED
    verify.assert_called_once_with("calculus")
    out = capsys.readouterr().out.splitlines()
    assert out == ["PASS calculus/stokes 600 fields", "FAIL balance/residual 2e-5", "1 passed, 1 failed"]
