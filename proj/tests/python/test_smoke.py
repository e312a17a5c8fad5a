import json
import math

import pytest

import freeflow as ff


def test_semicircle_moments():
    mu = ff.semicircle_to_grid(ff.make_semicircle(0.5, 2.0), 512)
    assert abs(mu.mass() - 1.0) < 1e-9
    assert abs(ff.mean(mu) - 0.5) < 1e-3
    assert abs(ff.variance(mu) - 2.0) < 1e-2


def test_free_convolution_adds_variances():
    mu = ff.semicircle_to_grid(ff.make_semicircle(0.0, 1.0), 512)
    target = ff.semicircle_to_grid(ff.make_semicircle(0.0, 2.0), 4096, 0.0)
    assert ff.w2(ff.free_convolve_semicircle(mu, 1.0), target) <= 1e-2


def test_dirac_ou_marginal():
    s = ff.Schedule.constant(1.0, math.log(2.0))
    mu = ff.ou_pushforward(ff.ParticleMeasure.from_atoms([(1.0, 1.0)]), s, s.horizon)
    assert abs(ff.mean(mu) - 1 / math.sqrt(2)) < 1e-2
    assert abs(ff.variance(mu) - 0.5) < 1e-2


def test_functionals_on_standard_semicircle():
    mu = ff.semicircle_to_grid(ff.make_semicircle(0.0, 1.0), 1024)
    assert abs(ff.free_fisher(mu) - 1.0) < 1e-2
    assert abs(ff.free_entropy_chi(mu) - (0.5 + 0.5 * math.log(2 * math.pi))) < 1e-2
    assert abs(ff.conjugate_pairing(mu) - 1.0) < 1e-2


def test_reverse_recovers_semicircle():
    s = ff.Schedule.constant(1.0, 1.0)
    src = ff.ForwardSource(ff.make_semicircle(0.0, 4.0))
    traj = ff.sample_trajectory(src, s, ff.graded_times(s, 40, 4.0), ff.FlowMode.ou)
    res = ff.integrate_reverse(traj, n_particles=1024)
    assert res.w2_to_target < 0.05
    assert res.energy.slack > -1e-2


def test_gue_spectrum_is_semicircular():
    ev = ff.gue_esd(128, 1.0, 8, 1)
    assert len(ev) == 128 * 8
    sc = ff.semicircle_to_grid(ff.make_semicircle(0.0, 1.0), 2048, 0.0)
    assert ff.w2(ff.ParticleMeasure(ev), sc) < 0.05
    assert ev == ff.gue_esd(128, 1.0, 8, 1)


def test_jko_two_particles():
    cfg = ff.JkoConfig()
    cfg.tau = 0.1
    cfg.n_outer = 1
    run = ff.run_jko(ff.ParticleMeasure([-2.0, 2.0]), cfg)
    y = run.iterates[-1].positions
    root = (20 + math.sqrt(400 + 44)) / 22
    assert y[1] == pytest.approx(root, abs=1e-8)
    assert y[0] == pytest.approx(-root, abs=1e-8)
    assert all(run.edi_ok)


def test_inequality_conventions():
    mu = ff.semicircle_to_grid(ff.make_semicircle(0.0, 0.25), 512)
    reports = {(r.name, r.convention): r for r in ff.inequality_reports(mu, "SC(0,0.25)")}
    assert not reports[("hwi", "as_stated")].holds
    assert all(r.holds for (name, conv), r in reports.items() if conv == "relative")


def test_config_errors_surface_as_config_error(tmp_path):
    with pytest.raises(ff.ConfigError, match="unknown key 'bogus'"):
        ff.run_config("subcommand = forward\nbogus = 1\n", tmp_path / "out")
    with pytest.raises(ff.ConfigError, match="subcommand required"):
        ff.run_config("initial_law = dirac:1\n", tmp_path / "out")


def test_run_config_writes_manifest(tmp_path):
    out = tmp_path / "run"
    files = ff.run_config(
        "subcommand = forward\ninitial_law = dirac:1\nschedule.kind = constant\n"
        "schedule.beta = 1\nschedule.T = 0.6931\n",
        out,
    )
    assert "trajectory.csv" in files
    manifest = json.loads((out / "manifest.json").read_text())
    assert [o["file"] for o in manifest["outputs"]] == files
    last = (out / "trajectory.csv").read_text().strip().splitlines()[-1].split(",")
    assert abs(float(last[3]) - 0.7071) < 0.01
    assert abs(float(last[4]) - 0.5) < 0.01
