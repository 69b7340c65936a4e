import os

import numpy as np
import pytest

from anelastic_lab import configio
from anelastic_lab.cli import main
from anelastic_lab.grids import DomainError, Grid
from anelastic_lab.harness import (
    ExactRadialReference,
    SweepPlan,
    audit_quarantine_time,
    sweep_epsilon,
)
from anelastic_lab.hydrostatics import PotentialSpec
from anelastic_lab.params import ScalingParams
from anelastic_lab.primitive import GaussianBump, IllPreparedData


def tiny_plan(**kw):
    defaults = dict(
        eps_list=(0.4, 0.2),
        data=IllPreparedData(
            rho1=GaussianBump(0.3, 1.0),
            vel_potential=GaussianBump(0.3, 1.2),
            theta2=GaussianBump(0.3, 1.0),
        ),
        potential=PotentialSpec(),
        params=ScalingParams(eps=0.2, horizon=0.5),
        grid=Grid("radial", 96, 8.0, 6.0),
        n_samples=11,
    )
    defaults.update(kw)
    return SweepPlan(**defaults)


class TestSweep:
    def test_static_data_all_norms_tiny(self):
        plan = tiny_plan(data=IllPreparedData())
        rep = sweep_epsilon(plan)
        assert np.all(rep.n1 < 1.0e-10)
        assert np.all(rep.n2a < 1.0e-10)
        assert np.all(rep.n3 < 1.0e-12)

    def test_acoustic_data_monotone(self):
        rep = sweep_epsilon(tiny_plan(eps_list=(0.4, 0.2, 0.1)))
        assert rep.n1_decreasing and rep.n3_decreasing
        assert rep.n1_slope > 0.0 and rep.n3_slope > 0.0
        text = rep.summary_text()
        assert "N1 decreasing=True" in text

    def test_plan_validation(self):
        with pytest.raises(DomainError):
            tiny_plan(eps_list=(0.2, 0.4))
        with pytest.raises(DomainError):
            tiny_plan(eps_list=(0.2,))

    def test_csv_output(self, tmp_path):
        rep = sweep_epsilon(tiny_plan())
        rep.write_csv(str(tmp_path))
        assert (tmp_path / "convergence.csv").exists()
        assert (tmp_path / "bounds.csv").exists()
        lines = (tmp_path / "convergence.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + one row per eps

    def test_exact_reference(self, radial_profile, radial_grid):
        theta = np.full(radial_grid.n, 0.9)
        ref = ExactRadialReference(theta, radial_profile, radial_grid)
        assert np.all(ref.velocity(1.7) == 0.0)
        assert np.array_equal(ref.temperature(0.3), theta)

    def test_quarantine_scales_with_eps(self, radial_profile, radial_grid):
        t1 = audit_quarantine_time(radial_profile, radial_grid, ScalingParams(eps=0.2))
        t2 = audit_quarantine_time(radial_profile, radial_grid, ScalingParams(eps=0.1))
        assert t1 == pytest.approx(2.0 * t2)


class TestConfig:
    def test_defaults_complete(self):
        cfg = configio.load_config()
        assert cfg["grid.geometry"] == "radial"
        configio.grid_from(cfg)
        configio.params_from(cfg)
        configio.potential_from(cfg)
        configio.data_from(cfg)

    def test_parse_sections_and_comments(self):
        text = "# comment\n[grid]\nn = 64  # inline\n\n[params]\neps = 0.3\n"
        cfg = configio.parse_config_text(text)
        assert cfg == {"grid.n": "64", "params.eps": "0.3"}

    def test_unknown_key_listed(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[grid]\nn = 64\nwavelets = on\n")
        with pytest.raises(configio.ConfigError) as err:
            configio.load_config(str(path))
        assert "grid.wavelets" in str(err.value)

    def test_override_wins(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text("[grid]\nn = 64\n")
        cfg = configio.load_config(str(path), ["grid.n=128"])
        assert cfg["grid.n"] == "128"

    def test_eps_list_validation(self):
        cfg = configio.load_config()
        with pytest.raises(configio.ConfigError):
            configio.eps_list_from(cfg, "0.1,0.2")
        assert configio.eps_list_from(cfg, "0.4,0.1") == (0.4, 0.1)

    def test_default_config_text_round_trips(self):
        text = configio.default_config_text()
        parsed = configio.parse_config_text(text)
        assert parsed == configio.DEFAULTS


SMALL = ["--set", "grid.n=96", "--set", "grid.r_max=8.0", "--set", "grid.r_sponge=6.0"]


class TestCli:
    def test_profile_writes_artifacts(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["profile", *SMALL, "--output", out]) == 0
        assert os.path.exists(os.path.join(out, "profile.csv"))
        assert os.path.exists(os.path.join(out, "flatness.txt"))

    def test_profile_deterministic(self, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        main(["profile", *SMALL, "--output", out1])
        main(["profile", *SMALL, "--output", out2])
        b1 = open(os.path.join(out1, "profile.csv"), "rb").read()
        b2 = open(os.path.join(out2, "profile.csv"), "rb").read()
        assert b1 == b2

    def test_strichartz_admissibility_exit_codes(self, tmp_path):
        out = str(tmp_path / "o")
        ok = main(["strichartz", "--p", "4", "--q", "12", *SMALL, "--output", out])
        bad = main(["strichartz", "--p", "4", "--q", "10", *SMALL, "--output", out])
        assert ok == 0
        assert bad == 2

    def test_unknown_config_key_exit_code(self, tmp_path):
        out = str(tmp_path / "o")
        code = main(["profile", "--set", "grid.bogus=1", "--output", out])
        assert code == 2

    def test_sweep_writes_rows(self, tmp_path):
        out = str(tmp_path / "o")
        code = main(
            [
                "sweep",
                "--eps",
                "0.4,0.2",
                *SMALL,
                "--set",
                "sweep.samples=11",
                "--set",
                "params.horizon=0.5",
                "--output",
                out,
            ]
        )
        assert code == 0
        lines = open(os.path.join(out, "convergence.csv")).read().strip().splitlines()
        assert len(lines) == 3

    def test_simulate_primitive_and_report(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        code = main(
            [
                "simulate-primitive",
                *SMALL,
                "--set",
                "params.horizon=0.3",
                "--set",
                "run.samples=7",
                "--output",
                out,
            ]
        )
        assert code == 0
        assert os.path.exists(os.path.join(out, "diagnostics.csv"))
        assert os.path.exists(os.path.join(out, "final_state.bin"))
        assert main(["report", "--output", out]) == 0
        assert "diagnostics.csv" in capsys.readouterr().out

    def test_simulate_acoustic(self, tmp_path):
        out = str(tmp_path / "o")
        code = main(
            ["simulate-acoustic", *SMALL, "--set", "run.samples=9",
             "--set", "params.horizon=0.5", "--output", out]
        )
        assert code == 0
        assert os.path.exists(os.path.join(out, "acoustic.csv"))

    def test_simulate_anelastic_radial(self, tmp_path):
        out = str(tmp_path / "o")
        code = main(
            ["simulate-anelastic", *SMALL, "--set", "run.samples=5",
             "--set", "params.horizon=0.3", "--output", out]
        )
        assert code == 0

    def test_cartesian_anelastic_needs_experimental(self, tmp_path):
        out = str(tmp_path / "o")
        args = ["simulate-anelastic", "--set", "grid.geometry=cartesian",
                "--set", "grid.n=8", "--set", "grid.r_max=8.0",
                "--set", "grid.r_sponge=6.0", "--set", "run.samples=3",
                "--set", "params.horizon=0.05", "--output", out]
        assert main(args) == 2
        assert main(args + ["--experimental"]) == 0

    def test_spectrum_and_decay(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["spectrum", *SMALL, "--output", out]) == 0
        assert os.path.exists(os.path.join(out, "spectrum.csv"))
        assert main(["decay", *SMALL, "--output", out]) == 0
        assert os.path.exists(os.path.join(out, "decay.csv"))

    def test_audit_rei_small(self, tmp_path):
        out = str(tmp_path / "o")
        code = main(
            ["audit-rei", *SMALL, "--set", "params.horizon=0.4", "--output", out]
        )
        assert code == 0
        assert os.path.exists(os.path.join(out, "rei.csv"))
        assert os.path.exists(os.path.join(out, "rei_summary.txt"))
