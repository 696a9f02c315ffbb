import json
import os

import numpy as np
import pytest

from chtumor.cli import main
from chtumor.config import (
    ConfigError,
    RunConfig,
    parse_config,
    serialize_config,
)
from chtumor.potentials import QuarticDoubleWell, UnitMobility

MINIMAL = """
[grid]
dims = 1
lengths = 1.0
resolution = 32

[time]
T = 0.01
dt = 1e-3
"""


class TestParsing:
    def test_minimal_config_gets_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.grid.dims == 1
        assert cfg.model.chi_phi == 1.0
        assert cfg.potential.family == "quartic"
        assert cfg.initial.seed == 0
        assert cfg.time.guard is True

    def test_empty_config_is_all_defaults(self):
        assert parse_config("") == RunConfig()

    def test_zero_chi_sigma_rejected(self):
        with pytest.raises(ConfigError, match=r"chi_sigma: must be positive"):
            parse_config(MINIMAL + "[model]\nchi_sigma = 0\n")

    def test_unknown_key_suggests_fix(self):
        with pytest.raises(ConfigError, match=r"chi_fi.*did you mean 'chi_phi'"):
            parse_config(MINIMAL + "[model]\nchi_fi = 1.0\n")

    def test_unknown_section_suggests_fix(self):
        with pytest.raises(ConfigError, match=r"\[grids\].*did you mean 'grid'"):
            parse_config("[grids]\ndims = 1\n")

    def test_field_precise_type_error(self):
        with pytest.raises(ConfigError, match=r"\[time\] dt: cannot parse"):
            parse_config(MINIMAL.replace("dt = 1e-3", "dt = fast"))

    def test_resolution_length_mismatch(self):
        bad = MINIMAL.replace("resolution = 32", "resolution = 32 32")
        with pytest.raises(ConfigError, match=r"resolution: expected 1 entries"):
            parse_config(bad)

    def test_generator_typo(self):
        with pytest.raises(ConfigError, match="random-unifrm"):
            parse_config(MINIMAL + "[initial]\ngenerator = random-unifrm\n")

    def test_syntax_error_reported(self):
        with pytest.raises(ConfigError, match="syntax error"):
            parse_config("not a section\n")


class TestRoundTrip:
    def test_default_round_trips(self):
        cfg = RunConfig()
        assert parse_config(serialize_config(cfg)) == cfg

    def test_custom_round_trips(self):
        text = MINIMAL + """
[potential]
family = polynomial
psi0_coeffs = 0.3 0.0 1.0 0.1 0.5
lambda_coeffs = 0.0 0.2 -1.0
R1 = 0.05
rho = 3.0

[proliferation]
family = rational-bump
p0 = 1.0
delta = 0.01

[mobility]
m = bounded
m0 = 0.5
m1 = 1.0

[initial]
generator = bump
seed = 77
"""
        cfg = parse_config(text)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_builders_produce_runtime_objects(self):
        cfg = parse_config(MINIMAL)
        grid = cfg.build_grid()
        params = cfg.build_params()
        assert grid.resolution == (32,)
        assert isinstance(params.psi, QuarticDoubleWell)
        assert isinstance(params.mobility_m, UnitMobility)
        state = cfg.build_initial(grid)
        assert state.phi.values.shape == (32,)


SIMULATE_CONFIG = """
[grid]
dims = 1
lengths = 1.0
resolution = 32

[initial]
generator = random-uniform
seed = 3
phi_amplitude = 0.1
sigma_mean = 0.1

[time]
T = 0.02
dt = 1e-3

[output]
directory = {out}
formats = csv snapshot
"""


class TestCLI:
    def test_simulate_writes_outputs(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "out"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out))
        assert main(["simulate", "--config", str(cfg_path)]) == 0
        assert (out / "energy.csv").exists()
        assert (out / "phi_final.snap").exists()
        assert (out / "summary.txt").exists()
        header = (out / "energy.csv").read_text().splitlines()
        assert header[0].startswith("# chtumor simulate seed=3")
        from chtumor.solver import ENERGY_COLUMNS

        assert header[1] == ",".join(ENERGY_COLUMNS)

    def test_simulate_deterministic_output(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out1))
        assert main(["simulate", "--config", str(cfg_path)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
        assert (out1 / "energy.csv").read_bytes() == (out2 / "energy.csv").read_bytes()

    def test_violated_assumptions_flagged_in_outputs(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "viol"
        # 2*chi_phi^2/chi_sigma = 8 > R1 = 2.5: gap assumption fails
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out) + "[model]\nchi_phi = 2.0\n")
        assert main(["simulate", "--config", str(cfg_path)]) == 0
        assert "assumptions=violated" in (out / "energy.csv").read_text().splitlines()[0]
        assert "assumptions = violated" in (out / "summary.txt").read_text()

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out1))
        main(["simulate", "--config", str(cfg_path)])
        main(["simulate", "--config", str(cfg_path), "--out", str(out2), "--seed", "5"])
        assert (out1 / "energy.csv").read_bytes() != (out2 / "energy.csv").read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.ini"
        cfg_path.write_text("[model]\nchi_sigma = 0\n")
        code = main(["simulate", "--config", str(cfg_path)])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["status"] == "error"
        assert "chi_sigma" in err["message"]

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == 2

    def test_semigroup_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "sg"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out))
        assert main(["semigroup", "--config", str(cfg_path)]) == 0
        text = (out / "semigroup_summary.txt").read_text()
        assert "omega1" in text and "smoothing_constant" in text
        assert (out / "decay_report.csv").exists()

    def test_stationary_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "st"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out) + """
[stationary]
M = 0.1
tol = 1e-8
""")
        assert main(["stationary", "--config", str(cfg_path)]) == 0
        lines = (out / "stationary.csv").read_text().splitlines()
        assert lines[1] == ("M,chi_phi,chi_sigma,mu0,E_value,r1,r2,r3,"
                            "iterations,converged,kind")
        assert any("minimizer" in ln for ln in lines)

    def test_galerkin_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "gal"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out).replace("T = 0.02", "T = 0.005") + """
[galerkin]
n_modes = 6
""")
        assert main(["galerkin", "--config", str(cfg_path)]) == 0
        assert (out / "galerkin_energy.csv").exists()
        coeff_header = (out / "galerkin_coefficients.csv").read_text().splitlines()[1]
        assert coeff_header == "t," + ",".join(
            [f"a_{j}" for j in range(1, 7)] + [f"b_{j}" for j in range(1, 7)])

    def test_crossval_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "cv"
        text = SIMULATE_CONFIG.format(out=out).replace("T = 0.02", "T = 0.01")
        text = text.replace("phi_amplitude = 0.1", "phi_amplitude = 0.02")
        cfg_path.write_text(text + """
[crossval]
n_modes = 6
dt = 1e-5
threshold = 1e-5
n_checkpoints = 2
""")
        assert main(["crossval", "--config", str(cfg_path)]) == 0
        assert (out / "crossval.csv").exists()

    def test_dependence_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "dep"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out) + """
[dependence]
epsilon = 1e-3
times = 0.01 0.02
dt = 1e-3
""")
        assert main(["dependence", "--config", str(cfg_path)]) == 0
        assert (out / "dependence.csv").exists()

    def test_omega_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "om"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out).replace(
            "sigma_mean = 0.1", "sigma_mean = 0.1\nphi_mean = 0.0") + """
[model]
chi_phi = 0.0
chi_sigma = 0.5

[omega]
T = 60
dt = 0.02
velocity_tol = 1e-6
""")
        assert main(["omega", "--config", str(cfg_path)]) == 0
        text = (out / "omega_summary.txt").read_text()
        assert "converged = yes" in text

    def test_sweep_command(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "sw"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out) + """
[sweep]
chi_phi = 0.0 1.0
chi_sigma = 1.0
seeds = 1 2
T = 0.01
workers = 2
""")
        assert main(["sweep", "--config", str(cfg_path)]) == 0
        lines = (out / "sweep_summary.csv").read_text().splitlines()
        assert len(lines) == 2 + 4  # header comment + columns + 4 runs
        assert all(ln.split(",")[5] == "0" for ln in lines[2:])

    def test_sweep_output_independent_of_worker_count(self, tmp_path):
        template = SIMULATE_CONFIG + """
[sweep]
chi_phi = 0.0 1.0
chi_sigma = 1.0
seeds = 1
T = 0.01
workers = {workers}
"""
        outputs = []
        for workers in (1, 3):
            cfg_path = tmp_path / f"run{workers}.ini"
            out = tmp_path / f"sw{workers}"
            cfg_path.write_text(template.format(out=out, workers=workers))
            assert main(["sweep", "--config", str(cfg_path)]) == 0
            outputs.append((out / "sweep_summary.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_render_command(self, tmp_path):
        from chtumor.fieldio import save_snapshot
        from chtumor.spectral import Field, build_grid

        g = build_grid(2, [1.0, 1.0], [16, 16])
        x = g.meshgrid()[0]
        snap = tmp_path / "phi.snap"
        save_snapshot(Field(g, np.cos(np.pi * x)), snap)
        assert main(["render", "--snapshot", str(snap), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "phi.png").exists()
        assert (tmp_path / "phi.png.minmax.txt").exists()

    def test_resolved_config_echo(self, tmp_path):
        cfg_path = tmp_path / "run.ini"
        out = tmp_path / "echo"
        cfg_path.write_text(SIMULATE_CONFIG.format(out=out))
        main(["simulate", "--config", str(cfg_path)])
        echo = (out / "resolved_config.ini").read_text()
        body = "\n".join(echo.splitlines()[1:]) + "\n"
        assert parse_config(body) == parse_config(SIMULATE_CONFIG.format(out=out))
