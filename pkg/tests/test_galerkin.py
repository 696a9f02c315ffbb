import numpy as np
import pytest

from chtumor.galerkin import (
    GalerkinState,
    GalerkinSystem,
    cross_validate,
    galerkin_rhs,
    integrate_galerkin,
    project_initial,
)
from chtumor.initial_data import initial_state
from chtumor.potentials import (
    ConstantProliferation,
    PolynomialPotential,
    QuarticDoubleWell,
)
from chtumor.solver import ModelParams, State
from chtumor.spectral import Field, build_grid

from test_solver import exchange_ode_oracle


def quadratic_potential():
    # psi(s) = 0.5 s^2 with trivial concave part
    return PolynomialPotential(psi0_coeffs=(0.0, 0.0, 0.5), lam_coeffs=(0.0,),
                               R1=0.25, rho=2.0, c1=0.5, c2=0.5, alpha=0.0)


class TestProjection:
    def test_constant_field_projects_to_first_mode(self):
        g = build_grid(1, [2.0], [32])
        st = State(0.0, Field(g, np.full(32, 0.7)), Field(g, np.zeros(32)))
        gs = project_initial(st, 4)
        # constant c has L2 norm c*sqrt(|Omega|) carried by the constant mode
        assert gs.a[0] == pytest.approx(0.7 * np.sqrt(2.0), rel=1e-13)
        assert np.max(np.abs(gs.a[1:])) < 1e-13

    def test_full_projection_is_lossless(self):
        g = build_grid(1, [1.0], [16])
        rng = np.random.default_rng(0)
        st = State(0.0, Field(g, rng.standard_normal(16)),
                   Field(g, rng.standard_normal(16)))
        sys_ = GalerkinSystem(g, 16, ModelParams.default())
        gs = sys_.project_initial(st)
        back = sys_.reconstruct(gs)
        assert np.max(np.abs(back.phi.values - st.phi.values)) < 1e-12

    def test_higher_eigenmode_projects_to_zero(self):
        g = build_grid(1, [1.0], [32])
        x = g.axes()[0]
        n = 5
        st = State(0.0, Field(g, np.cos((n + 1) * np.pi * x)), Field(g, np.zeros(32)))
        gs = project_initial(st, n)
        assert np.max(np.abs(gs.a)) < 1e-13

    def test_rejects_oversized_truncation(self):
        g = build_grid(1, [1.0], [8])
        st = State(0.0, Field(g, np.zeros(8)), Field(g, np.zeros(8)))
        with pytest.raises(ValueError):
            project_initial(st, 9)


class TestRHS:
    def test_single_mode_reduces_to_exchange_ode(self):
        g = build_grid(1, [1.0], [16])
        params = ModelParams.default(chi_phi=0.7, chi_sigma=1.2)
        c, d = 0.3, 0.4
        gs = GalerkinState(1, np.array([c]), np.array([d]), 0.0, g)
        da, db = galerkin_rhs(gs, params)  # |Omega| = 1: coefficients = values
        from chtumor.potentials import p_eval, psi_eval

        mu = psi_eval(params.psi, c)[1] - params.chi_phi * d
        n_pot = params.chi_sigma * d + params.chi_phi * (1.0 - c)
        x = p_eval(params.p, c)[0] * (n_pot - mu)
        assert da[0] == pytest.approx(x, rel=1e-12)
        assert db[0] == pytest.approx(-x, rel=1e-12)

    def test_quadratic_potential_modes_decouple(self):
        g = build_grid(1, [1.0], [32])
        params = ModelParams.default(chi_phi=0.0, psi=quadratic_potential(),
                                     p=ConstantProliferation(0.0, mode="P1"))
        rng = np.random.default_rng(1)
        n = 6
        a = rng.standard_normal(n)
        gs = GalerkinState(n, a, np.zeros(n), 0.0, g)
        da, _ = galerkin_rhs(gs, params)
        lam = np.sort(g.lam)[:n]
        assert np.allclose(da, -(lam - 1.0) * lam * a, rtol=1e-12, atol=1e-13)

    def test_sigma_diffusion_rates(self):
        g = build_grid(1, [1.0], [32])
        params = ModelParams.default(chi_phi=0.0, chi_sigma=0.8,
                                     p=ConstantProliferation(0.0, mode="P1"))
        n = 5
        b = np.arange(1.0, n + 1.0)
        gs = GalerkinState(n, np.zeros(n), b, 0.0, g)
        _, db = galerkin_rhs(gs, params)
        lam = np.sort(g.lam)[:n]
        assert np.allclose(db, -0.8 * (lam - 1.0) * b, rtol=1e-12, atol=1e-13)

    def test_rejects_variable_mobility(self):
        from chtumor.potentials import BoundedMobility

        g = build_grid(1, [1.0], [16])
        params = ModelParams.default(mobility_m=BoundedMobility(0.5, 1.0))
        with pytest.raises(ValueError):
            GalerkinSystem(g, 4, params)


class TestIntegration:
    def test_zero_horizon_is_identity(self):
        g = build_grid(1, [1.0], [16])
        params = ModelParams.default()
        gs = GalerkinState(3, np.array([0.1, 0.2, 0.0]), np.zeros(3), 0.0, g)
        traj = integrate_galerkin(gs, params, T=0.0)
        assert traj.times == [0.0]
        assert np.array_equal(traj.a_samples[0], gs.a)

    def test_single_mode_matches_scalar_oracle(self):
        g = build_grid(1, [1.0], [16])
        params = ModelParams.default(chi_phi=0.6, chi_sigma=1.1)
        c0, d0 = 0.25, 0.4
        gs = GalerkinState(1, np.array([c0]), np.array([d0]), 0.0, g)
        traj = integrate_galerkin(gs, params, T=1.0, rtol=1e-10)
        c_ref, d_ref = exchange_ode_oracle(c0, d0, params, 1.0)
        assert traj.a_samples[-1][0] == pytest.approx(c_ref, abs=1e-8)
        assert traj.b_samples[-1][0] == pytest.approx(d_ref, abs=1e-8)

    def test_linear_decay_closed_form(self):
        g = build_grid(1, [1.0], [32])
        params = ModelParams.default(chi_phi=0.0, psi=quadratic_potential(),
                                     p=ConstantProliferation(0.0, mode="P1"))
        n = 4
        a0 = np.array([0.5, 0.3, -0.2, 0.1])
        gs = GalerkinState(n, a0, np.zeros(n), 0.0, g)
        T = 0.02
        traj = integrate_galerkin(gs, params, T=T, rtol=1e-11)
        lam = np.sort(g.lam)[:n]
        expected = a0 * np.exp(-(lam - 1.0) * lam * T)
        assert np.max(np.abs(traj.a_samples[-1] - expected)) < 1e-9

    def test_energy_identity_along_trajectory(self):
        g = build_grid(1, [1.0], [32])
        params = ModelParams.default()
        st = initial_state(g, "cosine", phi_amplitude=0.2, sigma_mean=0.2,
                           sigma_amplitude=0.05)
        gs = project_initial(st, 8, params)
        traj = integrate_galerkin(gs, params, T=0.02, rtol=1e-10, record_every=50)
        assert traj.energy_identity_defect() < 1e-8

    def test_mass_of_constant_mode_is_conserved(self):
        g = build_grid(1, [1.0], [32])
        params = ModelParams.default()
        st = initial_state(g, "cosine", phi_amplitude=0.3, sigma_mean=0.2,
                           sigma_amplitude=0.1)
        gs = project_initial(st, 8, params)
        traj = integrate_galerkin(gs, params, T=0.02, rtol=1e-10, record_every=50)
        total0 = traj.a_samples[0][0] + traj.b_samples[0][0]
        for a, b in zip(traj.a_samples, traj.b_samples):
            assert a[0] + b[0] == pytest.approx(total0, abs=1e-11)


class TestTruncationConvergence:
    def test_distance_between_n_and_2n_decreases(self):
        g = build_grid(1, [1.0], [64])
        params = ModelParams.default()
        st = initial_state(g, "cosine", phi_amplitude=0.15, sigma_mean=0.15,
                           sigma_amplitude=0.05, cosine_modes=2)
        T = 0.01
        finals = {}
        for n in (4, 8, 16):
            gs = project_initial(st, n, params)
            traj = integrate_galerkin(gs, params, T=T, rtol=1e-10)
            finals[n] = (traj.a_samples[-1], traj.b_samples[-1])

        def dist(n):
            a_small, b_small = finals[n]
            a_big, b_big = finals[2 * n]
            da = a_big[: n] - a_small
            db = b_big[: n] - b_small
            tail = float((a_big[n:] ** 2).sum() + (b_big[n:] ** 2).sum())
            return np.sqrt(float((da ** 2).sum() + (db ** 2).sum()) + tail)

        assert dist(8) < dist(4)


class TestCrossValidation:
    def test_modal_ode_matches_masked_imex(self):
        # short horizon smoke test: transients are still alive at T=0.02, so
        # the first-order solver error is larger than on the full-length run
        g = build_grid(1, [1.0], [64])
        params = ModelParams.default()
        st = initial_state(g, "cosine", phi_amplitude=0.02, sigma_mean=0.1,
                           sigma_amplitude=0.01)
        report = cross_validate(g, 8, params, st, T=0.02, dt=1e-5,
                                n_checkpoints=4, threshold=1e-5)
        assert report.passed, f"gaps={report.gaps}"

    def test_rejects_nonconstant_proliferation(self):
        from chtumor.potentials import RationalBumpProliferation

        g = build_grid(1, [1.0], [32])
        params = ModelParams.default(p=RationalBumpProliferation())
        st = initial_state(g, "cosine")
        with pytest.raises(ValueError):
            cross_validate(g, 4, params, st, T=0.01, dt=1e-5)
