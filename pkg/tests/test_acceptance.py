"""The acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` (or let the suite print the
lines into captured output). Every tolerance is pinned here; nothing is
deferred to later calibration.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from chtumor.dynamics import ExperimentConfig, continuous_dependence_experiment, \
    lyapunov_audit, omega_limit_probe
from chtumor.galerkin import cross_validate
from chtumor.initial_data import initial_state
from chtumor.potentials import ConstantProliferation, QuarticDoubleWell, p_eval, psi_eval
from chtumor.semigroup import decay_constants, mode_block, small_time_slope, weighted_gain
from chtumor.solver import ModelParams, SchemeOpts, State, energy, run, step
from chtumor.spectral import (
    Field,
    apply_A,
    apply_A_inv,
    build_grid,
    from_modes,
    inner,
    norms,
    to_modes,
)
from chtumor.stationary import MinimizeOpts, constant_state_equation, constant_states, \
    minimize_energy

from test_stationary import bisection_roots


def report_line(number, name, ok, elapsed, budget=None):
    status = "PASS" if ok else "FAIL"
    budget_txt = f", budget {budget:.0f}s" if budget else ""
    print(f"\nACCEPTANCE {number:02d} {name}: {status} ({elapsed:.1f}s{budget_txt})")


class TestAcceptance:
    def test_01_energy_dissipation_default_run(self):
        t0 = time.time()
        grid = build_grid(2, [1.0, 1.0], [64, 64])
        params = ModelParams.default(chi_phi=1.0, chi_sigma=1.0)
        state = initial_state(grid, "random-uniform", seed=101,
                              phi_amplitude=0.05, sigma_mean=0.1)
        summary = run(state, params, T=5.0, dt=1e-3)
        energies = [(row[0], row[2]) for row in summary.rows]
        violations = lyapunov_audit([{"t": t, "E": e} for t, e in energies])
        elapsed = time.time() - t0
        ok = (summary.monotonicity_violations == 0 and not violations
              and elapsed <= 60.0)
        report_line(1, "energy dissipation (2D 64x64, T=5, guarded)", ok, elapsed, 60)
        assert summary.monotonicity_violations == 0
        assert violations == []
        assert elapsed <= 60.0

    def test_02_energy_identity_first_order(self):
        t0 = time.time()
        grid = build_grid(1, [1.0], [128])
        params = ModelParams.default()
        state = initial_state(grid, "cosine", phi_amplitude=0.2, sigma_mean=0.15,
                              sigma_amplitude=0.05, cosine_modes=2)
        rep = energy(state, params)
        # common relaxed checkpoint: stiff transients decay first
        for _ in range(round(0.05 / 2.5e-4)):
            state, rep = step(state, params, 2.5e-4, prev_report=rep)

        def max_residual(dt):
            st, r = state, rep
            worst = 0.0
            for _ in range(round(0.04 / dt)):
                st, new = step(st, params, dt, prev_report=r)
                resid = abs((new.E - r.E) / new.dt_used + new.dissipation)
                worst = max(worst, resid / (1.0 + abs(r.E)))
                r = new
            return worst

        r1, r2, r3 = (max_residual(dt) for dt in (1e-3, 5e-4, 2.5e-4))
        elapsed = time.time() - t0
        ok = 1.5 <= r1 / r2 <= 2.5 and 1.5 <= r2 / r3 <= 2.5 and elapsed <= 30.0
        report_line(2, f"energy-identity order (ratios {r1 / r2:.2f}, {r2 / r3:.2f})",
                    ok, elapsed, 30)
        assert 1.5 <= r1 / r2 <= 2.5
        assert 1.5 <= r2 / r3 <= 2.5
        assert elapsed <= 30.0

    def test_03_mass_conservation_long_run(self):
        t0 = time.time()
        grid = build_grid(1, [1.0], [64])
        params = ModelParams.default()
        state = initial_state(grid, "random-uniform", seed=103,
                              phi_amplitude=0.2, sigma_mean=0.2,
                              sigma_amplitude=0.05)
        summary = run(state, params, T=1.0, dt=1e-4, csv_every=500)
        elapsed = time.time() - t0
        ok = (summary.n_steps == 10_000
              and summary.mass_drift <= 1e-10 * grid.volume and elapsed <= 60.0)
        report_line(3, f"mass conservation over 1e4 steps (drift {summary.mass_drift:.2e})",
                    ok, elapsed, 60)
        assert summary.n_steps == 10_000
        assert summary.mass_drift <= 1e-10 * grid.volume
        assert elapsed <= 60.0

    def test_04_galerkin_cross_validation(self):
        t0 = time.time()
        grid = build_grid(1, [1.0], [64])
        params = ModelParams.default()
        state = initial_state(grid, "cosine", phi_amplitude=0.02, sigma_mean=0.1,
                              sigma_amplitude=0.01)
        report = cross_validate(grid, 16, params, state, T=0.1, dt=1e-5,
                                rtol=1e-9, n_checkpoints=2, threshold=1e-6)
        elapsed = time.time() - t0
        final_gap = report.gaps[-1]
        ok = final_gap <= 1e-6 and elapsed <= 30.0
        report_line(4, f"Galerkin cross-validation n=16 (final gap {final_gap:.2e})",
                    ok, elapsed, 30)
        assert final_gap <= 1e-6
        assert elapsed <= 30.0

    def test_05_constant_state_scalar_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(2024)
        grid = build_grid(1, [1.0], [4])
        worst = 0.0
        for _ in range(10):
            c0 = rng.uniform(-1.0, 1.0)
            d0 = rng.uniform(-1.0, 1.0)
            p0 = rng.uniform(0.1, 1.0)
            chi_phi = rng.uniform(0.0, 1.5)
            chi_sigma = rng.uniform(0.5, 2.0)
            params = ModelParams.default(
                chi_phi=chi_phi, chi_sigma=chi_sigma,
                psi=QuarticDoubleWell(R1=2.0 * chi_phi ** 2 / chi_sigma + 0.5),
                p=ConstantProliferation(p0=p0))

            def rhs(_t, y):
                c, d = y
                mu = psi_eval(params.psi, c)[1] - params.chi_phi * d
                n_pot = params.chi_sigma * d + params.chi_phi * (1.0 - c)
                x = p_eval(params.p, c)[0] * (n_pot - mu)
                return [x, -x]

            ref = solve_ivp(rhs, (0.0, 1.0), [c0, d0], method="DOP853",
                            rtol=1e-13, atol=1e-14).y[:, -1]
            st = State(0.0, Field(grid, np.full(4, c0)), Field(grid, np.full(4, d0)))
            opts = SchemeOpts(guard=False)
            for _ in range(10_000):
                st, _ = step(st, params, 1e-4, opts)
            err = max(abs(float(st.phi.values.flat[0]) - ref[0]),
                      abs(float(st.sigma.values.flat[0]) - ref[1]))
            worst = max(worst, err)
        elapsed = time.time() - t0
        ok = worst <= 1e-8
        report_line(5, f"constant-state exchange oracle (worst {worst:.2e})", ok, elapsed)
        assert worst <= 1e-8

    def test_06_stationary_problem(self):
        t0 = time.time()
        grid = build_grid(1, [1.0], [64])

        # constant-state finder vs the closed form and a bisection oracle
        params_c = ModelParams.default(chi_phi=0.0, chi_sigma=0.5)
        pts = constant_states(0.0, params_c, grid)
        found = sorted(float(p.phi_star.values.flat[0]) for p in pts)
        expected = [-math.sqrt(0.5), 0.0, math.sqrt(0.5)]
        roots_ok = (len(found) == 3
                    and all(abs(f - e) <= 1e-10 for f, e in zip(found, expected)))
        oracle = bisection_roots(
            lambda c: constant_state_equation(c, 0.0, params_c), -3.0, 3.0)
        roots_ok = roots_ok and len(oracle) == 3 and all(
            abs(f - o) <= 1e-10 for f, o in zip(found, oracle))

        # converged minimizers meet the residual admissibility bounds
        residuals_ok = True
        for chi_phi, chi_sigma, m_level, seed in ((0.0, 0.5, 0.0, 201),
                                                  (0.5, 1.0, 0.1, 202)):
            params = ModelParams.default(chi_phi=chi_phi, chi_sigma=chi_sigma)
            st = initial_state(grid, "random-uniform", seed=seed,
                               phi_amplitude=0.2, sigma_mean=0.1,
                               sigma_amplitude=0.1)
            pt = minimize_energy(st, m_level, params, MinimizeOpts(tol=1e-9))
            residuals_ok = residuals_ok and pt.converged and \
                pt.r1 <= 1e-8 and pt.r2 <= 1e-8 and pt.r3 <= 1e-10 * grid.volume
        elapsed = time.time() - t0
        ok = roots_ok and residuals_ok
        report_line(6, "stationary problem (roots + minimizer residuals)", ok, elapsed)
        assert roots_ok
        assert residuals_ok

    def test_07_linearized_semigroup(self):
        t0 = time.time()
        rng = np.random.default_rng(7)
        all_negative = True
        bound_ok = True
        for _ in range(100):
            chi_phi = rng.uniform(0.05, 2.0)
            chi_sigma = rng.uniform(0.1, 3.0)
            r1 = 2.0 * chi_phi ** 2 / chi_sigma + rng.uniform(0.05, 5.0)
            params = ModelParams.default(chi_phi=chi_phi, chi_sigma=chi_sigma,
                                         psi=QuarticDoubleWell(R1=r1))
            lams = np.concatenate([[1.0], np.exp(rng.uniform(0.0, math.log(1e4), 12))])
            blocks = [mode_block(float(lam), params) for lam in lams]
            omega1 = -max(b.spectral_abscissa for b in blocks)
            all_negative = all_negative and omega1 > 0
            z = rng.standard_normal((2, 100))
            for block in blocks:
                w = np.array([math.sqrt(block.lam), 1.0])
                wz = np.linalg.norm(w[:, None] * z, axis=0)
                for t in (0.01, 0.1, 1.0, 10.0):
                    v = block.eigenvectors
                    propagator = (v * np.exp(np.multiply(t, block.eigenvalues))) @ v.T
                    gain = np.linalg.norm(w[:, None] * (propagator @ z), axis=0) / wz
                    if gain.max() > 2.0 * math.exp(-omega1 * t) * (1 + 1e-12):
                        bound_ok = False

        # smoothing gain: finite, and ~ t^{-1/2} at small times
        params = ModelParams.default(psi=QuarticDoubleWell(R1=2.5))
        grid = build_grid(1, [1.0], [128])
        rep = decay_constants(params, 2.5, grid)
        slope = small_time_slope(params, 2.5, grid)
        smoothing_ok = (np.isfinite(rep.smoothing_constant)
                        and -1.0 <= slope <= -0.25 and not rep.violations)
        elapsed = time.time() - t0
        ok = all_negative and bound_ok and smoothing_ok and elapsed <= 10.0
        report_line(7, f"linearized decay + smoothing (slope {slope:.2f})", ok, elapsed, 10)
        assert all_negative
        assert bound_ok
        assert smoothing_ok
        assert elapsed <= 10.0

    def test_08_continuous_dependence(self):
        t0 = time.time()
        grid = build_grid(2, [1.0, 1.0], [64, 64])
        params = ModelParams.default(chi_phi=1.0, chi_sigma=1.0)
        state = initial_state(grid, "random-uniform", seed=101,
                              phi_amplitude=0.05, sigma_mean=0.1)
        config = ExperimentConfig(epsilon=1e-3, dt=1e-3,
                                  sample_times=(0.1, 0.5, 1.0))
        report = continuous_dependence_experiment(state, params, config)
        elapsed = time.time() - t0
        ok = report.ratios_within(1.8, 2.2) and elapsed <= 120.0
        report_line(8, f"continuous dependence (ratios {[f'{r:.3f}' for r in report.ratios]})",
                    ok, elapsed, 120)
        assert report.ratios_within(1.8, 2.2), report.ratios
        assert all(np.isfinite(report.growth))
        assert elapsed <= 120.0

    def test_09_omega_limit_gradient_structure(self):
        t0 = time.time()
        grid = build_grid(1, [1.0], [64])
        params = ModelParams.default(chi_phi=0.0, chi_sigma=1.0)
        state = initial_state(grid, "random-uniform", seed=109,
                              phi_amplitude=0.05, sigma_mean=0.1,
                              sigma_amplitude=0.05)
        config = ExperimentConfig(T=200.0, dt=0.01, velocity_tol=1e-6)
        report = omega_limit_probe(state, params, config)
        elapsed = time.time() - t0
        vel = report.vel_phi + report.vel_sigma
        res = max(report.stationary_residuals[:2])
        ok = vel < 1e-6 and res <= 1e-5 and elapsed <= 120.0
        report_line(9, f"omega-limit probe (vel {vel:.2e}, residual {res:.2e})",
                    ok, elapsed, 120)
        assert vel < 1e-6
        assert res <= 1e-5
        assert elapsed <= 120.0

    def test_10_spectral_core_identities(self):
        t0 = time.time()
        rng = np.random.default_rng(10)
        grids = [build_grid(1, [1.0], [64]), build_grid(2, [1.0, 1.5], [16, 16])]
        ok = True
        for i in range(1000):
            grid = grids[i % 2]
            u = Field(grid, rng.standard_normal(grid.shape))
            v = Field(grid, rng.standard_normal(grid.shape))
            # duality <Au, A^{-1}v> = <v, u>
            lhs = inner(apply_A(u), apply_A_inv(v))
            rhs = inner(v, u)
            nu, nv = norms(u), norms(v)
            ok = ok and abs(lhs - rhs) <= 1e-10 * max(nu.l2 * nv.l2, 1e-30)
            # transform roundtrip
            back = from_modes(to_modes(u))
            scale = max(1.0, float(np.abs(u.values).max()))
            ok = ok and float(np.abs(back.values - u.values).max()) <= 1e-10 * scale
            # Parseval
            direct = grid.cell_volume * float((u.values ** 2).sum())
            modal = float((u.coeffs ** 2).sum())
            ok = ok and abs(direct - modal) <= 1e-10 * max(direct, 1e-30)
            # norm ordering
            ok = ok and nu.h1_dual <= nu.l2 * (1 + 1e-10) <= nu.h1 * (1 + 1e-10) ** 2
            if not ok:
                break
        elapsed = time.time() - t0
        ok = ok and elapsed <= 5.0
        report_line(10, "spectral-core identities (1000 random fields)", ok, elapsed, 5)
        assert ok
        assert elapsed <= 5.0
