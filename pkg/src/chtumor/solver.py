"""Semi-implicit time integration of the coupled phase/nutrient system.

The model evolves an order parameter ``phi`` (tumorous vs healthy tissue) and
a nutrient concentration ``sigma`` on a rectangular box with zero-flux
boundaries::

    phi_t   = div(m(phi) grad mu) + p(phi) * (N - mu)
    mu      = -lap(phi) + psi'(phi) - chi_phi * sigma
    sigma_t = div(n(phi) * (chi_sigma grad sigma - chi_phi grad phi))
              - p(phi) * (N - mu)
    N       = chi_sigma * sigma + chi_phi * (1 - phi)

Time scheme: first-order IMEX with convex-splitting stabilization. The
biharmonic part and a stabilizing shift ``S * lap`` are treated implicitly
(diagonal solves in cosine-mode space); ``psi'``, the chemotactic coupling
and the exchange source are explicit. The exchange source additionally gets
a trapezoidal (Heun) corrector by default: the same source value enters both
equations with opposite signs, so the total mass ``int(phi + sigma)`` is
conserved to rounding regardless, while spatially uniform states are
integrated to second order (matching the scalar exchange ODE closely).

An energy guard optionally rejects any step that increases the free energy
beyond a rounding-level tolerance and retries with half the step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .potentials import is_unit, mobility_eval, p_eval, psi_eval, validate_assumptions
from .spectral import (
    Field,
    Grid,
    coeffs_to_values,
    divergence_values,
    gradient_values,
    norms_from_coeffs,
    truncation_mask,
    values_to_coeffs,
)


@dataclass(frozen=True)
class ModelParams:
    """All model constants: couplings, potential, proliferation, mobilities."""

    chi_phi: float
    chi_sigma: float
    psi: object
    p: object
    mobility_m: object
    mobility_n: object

    def __post_init__(self):
        if self.chi_phi < 0:
            raise ValueError(f"chi_phi must be nonnegative, got {self.chi_phi}")
        if self.chi_sigma <= 0:
            raise ValueError(f"chi_sigma must be positive, got {self.chi_sigma}")

    def validate(self, **kw):
        return validate_assumptions(self, **kw)

    @classmethod
    def default(cls, chi_phi=1.0, chi_sigma=1.0, psi=None, p=None,
                mobility_m=None, mobility_n=None):
        from .potentials import ConstantProliferation, QuarticDoubleWell, UnitMobility

        return cls(
            chi_phi=chi_phi,
            chi_sigma=chi_sigma,
            psi=psi if psi is not None else QuarticDoubleWell(),
            p=p if p is not None else ConstantProliferation(p0=0.5, mode="P2"),
            mobility_m=mobility_m if mobility_m is not None else UnitMobility(),
            mobility_n=mobility_n if mobility_n is not None else UnitMobility(),
        )


@dataclass
class State:
    """The pair (phi, sigma) at time t."""

    t: float
    phi: Field
    sigma: Field

    def __post_init__(self):
        if self.phi.grid != self.sigma.grid:
            raise ValueError("phi and sigma must share a grid")

    @property
    def grid(self) -> Grid:
        return self.phi.grid


@dataclass(frozen=True)
class EnergyReport:
    """Total energy, its four summands, and the three dissipation channels."""

    E: float
    gradient_term: float
    potential_term: float
    sigma_term: float
    cross_term: float
    D_mu: float
    D_N: float
    D_exchange: float
    mass: float
    dt_used: float = 0.0

    @property
    def dissipation(self) -> float:
        return self.D_mu + self.D_N + self.D_exchange


@dataclass(frozen=True)
class SchemeOpts:
    """Knobs of the IMEX step.

    ``stabilization=None`` picks S adaptively as the max of psi'' over the
    range of the current phi, widened by one. ``n_modes`` truncates the
    evolution to the first n lambda-sorted modes after every stage (used for
    cross-validation against the modal ODE system).
    """

    guard: bool = True
    guard_tol: float = 1e-10
    max_retries: int = 20
    exchange_heun: bool = True
    stabilization: float | None = None
    n_modes: int | None = None


class StepRejectedError(RuntimeError):
    """Energy guard exhausted its retries; carries the last report."""

    def __init__(self, message, report, dt_last):
        super().__init__(message)
        self.report = report
        self.dt_last = dt_last


def chemical_potential(phi: Field, sigma: Field, params: ModelParams) -> Field:
    """mu = -lap(phi) + psi'(phi) - chi_phi*sigma (Laplacian in mode space)."""
    if phi.grid != sigma.grid:
        raise ValueError("phi and sigma must share a grid")
    grid = phi.grid
    vals = _mu_values(grid, phi.coeffs, phi.values, sigma.values, params)
    return Field(grid, vals)


def _mu_values(grid, phi_hat, phi_vals, sigma_vals, params):
    lap_part = coeffs_to_values(grid, grid.ell * phi_hat)
    psi_d = psi_eval(params.psi, phi_vals)[1]
    return lap_part + psi_d - params.chi_phi * sigma_vals


def energy(state: State, params: ModelParams, dt_used: float = 0.0) -> EnergyReport:
    """Energy summands and dissipation integrals at the given state.

    The gradient term is a mode-space sum; the nonlinear integrals use
    midpoint quadrature. All three dissipation integrals are integrals of
    squares with nonnegative weights, so they are nonnegative by
    construction.
    """
    grid = state.grid
    cv = grid.cell_volume
    pv = state.phi.values
    sv = state.sigma.values
    ph = state.phi.coeffs

    gradient_term = 0.5 * float((grid.ell * ph * ph).sum())
    potential_term = cv * float(psi_eval(params.psi, pv)[0].sum())
    sigma_term = 0.5 * params.chi_sigma * cv * float((sv * sv).sum())
    cross_term = params.chi_phi * cv * float((sv * (1.0 - pv)).sum())

    mu_v = _mu_values(grid, ph, pv, sv, params)
    n_v = kernels.nutrient_potential(pv, sv, params.chi_sigma, params.chi_phi)

    if is_unit(params.mobility_m):
        mu_hat = values_to_coeffs(grid, mu_v)
        d_mu = float((grid.ell * mu_hat * mu_hat).sum())
    else:
        w = mobility_eval(params.mobility_m, pv)
        d_mu = kernels.weighted_sq_integral(w, gradient_values(grid, mu_v), cv)
    if is_unit(params.mobility_n):
        n_hat = values_to_coeffs(grid, n_v)
        d_n = float((grid.ell * n_hat * n_hat).sum())
    else:
        w = mobility_eval(params.mobility_n, pv)
        d_n = kernels.weighted_sq_integral(w, gradient_values(grid, n_v), cv)

    p_v = p_eval(params.p, pv)[0]
    diff = n_v - mu_v
    d_ex = cv * float((p_v * diff * diff).sum())

    mass = cv * float((pv + sv).sum())
    return EnergyReport(
        E=gradient_term + potential_term + sigma_term + cross_term,
        gradient_term=gradient_term,
        potential_term=potential_term,
        sigma_term=sigma_term,
        cross_term=cross_term,
        D_mu=d_mu,
        D_N=d_n,
        D_exchange=d_ex,
        mass=mass,
        dt_used=dt_used,
    )


def _stabilization(params, phi_vals):
    lo = float(phi_vals.min()) - 1.0
    hi = float(phi_vals.max()) + 1.0
    s = np.linspace(lo, hi, 129)
    return max(0.0, float(psi_eval(params.psi, s)[2].max()))


class _StepWork:
    """dt-independent explicit quantities of one step, shared across retries."""

    __slots__ = ("expl_hat", "x_hat", "stab", "fm_hat", "fn_hat")


def _prepare(state, params, opts):
    grid = state.grid
    ph, sh = state.phi.coeffs, state.sigma.coeffs
    pv, sv = state.phi.values, state.sigma.values
    w = _StepWork()

    psi_d = psi_eval(params.psi, pv)[1]
    expl = psi_d - params.chi_phi * sv
    w.expl_hat = values_to_coeffs(grid, expl)
    mu_v = coeffs_to_values(grid, grid.ell * ph) + expl
    p_v = p_eval(params.p, pv)[0]
    x_v = kernels.exchange_source(p_v, pv, sv, mu_v, params.chi_sigma, params.chi_phi)
    w.x_hat = values_to_coeffs(grid, x_v)
    w.stab = opts.stabilization if opts.stabilization is not None else _stabilization(params, pv)

    m1 = params.mobility_m.upper
    if is_unit(params.mobility_m):
        w.fm_hat = 0.0
    else:
        mw = mobility_eval(params.mobility_m, pv) - m1
        comps = [mw * g for g in gradient_values(grid, mu_v)]
        w.fm_hat = values_to_coeffs(grid, divergence_values(grid, comps))
    n1 = params.mobility_n.upper
    if is_unit(params.mobility_n):
        w.fn_hat = 0.0
    else:
        nw = mobility_eval(params.mobility_n, pv) - n1
        gs = gradient_values(grid, sv)
        gp = gradient_values(grid, pv)
        comps = [nw * (params.chi_sigma * a - params.chi_phi * b) for a, b in zip(gs, gp)]
        w.fn_hat = values_to_coeffs(grid, divergence_values(grid, comps))
    return w


def _advance(state, params, opts, work, dt, mask):
    grid = state.grid
    ell = grid.ell
    ph, sh = state.phi.coeffs, state.sigma.coeffs
    m1 = params.mobility_m.upper
    n1 = params.mobility_n.upper
    chi_phi, chi_sigma = params.chi_phi, params.chi_sigma

    den_phi = 1.0 + dt * m1 * (ell * ell + work.stab * ell)
    base_num = ph + dt * (m1 * (work.stab * ell * ph - ell * work.expl_hat) + work.fm_hat)
    den_sig = 1.0 + dt * n1 * chi_sigma * ell

    def solve(x_hat):
        ph1 = (base_num + dt * x_hat) / den_phi
        sh1 = (sh + dt * (n1 * chi_phi * ell * ph1 + work.fn_hat) - dt * x_hat) / den_sig
        if mask is not None:
            ph1 = ph1 * mask
            sh1 = sh1 * mask
        return ph1, sh1

    ph1, sh1 = solve(work.x_hat)
    if opts.exchange_heun:
        pv1 = coeffs_to_values(grid, ph1)
        sv1 = coeffs_to_values(grid, sh1)
        mu1 = _mu_values(grid, ph1, pv1, sv1, params)
        p1 = p_eval(params.p, pv1)[0]
        x1 = kernels.exchange_source(p1, pv1, sv1, mu1, chi_sigma, chi_phi)
        x_corr = 0.5 * (work.x_hat + values_to_coeffs(grid, x1))
        ph1, sh1 = solve(x_corr)

    phi1 = Field(grid, coeffs_to_values(grid, ph1), _coeffs=ph1)
    sigma1 = Field(grid, coeffs_to_values(grid, sh1), _coeffs=sh1)
    return State(state.t + dt, phi1, sigma1)


def step(state: State, params: ModelParams, dt: float, opts: SchemeOpts | None = None,
         prev_report: EnergyReport | None = None):
    """One accepted IMEX step; returns (new_state, report at the new state).

    With the guard on, a step whose energy rises beyond
    ``guard_tol * (1 + |E|)`` is retried with half the step, up to
    ``max_retries`` times; the accepted step size lands in
    ``report.dt_used``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    opts = opts or SchemeOpts()
    mask = truncation_mask(state.grid, opts.n_modes) if opts.n_modes else None
    work = _prepare(state, params, opts)
    if opts.guard and prev_report is None:
        prev_report = energy(state, params)

    dt_try = dt
    report = None
    for _ in range(opts.max_retries + 1):
        new_state = _advance(state, params, opts, work, dt_try, mask)
        report = energy(new_state, params, dt_used=dt_try)
        if not opts.guard:
            return new_state, report
        if report.E <= prev_report.E + opts.guard_tol * (1.0 + abs(prev_report.E)):
            return new_state, report
        dt_try *= 0.5
    raise StepRejectedError(
        f"energy guard rejected the step {opts.max_retries + 1} times "
        f"(last dt={dt_try * 2.0})", report, dt_try * 2.0)


@dataclass
class RunSummary:
    """Outcome of run(): final state plus global diagnostics."""

    final_state: State
    n_steps: int
    phi_min: float
    phi_max: float
    monotonicity_violations: int
    mass_drift: float
    initial_report: EnergyReport
    final_report: EnergyReport
    assumptions_ok: bool
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)


ENERGY_COLUMNS = (
    "t", "dt_used", "E", "gradient_term", "potential_term", "sigma_term",
    "cross_term", "D_mu", "D_N", "D_exchange", "mass", "phi_min", "phi_max",
    "h1_phi", "l2_sigma", "h1dual_phit", "h1dual_sigmat",
)


def _row(state, report, vel_phi, vel_sigma):
    from .spectral import norms

    nphi = norms(state.phi)
    nsig = norms(state.sigma)
    return (
        state.t, report.dt_used, report.E, report.gradient_term,
        report.potential_term, report.sigma_term, report.cross_term,
        report.D_mu, report.D_N, report.D_exchange, report.mass,
        float(state.phi.values.min()), float(state.phi.values.max()),
        nphi.h1, nsig.l2, vel_phi, vel_sigma,
    )


def run(initial_state: State, params: ModelParams, T: float, dt: float,
        opts: SchemeOpts | None = None, csv_every: int = 1,
        state_every: int = 0, row_sink=None, snapshot_cb=None,
        snapshot_every: int = 0) -> RunSummary:
    """Integrate to time T, emitting energy rows at the configured cadence.

    ``row_sink`` receives one tuple per emitted row (see ENERGY_COLUMNS);
    rows are also kept on the summary. ``state_every``/``snapshot_every``
    are cadences in accepted steps (0 disables in-memory states / snapshot
    callbacks beyond the final one). After a guarded rejection the next step
    restarts from twice the accepted size, capped by the configured dt.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    opts = opts or SchemeOpts()
    assumptions_ok = params.validate().passed

    state = initial_state
    report = energy(state, params)
    initial_report = report
    rows = [_row(state, report, 0.0, 0.0)]
    if row_sink is not None:
        row_sink(rows[-1])
    states = [(state.t, state)] if state_every else []
    phi_min = float(state.phi.values.min())
    phi_max = float(state.phi.values.max())
    mass0 = report.mass
    violations = 0
    n_steps = 0
    guard_tol = opts.guard_tol
    current_dt = dt
    eps_t = 1e-12 * max(T, dt)

    while state.t < T - eps_t:
        dt_step = min(current_dt, T - state.t)
        prev = report
        new_state, report = step(state, params, dt_step, opts, prev_report=prev)
        n_steps += 1
        if report.E > prev.E + guard_tol * (1.0 + abs(prev.E)):
            violations += 1
        dtu = report.dt_used
        current_dt = min(dt, 2.0 * dtu)
        dph = (new_state.phi.coeffs - state.phi.coeffs) / dtu
        dsh = (new_state.sigma.coeffs - state.sigma.coeffs) / dtu
        vel_phi = norms_from_coeffs(state.grid, dph).h1_dual
        vel_sigma = norms_from_coeffs(state.grid, dsh).h1_dual
        state = new_state
        phi_min = min(phi_min, float(state.phi.values.min()))
        phi_max = max(phi_max, float(state.phi.values.max()))
        if n_steps % csv_every == 0 or state.t >= T - eps_t:
            row = _row(state, report, vel_phi, vel_sigma)
            rows.append(row)
            if row_sink is not None:
                row_sink(row)
        if state_every and (n_steps % state_every == 0 or state.t >= T - eps_t):
            states.append((state.t, state))
        if snapshot_cb is not None and snapshot_every and n_steps % snapshot_every == 0:
            snapshot_cb(state)

    mass_drift = abs(report.mass - mass0)
    return RunSummary(
        final_state=state,
        n_steps=n_steps,
        phi_min=phi_min,
        phi_max=phi_max,
        monotonicity_violations=violations,
        mass_drift=mass_drift,
        initial_report=initial_report,
        final_report=report,
        assumptions_ok=assumptions_ok,
        states=states,
        rows=rows,
    )
