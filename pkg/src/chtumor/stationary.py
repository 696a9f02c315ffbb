"""The mass-constrained stationary problem.

States with ``int(phi + sigma) = |Omega| M`` form an affine subspace that the
flow preserves; on it the free energy is coercive whenever the chemotaxis
gap ``R1 - 2 chi_phi^2 / chi_sigma`` is positive. Stationary points solve

    -lap(phi) + psi'(phi) - chi_phi sigma = mu0
    chi_sigma sigma + chi_phi (1 - phi)   = mu0
    int(phi + sigma)                      = |Omega| M

with one scalar multiplier ``mu0`` (the shared constant value of the
chemical and nutrient potentials). ``minimize_energy`` runs a projected
gradient flow in the flat L2 x L2 metric with Armijo backtracking;
``constant_states`` solves the spatially uniform reduction by root
bracketing, giving exact reference points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .potentials import psi_eval
from .solver import ModelParams, State, energy
from .spectral import Field, Grid, coeffs_to_values, values_to_coeffs


@dataclass
class StationaryPoint:
    """Candidate solution of the constrained stationary system."""

    phi_star: Field
    sigma_star: Field
    mu0: float
    M: float
    E_value: float
    residuals: tuple
    converged: bool = True
    iterations: int = 0

    @property
    def r1(self):
        return self.residuals[0]

    @property
    def r2(self):
        return self.residuals[1]

    @property
    def r3(self):
        return self.residuals[2]


@dataclass(frozen=True)
class MinimizeOpts:
    """Projected gradient flow controls.

    The trial step is the Barzilai-Borwein quotient of the last move
    (falling back to ``eta0`` when the curvature estimate is unusable),
    always safeguarded by Armijo backtracking, so the energy sequence is
    monotone. Plain fixed-step descent is hopeless here: the Laplacian
    spread makes the Hessian condition number scale like the largest grid
    eigenvalue, and near equal-well bifurcations the constraint plane
    contains a quartically flat direction.
    """

    tol: float = 1e-9
    max_iter: int = 50_000
    armijo_c: float = 1e-4
    shrink: float = 0.5
    eta0: float | None = None
    eta_max: float = 1e12
    reproject_every: int = 64


def mass_level(state: State) -> float:
    """(1/|Omega|) int(phi + sigma)."""
    return float(state.phi.values.mean() + state.sigma.values.mean())


def project_Z_M(state: State, M: float) -> State:
    """Equal-shift projection onto the mass-M affine subspace.

    Subtracting the same constant from phi and sigma is the L2 x L2
    orthogonal projection onto the constraint plane, and it is idempotent.
    """
    shift = 0.5 * (mass_level(state) - M)
    if shift == 0.0:
        return state
    return State(state.t,
                 Field(state.grid, state.phi.values - shift),
                 Field(state.grid, state.sigma.values - shift))


def stationary_residual(point_or_state, params: ModelParams, M: float | None = None):
    """(r1, r2, r3): L2 defect of the phi-equation, sup defect of the
    sigma-equation, and the mass defect, with mu0 recomputed from its
    closed-form mean value."""
    if isinstance(point_or_state, StationaryPoint):
        phi = point_or_state.phi_star
        sigma = point_or_state.sigma_star
        M = point_or_state.M if M is None else M
    else:
        phi = point_or_state.phi
        sigma = point_or_state.sigma
        if M is None:
            raise ValueError("M is required when passing a raw state")
    grid = phi.grid
    params_chi = params.chi_phi
    mu0 = float(psi_eval(params.psi, phi.values)[1].mean()) - params_chi * float(sigma.values.mean())

    lap_phi = coeffs_to_values(grid, grid.ell * phi.coeffs)
    defect1 = lap_phi + psi_eval(params.psi, phi.values)[1] - params_chi * sigma.values - mu0
    r1 = math.sqrt(grid.cell_volume * float((defect1 ** 2).sum()))
    defect2 = params.chi_sigma * sigma.values + params_chi * (1.0 - phi.values) - mu0
    r2 = float(np.max(np.abs(defect2)))
    r3 = abs(grid.cell_volume * float((phi.values + sigma.values).sum()) - grid.volume * M)
    return r1, r2, r3


def _mu0_mean(phi_vals, sigma_vals, params):
    return float(psi_eval(params.psi, phi_vals)[1].mean()) - params.chi_phi * float(sigma_vals.mean())


def _total_energy(grid, phi_vals, phi_hat, sigma_vals, params):
    gradient = 0.5 * float((grid.ell * phi_hat * phi_hat).sum())
    cv = grid.cell_volume
    potential = cv * float(psi_eval(params.psi, phi_vals)[0].sum())
    sig = 0.5 * params.chi_sigma * cv * float((sigma_vals ** 2).sum())
    cross = params.chi_phi * cv * float((sigma_vals * (1.0 - phi_vals)).sum())
    return gradient + potential + sig + cross


def _finish(grid, phi_vals, sigma_vals, params, M, converged, iterations,
            sigma_polish=True):
    if sigma_polish and params.chi_sigma > 0:
        # exact coordinate minimization in sigma on the constraint plane:
        # sigma = (nu - chi_phi (1 - phi)) / chi_sigma with nu fixed by mass
        target_sigma_mass = M - float(phi_vals.mean())
        nu = params.chi_sigma * target_sigma_mass + params.chi_phi * (1.0 - float(phi_vals.mean()))
        sigma_vals = (nu - params.chi_phi * (1.0 - phi_vals)) / params.chi_sigma
    phi = Field(grid, phi_vals)
    sigma = Field(grid, sigma_vals)
    mu0 = _mu0_mean(phi_vals, sigma_vals, params)
    point = StationaryPoint(
        phi_star=phi, sigma_star=sigma, mu0=mu0, M=M,
        E_value=energy(State(0.0, phi, sigma), params).E,
        residuals=(0.0, 0.0, 0.0), converged=converged, iterations=iterations)
    point.residuals = stationary_residual(point, params)
    return point


def minimize_energy(initial: State, M: float, params: ModelParams,
                    opts: MinimizeOpts | None = None) -> StationaryPoint:
    """Projected gradient flow of the energy on the mass-M plane.

    The L2 gradient is (mu, N); its projection onto the constraint tangent
    subtracts the common mean, so stationarity of the flow is exactly the
    Euler-Lagrange system with mu = N = mu0. Armijo backtracking keeps the
    energy monotone; the returned point carries the final residuals and a
    converged flag (tangential gradient norm <= tol).
    """
    opts = opts or MinimizeOpts()
    grid = initial.grid
    cv = grid.cell_volume
    state = project_Z_M(initial, M)
    phi_vals = state.phi.values.copy()
    sigma_vals = state.sigma.values.copy()
    phi_hat = values_to_coeffs(grid, phi_vals)

    lam_max = float(grid.lam.max())
    eta0 = opts.eta0 if opts.eta0 is not None else 1.0 / lam_max
    e_cur = _total_energy(grid, phi_vals, phi_hat, sigma_vals, params)
    prev_g = None
    prev_step = None
    eta_last = eta0

    def tangential_gradient(pv, ph, sv):
        mu = coeffs_to_values(grid, grid.ell * ph) \
            + psi_eval(params.psi, pv)[1] - params.chi_phi * sv
        n_pot = params.chi_sigma * sv + params.chi_phi * (1.0 - pv)
        shift = 0.5 * (float(mu.mean()) + float(n_pot.mean()))
        return mu - shift, n_pot - shift

    for it in range(1, opts.max_iter + 1):
        g_phi, g_sigma = tangential_gradient(phi_vals, phi_hat, sigma_vals)
        gnorm_sq = cv * float((g_phi ** 2).sum() + (g_sigma ** 2).sum())
        gnorm = math.sqrt(gnorm_sq)
        if gnorm <= opts.tol:
            return _finish(grid, phi_vals, sigma_vals, params, M, True, it - 1)

        # Barzilai-Borwein trial step from the previous move; through
        # negative-curvature stretches (sy <= 0) grow the last accepted step
        # instead and let the line search cut it back
        if prev_g is None:
            eta = eta0
        else:
            dg_phi = g_phi - prev_g[0]
            dg_sigma = g_sigma - prev_g[1]
            sy = cv * float((prev_step[0] * dg_phi).sum() + (prev_step[1] * dg_sigma).sum())
            yy = cv * float((dg_phi ** 2).sum() + (dg_sigma ** 2).sum())
            if sy > 0.0 and yy > 0.0:
                eta = min(max(sy / yy, eta0 * 1e-2), opts.eta_max)
            else:
                eta = min(4.0 * eta_last, opts.eta_max)

        # sufficient decrease up to the rounding resolution of the energy
        # itself; without the slack the line search starves once the true
        # decrement drops below eps*|E| while the gradient is still far
        # above the target tolerance
        slack = 8.0 * np.finfo(float).eps * (1.0 + abs(e_cur))
        accepted = False
        for _ in range(80):
            trial_phi = phi_vals - eta * g_phi
            trial_sigma = sigma_vals - eta * g_sigma
            trial_hat = values_to_coeffs(grid, trial_phi)
            e_trial = _total_energy(grid, trial_phi, trial_hat, trial_sigma, params)
            if e_trial <= e_cur - opts.armijo_c * eta * gnorm_sq + slack:
                accepted = True
                break
            eta *= opts.shrink
        if not accepted:
            # gradient is at rounding level for this landscape; report as-is
            return _finish(grid, phi_vals, sigma_vals, params, M, False, it)
        prev_g = (g_phi, g_sigma)
        prev_step = (trial_phi - phi_vals, trial_sigma - sigma_vals)
        eta_last = eta
        phi_vals, sigma_vals, phi_hat, e_cur = trial_phi, trial_sigma, trial_hat, e_trial
        if it % opts.reproject_every == 0:
            shift2 = 0.5 * (float(phi_vals.mean()) + float(sigma_vals.mean()) - M)
            if shift2 != 0.0:
                phi_vals = phi_vals - shift2
                sigma_vals = sigma_vals - shift2
                phi_hat = values_to_coeffs(grid, phi_vals)

    return _finish(grid, phi_vals, sigma_vals, params, M, False, opts.max_iter)


def constant_state_equation(c: float, M: float, params: ModelParams) -> float:
    """Scalar residual of the uniform stationary system after elimination.

    With d = M - c and mu0 = chi_sigma d + chi_phi (1 - c), the remaining
    equation is psi'(c) - chi_phi d - mu0 = 0.
    """
    d = M - c
    mu0 = params.chi_sigma * d + params.chi_phi * (1.0 - c)
    return psi_eval(params.psi, float(c))[1] - params.chi_phi * d - mu0


def constant_states(M: float, params: ModelParams, grid: Grid,
                    bracket=(-3.0, 3.0), subdivisions: int = 600) -> list:
    """All spatially uniform stationary points found by root bracketing.

    Scans ``subdivisions`` intervals for sign changes of the eliminated
    scalar equation and polishes each with Brent's method; tangent (even
    multiplicity) roots without a sign change are not detected. Returns an
    empty list when no root lies in the bracket.
    """
    lo, hi = bracket
    cs = np.linspace(lo, hi, subdivisions + 1)
    vals = np.array([constant_state_equation(c, M, params) for c in cs])
    roots = []
    for i in range(subdivisions):
        f0, f1 = vals[i], vals[i + 1]
        if f0 == 0.0:
            roots.append(float(cs[i]))
        elif f0 * f1 < 0.0:
            roots.append(float(optimize.brentq(
                constant_state_equation, cs[i], cs[i + 1], args=(M, params),
                xtol=1e-14, rtol=8.9e-16)))
    if vals[-1] == 0.0:
        roots.append(float(cs[-1]))
    roots = sorted(set(roots))

    points = []
    for root in roots:
        d = M - root
        mu0 = params.chi_sigma * d + params.chi_phi * (1.0 - root)
        phi = Field(grid, np.full(grid.shape, root))
        sigma = Field(grid, np.full(grid.shape, d))
        point = StationaryPoint(
            phi_star=phi, sigma_star=sigma, mu0=mu0, M=M,
            E_value=energy(State(0.0, phi, sigma), params).E,
            residuals=(0.0, 0.0, 0.0), converged=True, iterations=0)
        point.residuals = stationary_residual(point, params)
        points.append(point)
    return points


def coercivity_witness(state: State, params: ModelParams, scales=(1.0, 2.0, 4.0, 8.0)):
    """E evaluated on scaled copies (t*phi, t*sigma); quadratic growth
    witness for a positive chemotaxis gap."""
    out = []
    for t in scales:
        st = State(state.t, Field(state.grid, t * state.phi.values),
                   Field(state.grid, t * state.sigma.values))
        out.append((t, energy(st, params).E))
    return out
