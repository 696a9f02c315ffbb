"""Finite-dimensional modal truncation of the flow, as an explicit ODE.

Expanding ``phi, sigma, mu`` in the first ``n`` eigenmodes of ``A`` and
testing against each mode yields a closed ODE system for the coefficient
vectors ``a`` (phi) and ``b`` (sigma): with an L2-orthonormal basis and unit
mobilities,

    c_j  = (lam_j - 1) a_j + <psi'(phi_n), w_j> - chi_phi b_j
    a_j' = -(lam_j - 1) c_j + <p(phi_n) (N_n - mu_n), w_j>
    b_j' = -(lam_j - 1) (chi_sigma b_j - chi_phi a_j) - <p(phi_n) (N_n - mu_n), w_j>

Nonlinear inner products use dense midpoint quadrature on a padded grid
sized so polynomial nonlinearities are integrated exactly (full dealiasing);
the time integrator is an adaptive embedded Runge-Kutta 5(4) pair, chosen to
be maximally unlike the semi-implicit production solver so the two can
cross-validate each other. The running dissipation integral is carried as an
extra quadrature state so the modal energy identity can be checked to
integrator accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .potentials import is_unit, p_eval, psi_eval
from .solver import EnergyReport, ModelParams, State
from .spectral import Field, Grid, build_grid, sorted_mode_indices


class GalerkinStiffnessError(RuntimeError):
    """Adaptive step collapsed; carries the offending mode index."""

    def __init__(self, message, mode_index, component):
        super().__init__(message)
        self.mode_index = mode_index
        self.component = component


@dataclass
class GalerkinState:
    """Truncated modal state: coefficient vectors a (phi) and b (sigma)."""

    n: int
    a: np.ndarray
    b: np.ndarray
    t: float
    grid: Grid

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.shape != (self.n,) or self.b.shape != (self.n,):
            raise ValueError("coefficient vectors must have length n")


def _poly_degree(spec, attr):
    coeffs = getattr(spec, attr, None)
    if coeffs is None:
        return None
    deg = len(coeffs) - 1
    while deg > 0 and coeffs[deg] == 0.0:
        deg -= 1
    return deg


class GalerkinSystem:
    """Basis, quadrature and right-hand side of the n-mode truncation."""

    def __init__(self, grid: Grid, n: int, params: ModelParams,
                 quad_resolution=None):
        if n < 1 or n > grid.npoints:
            raise ValueError(f"n must be in [1, {grid.npoints}], got {n}")
        if not (is_unit(params.mobility_m) and is_unit(params.mobility_n)):
            raise ValueError("the modal truncation is built for unit mobilities")
        self.grid = grid
        self.n = n
        self.params = params

        order = sorted_mode_indices(grid)[:n]
        self.mode_multi_indices = np.array(np.unravel_index(order, grid.shape)).T
        self.flat_indices = order
        self.lam = grid.lam.ravel()[order].copy()
        self.ell = self.lam - 1.0

        if quad_resolution is None:
            quad_resolution = self._dealias_resolution()
        self.quad_grid = build_grid(grid.dims, grid.lengths, quad_resolution)
        self.basis = np.ascontiguousarray(self._synthesis_matrix(self.quad_grid))
        self.weights = np.ascontiguousarray(self.quad_grid.cell_volume * self.basis.T)
        self._dpsi_coeffs = self._polynomial_dpsi()

    def _polynomial_dpsi(self):
        """psi' as polynomial coefficients (lowest first), or None."""
        from .potentials import ConstantProliferation, QuarticDoubleWell

        if not isinstance(self.params.p, ConstantProliferation):
            return None
        psi = self.params.psi
        if isinstance(psi, QuarticDoubleWell):
            total = np.array([0.25, 0.0, -0.5, 0.0, 0.25])  # 0.25 (s^2-1)^2
        elif hasattr(psi, "psi0_coeffs") and hasattr(psi, "lam_coeffs"):
            n = max(len(psi.psi0_coeffs), len(psi.lam_coeffs))
            total = np.zeros(n)
            total[: len(psi.psi0_coeffs)] += psi.psi0_coeffs
            total[: len(psi.lam_coeffs)] += psi.lam_coeffs
        else:
            return None
        if len(total) < 2:
            return np.zeros(1)
        return np.arange(1, len(total)) * total[1:]

    def _dealias_resolution(self):
        """Quadrature points per axis making polynomial projections exact."""
        deg_psi = _poly_degree(self.params.psi, "psi0_coeffs")
        if deg_psi is None:
            deg_psi = int(round(getattr(self.params.psi, "rho", 4.0)))
        deg_p = _poly_degree(self.params.p, "coeffs")
        if deg_p is None:
            deg_p = 0
        # products tested against a basis mode add one more factor of k_max
        deg = max(deg_psi - 1, deg_p + 1, 2) + 1
        res = []
        for axis in range(self.grid.dims):
            k_max = int(self.mode_multi_indices[:, axis].max())
            res.append(max(4, 2 * (k_max + 1), deg * k_max + 1))
        return tuple(res)

    def _synthesis_matrix(self, quad_grid):
        cols = []
        axes = quad_grid.axes()
        for multi in self.mode_multi_indices:
            w = np.ones(quad_grid.shape)
            for a, k in enumerate(multi):
                L = quad_grid.lengths[a]
                x = axes[a]
                one_d = (np.full_like(x, 1.0 / math.sqrt(L)) if k == 0
                         else math.sqrt(2.0 / L) * np.cos(k * np.pi * x / L))
                shape = [1] * quad_grid.dims
                shape[a] = len(x)
                w = w * one_d.reshape(shape)
            cols.append(w.ravel())
        return np.array(cols).T

    # -- projections -----------------------------------------------------

    def project_field(self, field: Field) -> np.ndarray:
        if field.grid != self.grid:
            raise ValueError("field lives on a different grid")
        return field.coeffs.ravel()[self.flat_indices].copy()

    def project_initial(self, state: State) -> GalerkinState:
        return GalerkinState(self.n, self.project_field(state.phi),
                             self.project_field(state.sigma), state.t, self.grid)

    def reconstruct(self, gstate: GalerkinState, grid: Grid | None = None) -> State:
        """Fields on the original (or a given) grid from modal coefficients."""
        grid = grid or self.grid
        if any(self.mode_multi_indices[:, a].max() >= grid.resolution[a]
               for a in range(grid.dims)):
            raise ValueError("target grid cannot represent all truncation modes")
        idx = np.ravel_multi_index(tuple(self.mode_multi_indices.T), grid.shape)
        pc = np.zeros(grid.npoints)
        sc = np.zeros(grid.npoints)
        pc[idx] = gstate.a
        sc[idx] = gstate.b
        from .spectral import coeffs_to_values

        return State(gstate.t,
                     Field(grid, coeffs_to_values(grid, pc.reshape(grid.shape))),
                     Field(grid, coeffs_to_values(grid, sc.reshape(grid.shape))))

    # -- right-hand side ---------------------------------------------------

    def _mu_coeffs(self, a, b, phi_vals):
        psi_d = psi_eval(self.params.psi, phi_vals)[1]
        return self.ell * a + self.weights @ psi_d - self.params.chi_phi * b

    def rhs(self, a, b):
        """(da/dt, db/dt) of the truncated system."""
        p = self.params
        phi_vals = self.basis @ a
        sigma_vals = self.basis @ b
        c = self._mu_coeffs(a, b, phi_vals)
        mu_vals = self.basis @ c
        p_vals = p_eval(p.p, phi_vals)[0]
        x_vals = kernels.exchange_source(p_vals, phi_vals, sigma_vals, mu_vals,
                                         p.chi_sigma, p.chi_phi)
        xp = self.weights @ x_vals
        da = -self.ell * c + xp
        db = -self.ell * (p.chi_sigma * b - p.chi_phi * a) - xp
        return da, db

    def dissipation(self, a, b):
        """Instantaneous modal dissipation (the integrand of the energy law)."""
        p = self.params
        phi_vals = self.basis @ a
        sigma_vals = self.basis @ b
        c = self._mu_coeffs(a, b, phi_vals)
        mu_vals = self.basis @ c
        n_vals = kernels.nutrient_potential(phi_vals, sigma_vals, p.chi_sigma, p.chi_phi)
        p_vals = p_eval(p.p, phi_vals)[0]
        diff = n_vals - mu_vals
        d_ex = self.quad_grid.cell_volume * float((p_vals * diff * diff).sum())
        d_mu = float((self.ell * c * c).sum())
        d_n = float((self.ell * (p.chi_sigma * b - p.chi_phi * a) ** 2).sum())
        return d_mu, d_n, d_ex

    def eval_full(self, a, b, out_da, out_db):
        """(da, db) into the out views; returns total dissipation.

        Uses the fused compiled kernel when psi' is polynomial and p is
        constant, the generic composition otherwise.
        """
        p = self.params
        if self._dpsi_coeffs is not None:
            return kernels.galerkin_eval(
                self.basis, self.weights, self.ell,
                np.ascontiguousarray(a), np.ascontiguousarray(b),
                p.chi_phi, p.chi_sigma, p.p.p0, self._dpsi_coeffs,
                self.quad_grid.cell_volume, out_da, out_db)
        phi_vals = self.basis @ a
        sigma_vals = self.basis @ b
        c = self._mu_coeffs(a, b, phi_vals)
        mu_vals = self.basis @ c
        p_vals = p_eval(p.p, phi_vals)[0]
        diff = kernels.nutrient_potential(phi_vals, sigma_vals, p.chi_sigma,
                                          p.chi_phi) - mu_vals
        xp = self.weights @ (p_vals * diff)
        gb = p.chi_sigma * b - p.chi_phi * a
        out_da[:] = -self.ell * c + xp
        out_db[:] = -self.ell * gb - xp
        d = float((self.ell * c * c).sum() + (self.ell * gb * gb).sum())
        return d + self.quad_grid.cell_volume * float((p_vals * diff * diff).sum())

    def report(self, gstate: GalerkinState, dt_used: float = 0.0) -> EnergyReport:
        """EnergyReport of the truncated fields (same schema as the solver)."""
        p = self.params
        a, b = gstate.a, gstate.b
        phi_vals = self.basis @ a
        sigma_vals = self.basis @ b
        cvq = self.quad_grid.cell_volume
        gradient_term = 0.5 * float((self.ell * a * a).sum())
        potential_term = cvq * float(psi_eval(p.psi, phi_vals)[0].sum())
        sigma_term = 0.5 * p.chi_sigma * float((b * b).sum())
        cross_term = p.chi_phi * cvq * float((sigma_vals * (1.0 - phi_vals)).sum())
        d_mu, d_n, d_ex = self.dissipation(a, b)
        mass = cvq * float((phi_vals + sigma_vals).sum())
        return EnergyReport(
            E=gradient_term + potential_term + sigma_term + cross_term,
            gradient_term=gradient_term, potential_term=potential_term,
            sigma_term=sigma_term, cross_term=cross_term,
            D_mu=d_mu, D_N=d_n, D_exchange=d_ex, mass=mass, dt_used=dt_used)


def project_initial(state: State, n: int, params: ModelParams | None = None) -> GalerkinState:
    """Orthogonal projection of (phi, sigma) onto the first n modes."""
    params = params or ModelParams.default()
    return GalerkinSystem(state.grid, n, params).project_initial(state)


def galerkin_rhs(gstate: GalerkinState, params: ModelParams):
    """(da/dt, db/dt); builds a one-shot system (use GalerkinSystem for loops)."""
    sys = GalerkinSystem(gstate.grid, gstate.n, params)
    return sys.rhs(gstate.a, gstate.b)


# -- adaptive embedded Runge-Kutta 5(4), Dormand-Prince coefficients ---------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class GalerkinTrajectory:
    """Sampled modal trajectory with the accumulated dissipation integral."""

    system: GalerkinSystem
    times: list = field(default_factory=list)
    a_samples: list = field(default_factory=list)
    b_samples: list = field(default_factory=list)
    dissipated: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final(self) -> GalerkinState:
        return GalerkinState(self.system.n, self.a_samples[-1], self.b_samples[-1],
                             self.times[-1], self.system.grid)

    def energy_identity_defect(self) -> float:
        """max over samples of |E(t) + integral of dissipation - E(0)|."""
        e0 = self.reports[0].E
        worst = 0.0
        for rep, dis in zip(self.reports, self.dissipated):
            worst = max(worst, abs(rep.E + dis - e0))
        return worst

    def write_energy_csv(self, path, seed=None):
        from .reporting import write_energy_csv_rows
        from .solver import _row

        rows = []
        for t, a, b, rep in zip(self.times, self.a_samples, self.b_samples, self.reports):
            st = self.system.reconstruct(
                GalerkinState(self.system.n, a, b, t, self.system.grid),
                self.system.quad_grid)
            rows.append(_row(st, rep, 0.0, 0.0))
        write_energy_csv_rows(path, rows, seed=seed, command="galerkin")

    def write_coefficients_csv(self, path, seed=None):
        n = self.system.n
        with open(path, "w") as fh:
            if seed is not None:
                fh.write(f"# chtumor galerkin seed={seed}\n")
            cols = ["t"] + [f"a_{j + 1}" for j in range(n)] + [f"b_{j + 1}" for j in range(n)]
            fh.write(",".join(cols) + "\n")
            for t, a, b in zip(self.times, self.a_samples, self.b_samples):
                vals = [t] + list(a) + list(b)
                fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def integrate_galerkin(gstate: GalerkinState, params: ModelParams, T: float,
                       dt: float = 1e-6, rtol: float = 1e-9, atol: float = 1e-12,
                       record_every: int = 200, system: GalerkinSystem | None = None,
                       record_times=None) -> GalerkinTrajectory:
    """Integrate the truncated system to time T with the embedded 5(4) pair.

    ``record_times`` forces samples at given times (the integrator lands on
    them exactly); otherwise samples are kept every ``record_every`` accepted
    steps plus the endpoint. Step-size control is PI-style on the weighted
    RMS error; a collapsing step raises GalerkinStiffnessError naming the
    mode whose error estimate dominates.
    """
    if T < gstate.t:
        raise ValueError("T must be >= the initial time")
    sys_ = system or GalerkinSystem(gstate.grid, gstate.n, params)
    n = sys_.n

    def f(y):
        out = np.empty(2 * n + 1)
        out[2 * n] = sys_.eval_full(y[:n], y[n:2 * n], out[:n], out[n:2 * n])
        return out

    traj = GalerkinTrajectory(system=sys_)

    def record(t, y, dt_used):
        traj.times.append(t)
        traj.a_samples.append(y[:n].copy())
        traj.b_samples.append(y[n:2 * n].copy())
        traj.dissipated.append(float(y[2 * n]))
        traj.reports.append(sys_.report(
            GalerkinState(n, y[:n], y[n:2 * n], t, sys_.grid), dt_used))

    y = np.concatenate([gstate.a, gstate.b, [0.0]])
    t = gstate.t
    record(t, y, 0.0)
    if T == gstate.t:
        return traj

    checkpoints = sorted(set(record_times or [])) if record_times else []
    checkpoints = [c for c in checkpoints if gstate.t < c <= T]
    if not checkpoints or checkpoints[-1] < T:
        checkpoints.append(T)

    h = min(dt, T - t)
    dt_min = 1e-13 * max(T, 1.0)
    m = 2 * n + 1
    ks = np.empty((7, m))
    ks[0] = f(y)  # FSAL
    err_prev = 1.0
    next_cp = 0
    d_err = _DP_B5 - _DP_B4
    while t < T - 1e-14 * T:
        target = checkpoints[next_cp]
        clipped = False
        if t + h >= target - 1e-14 * max(target, 1.0):
            h = target - t
            clipped = True
        for i in range(1, 7):
            ks[i] = f(y + h * (_DP_A[i] @ ks[:i]))
        y5 = y + h * (_DP_B5 @ ks)
        err_raw = h * (d_err @ ks)
        err_vec = err_raw / (atol + rtol * np.maximum(np.abs(y), np.abs(y5)))
        err = float(np.sqrt(np.mean(err_vec ** 2)))
        if err <= 1.0:
            t = t + h
            y = y5
            ks[0] = ks[6]  # FSAL: last stage evaluated at (t+h, y5)
            traj.n_steps += 1
            on_cp = clipped or abs(t - target) <= 1e-14 * max(target, 1.0)
            if on_cp:
                record(t, y, h)
                next_cp += 1
            elif record_times is None and traj.n_steps % record_every == 0:
                record(t, y, h)
            # PI controller
            fac = 0.9 * err ** -0.14 * err_prev ** 0.08 if err > 0 else 5.0
            err_prev = max(err, 1e-10)
        else:
            traj.n_rejected += 1
            fac = max(0.2, 0.9 * err ** -0.2)
        h = h * min(5.0, max(0.2, fac))
        if h < dt_min:
            i_worst = int(np.argmax(np.abs(err_vec)))
            comp = "a" if i_worst < n else ("b" if i_worst < 2 * n else "dissipation")
            raise GalerkinStiffnessError(
                f"step size collapsed to {h:.3e} at t={t:.6g} "
                f"(worst component {comp}[{i_worst % n}])",
                i_worst % n, comp)
    if record_times is not None and traj.times[-1] < T:
        record(t, y, h)
    return traj


@dataclass
class CrossvalReport:
    """Modal-ODE vs truncation-matched semi-implicit solver comparison.

    The pass threshold applies to the gap at the horizon (the last
    checkpoint); intermediate gaps are recorded for inspection and peak
    mid-transient, where the first-order solver error is largest.
    """

    n: int
    dt: float
    times: list
    gaps: list
    threshold: float

    @property
    def final_gap(self) -> float:
        return self.gaps[-1]

    @property
    def passed(self) -> bool:
        return self.final_gap <= self.threshold

    @property
    def max_gap(self) -> float:
        return max(self.gaps)


def cross_validate(grid: Grid, n: int, params: ModelParams, initial: State,
                   T: float, dt: float = 1e-5, rtol: float = 1e-9,
                   n_checkpoints: int = 5, threshold: float = 1e-6) -> CrossvalReport:
    """Integrate the same truncated dynamics along two unrelated routes.

    Route one: the adaptive explicit modal integrator. Route two: the
    production semi-implicit solver restricted to the same n modes after
    every stage. The L2 distance between the two trajectories at shared
    checkpoints is the cross-validation gap. Exactness of both nonlinear
    projections requires unit mobilities and a constant proliferation rate
    (otherwise the two truncations genuinely differ).
    """
    from .potentials import ConstantProliferation
    from .solver import SchemeOpts, energy, step

    if not isinstance(params.p, ConstantProliferation):
        raise ValueError("cross-validation requires the constant proliferation family")
    sys_ = GalerkinSystem(grid, n, params)
    g0 = sys_.project_initial(initial)
    start = sys_.reconstruct(g0)

    steps_total = int(round(T / dt))
    if abs(steps_total * dt - T) > 1e-12 * max(T, 1.0):
        raise ValueError("dt must divide the horizon T")
    every = max(1, steps_total // n_checkpoints)
    check_steps = sorted({k for k in range(every, steps_total + 1, every)} | {steps_total})
    times = [k * dt for k in check_steps]

    opts = SchemeOpts(n_modes=n)
    st = start
    rep = energy(st, params)
    imex_coeffs = {}
    for k in range(1, steps_total + 1):
        st, rep = step(st, params, dt, opts, prev_report=rep)
        if k in check_steps:
            imex_coeffs[k] = (sys_.project_field(st.phi), sys_.project_field(st.sigma))

    traj = integrate_galerkin(g0, params, T, dt=min(dt, 1e-6), rtol=rtol,
                              system=sys_, record_times=times)
    gaps = []
    for k, t in zip(check_steps, times):
        ia, ib = imex_coeffs[k]
        j = traj.times.index(min(traj.times, key=lambda s: abs(s - t)))
        ga = traj.a_samples[j]
        gb = traj.b_samples[j]
        gaps.append(math.sqrt(float(((ia - ga) ** 2).sum() + ((ib - gb) ** 2).sum())))
    return CrossvalReport(n=n, dt=dt, times=times, gaps=gaps, threshold=threshold)
