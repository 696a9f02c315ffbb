"""Long-time experiments: Lyapunov audits, omega-limit probes, continuous
dependence, and regularity tracking.

The free energy is a strict Lyapunov function of the flow, so guarded runs
must show a nonincreasing energy column; trajectories should settle onto
stationary points (velocities vanishing in the dual norm) with the energy
plateauing at a stationary value; and two solutions started close together
should separate linearly in the perturbation size over moderate horizons.
These experiments turn each of those statements into a measured report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import is_unit
from .reporting import read_energy_csv
from .solver import ModelParams, SchemeOpts, State, run
from .spectral import Field, norms, norms_from_coeffs, sobolev_norm
from .stationary import constant_states, stationary_residual


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared knobs for the long-time experiments."""

    T: float = 200.0
    dt: float = 0.01
    epsilon: float = 1e-3
    velocity_tol: float = 1e-6
    sample_times: tuple = (0.1, 0.5, 1.0)
    state_every: int = 50
    scheme: SchemeOpts = field(default_factory=SchemeOpts)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.T <= 0:
            raise ValueError("T must be positive")


# -- Lyapunov audit ----------------------------------------------------------

def lyapunov_audit(energy_csv, tol: float = 1e-10):
    """Rows where the energy increased beyond tol*(1+|E|).

    Accepts a CSV path or pre-parsed rows; returns a list of
    (row_index, t, E_prev, E, excess). Guarded runs are expected to produce
    an empty list; equality (a constant-energy stationary run) is fine.
    """
    rows = read_energy_csv(energy_csv) if isinstance(energy_csv, (str, bytes)) else energy_csv
    violations = []
    prev = None
    for i, row in enumerate(rows):
        e = row["E"] if isinstance(row, dict) else row[2]
        t = row["t"] if isinstance(row, dict) else row[0]
        if prev is not None and e > prev + tol * (1.0 + abs(prev)):
            violations.append((i, t, prev, e, e - prev - tol * (1.0 + abs(prev))))
        prev = e
    return violations


# -- omega-limit probe ---------------------------------------------------------

@dataclass
class OmegaLimitReport:
    vel_phi: float
    vel_sigma: float
    distance_to_constant_set: float
    nearest_constant: tuple | None
    energy_plateau: float
    stationary_residuals: tuple
    converged: bool
    T: float
    mass_level: float


def omega_limit_probe(initial: State, params: ModelParams,
                      config: ExperimentConfig | None = None,
                      row_sink=None) -> OmegaLimitReport:
    """Run to the horizon and measure how stationary the endpoint is.

    Velocities are dual-norm difference quotients at the final accepted
    step; the distance is against the uniform stationary states at the
    trajectory's own mass level (plus nothing else: nonuniform stationary
    points are not enumerable, so the label is 'distance to known points').
    """
    config = config or ExperimentConfig()
    summary = run(initial, params, T=config.T, dt=config.dt, opts=config.scheme,
                  csv_every=max(1, config.state_every), row_sink=row_sink)
    final = summary.final_state
    last = summary.rows[-1]
    vel_phi, vel_sigma = last[15], last[16]

    grid = final.grid
    m_level = (float(final.phi.values.mean()) + float(final.sigma.values.mean()))
    candidates = constant_states(m_level, params, grid)
    nearest = None
    dist = math.inf
    for pt in candidates:
        d = math.sqrt(
            grid.cell_volume * float(((final.phi.values - pt.phi_star.values) ** 2).sum())
            + grid.cell_volume * float(((final.sigma.values - pt.sigma_star.values) ** 2).sum()))
        if d < dist:
            dist = d
            nearest = (float(pt.phi_star.values.flat[0]), float(pt.sigma_star.values.flat[0]))
    residuals = stationary_residual(final, params, M=m_level)
    converged = vel_phi + vel_sigma < config.velocity_tol
    return OmegaLimitReport(
        vel_phi=vel_phi, vel_sigma=vel_sigma,
        distance_to_constant_set=dist, nearest_constant=nearest,
        energy_plateau=summary.final_report.E,
        stationary_residuals=residuals, converged=converged,
        T=config.T, mass_level=m_level)


# -- continuous dependence ---------------------------------------------------

@dataclass
class DependenceReport:
    epsilon: float
    times: tuple
    d_full: tuple      # dual-norm distance, perturbation eps
    d_half: tuple      # dual-norm distance, perturbation eps/2
    ratios: tuple      # d_full / d_half per sample time
    growth: tuple      # d_full(t) / d_full(0)
    d0: float

    def ratios_within(self, lo=1.8, hi=2.2) -> bool:
        return all(lo <= r <= hi for r in self.ratios)


def _dual_distance(a: State, b: State) -> float:
    gp = a.phi.coeffs - b.phi.coeffs
    gs = a.sigma.coeffs - b.sigma.coeffs
    g = a.grid
    return norms_from_coeffs(g, gp).h1_dual + norms_from_coeffs(g, gs).h1_dual


def continuous_dependence_experiment(initial: State, params: ModelParams,
                                     config: ExperimentConfig | None = None) -> DependenceReport:
    """Perturbation-doubling experiment in the dual norms.

    Requires unit mobilities and a strictly positive proliferation mode
    (the hypotheses under which the flow is a contraction up to a growth
    factor). The perturbation direction is the slowest nonconstant cosine
    mode of the grid, L2-normalized.
    """
    config = config or ExperimentConfig()
    if not (is_unit(params.mobility_m) and is_unit(params.mobility_n)):
        raise ValueError("continuous dependence requires unit mobilities")
    if getattr(params.p, "mode", None) != "P2":
        raise ValueError("continuous dependence requires a strictly positive proliferation (P2)")

    grid = initial.grid
    x = grid.axes()[0]
    wave = math.sqrt(2.0 / grid.lengths[0]) * np.cos(np.pi * x / grid.lengths[0])
    shape = [1] * grid.dims
    shape[0] = grid.resolution[0]
    w = np.broadcast_to(wave.reshape(shape) / math.sqrt(
        grid.volume / grid.lengths[0]), grid.shape)

    eps = config.epsilon
    horizon = max(config.sample_times)
    sample_steps = sorted(round(t / config.dt) for t in config.sample_times)
    if any(abs(k * config.dt - t) > 1e-9 for k, t in zip(sample_steps, sorted(config.sample_times))):
        raise ValueError("sample times must be multiples of dt")

    def perturbed(amplitude):
        return State(initial.t,
                     Field(grid, initial.phi.values + amplitude * w),
                     Field(grid, initial.sigma.values.copy()))

    cadence = sample_steps[0]
    for k in sample_steps[1:]:
        cadence = math.gcd(cadence, k)
    trajectories = {}
    for label, amplitude in (("base", 0.0), ("full", eps), ("half", 0.5 * eps)):
        st = perturbed(amplitude)
        states = {0: st}
        summary = run(st, params, T=horizon, dt=config.dt, opts=config.scheme,
                      csv_every=10 ** 9, state_every=cadence)
        for t_snap, s_snap in summary.states:
            k = round(t_snap / config.dt)
            if k in sample_steps:
                states[k] = s_snap
        trajectories[label] = states

    d_full, d_half, growth = [], [], []
    d0 = _dual_distance(trajectories["full"][0], trajectories["base"][0])
    for k in sample_steps:
        df = _dual_distance(trajectories["full"][k], trajectories["base"][k])
        dh = _dual_distance(trajectories["half"][k], trajectories["base"][k])
        d_full.append(df)
        d_half.append(dh)
        growth.append(df / d0 if d0 > 0 else math.inf)
    ratios = tuple(f / h if h > 0 else math.inf for f, h in zip(d_full, d_half))
    return DependenceReport(
        epsilon=eps, times=tuple(sorted(config.sample_times)),
        d_full=tuple(d_full), d_half=tuple(d_half), ratios=ratios,
        growth=tuple(growth), d0=d0)


# -- regularity probe -----------------------------------------------------------

@dataclass
class RegularityReport:
    times: tuple
    h3_phi: tuple
    h1_sigma: tuple
    sup_h3: float
    sup_h1: float
    max_over_median: float
    blowup_flagged: bool


def regularity_probe(states, t_min: float = 1.0, sanity_ratio: float = 1e3) -> RegularityReport:
    """Spectral H3(phi) and H1(sigma) norms along a trajectory sample.

    ``states`` is an iterable of (t, State). Only samples with t >= t_min
    enter the sup and the max/median blow-up flag (the early transient may
    legitimately be rough).
    """
    times, h3s, h1s = [], [], []
    for t, st in states:
        times.append(t)
        h3s.append(sobolev_norm(st.phi, 3.0))
        h1s.append(norms(st.sigma).h1)
    sel = [i for i, t in enumerate(times) if t >= t_min]
    if not sel:
        sel = list(range(len(times)))
    h3_late = [h3s[i] for i in sel]
    h1_late = [h1s[i] for i in sel]
    med = float(np.median(h3_late))
    if med > 0.0:
        ratio = max(h3_late) / med
    else:
        ratio = 1.0 if max(h3_late) == 0.0 else math.inf
    return RegularityReport(
        times=tuple(times), h3_phi=tuple(h3s), h1_sigma=tuple(h1s),
        sup_h3=max(h3_late), sup_h1=max(h1_late),
        max_over_median=ratio, blowup_flagged=not (ratio < sanity_ratio))


# -- default audit matrix -----------------------------------------------------

def default_parameter_matrix():
    """12 parameter sets spanning the coupling ranges, for sweep audits."""
    from .potentials import QuarticDoubleWell

    sets = []
    for chi_phi in (0.0, 0.5, 1.0, 1.5):
        for chi_sigma in (0.5, 1.0, 2.0):
            gap_floor = 2.0 * chi_phi ** 2 / chi_sigma
            R1 = max(2.5, gap_floor + 0.5)
            sets.append(ModelParams.default(
                chi_phi=chi_phi, chi_sigma=chi_sigma,
                psi=QuarticDoubleWell(R1=R1)))
    return sets
