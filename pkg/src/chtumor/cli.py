"""Command-line front end: batch experiments driven by one config file.

    chtumor <command> --config run.ini [--out DIR] [--seed N]

Commands: simulate, galerkin, stationary, semigroup, crossval, dependence,
omega, sweep, render. Every output file records the seed in its header
line; identical config + seed reproduces byte-identical CSV output. On
failure a one-line JSON summary goes to stderr and the exit status is
nonzero (2 for configuration problems, 1 for runtime failures and failed
verification thresholds).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .config import ConfigError, RunConfig, load_config, serialize_config
from .fieldio import export_csv, load_snapshot, save_snapshot
from .render import RenderError, render_heatmap
from .reporting import EnergyCSV, write_kv_summary, write_table_csv
from .solver import StepRejectedError, run

COMMANDS = ("simulate", "galerkin", "stationary", "semigroup", "crossval",
            "dependence", "omega", "sweep", "render")


class CommandFailure(RuntimeError):
    """A command ran but its verification threshold failed."""


def _outdir(cfg: RunConfig, override):
    path = override or cfg.output.directory
    os.makedirs(path, exist_ok=True)
    return path


def _seed(cfg: RunConfig, override):
    return cfg.initial.seed if override is None else override


def _write_config_echo(cfg, outdir, seed, command):
    echo = os.path.join(outdir, "resolved_config.ini")
    with open(echo, "w") as fh:
        fh.write(f"# chtumor {command} seed={seed}\n")
        fh.write(serialize_config(cfg))


def cmd_simulate(cfg: RunConfig, outdir: str, seed: int) -> int:
    grid = cfg.build_grid()
    params = cfg.build_params()
    state = cfg.build_initial(grid, seed=seed)
    report = params.validate()
    flag = "assumptions=ok" if report.passed else "assumptions=violated"
    opts = cfg.scheme_opts()

    snap_index = [0]

    def snapshot_cb(st):
        if "snapshot" in cfg.output.formats:
            save_snapshot(st.phi, os.path.join(outdir, f"phi_{snap_index[0]:06d}.snap"))
            save_snapshot(st.sigma, os.path.join(outdir, f"sigma_{snap_index[0]:06d}.snap"))
            snap_index[0] += 1

    with EnergyCSV(os.path.join(outdir, "energy.csv"), seed=seed, command="simulate",
                   extra=flag) as sink:
        summary = run(state, params, T=cfg.time.T, dt=cfg.time.dt, opts=opts,
                      csv_every=cfg.time.csv_every, row_sink=sink.write_row,
                      snapshot_cb=snapshot_cb if cfg.time.snapshot_every else None,
                      snapshot_every=cfg.time.snapshot_every)
    final = summary.final_state
    if "snapshot" in cfg.output.formats:
        save_snapshot(final.phi, os.path.join(outdir, "phi_final.snap"))
        save_snapshot(final.sigma, os.path.join(outdir, "sigma_final.snap"))
    if "csv" in cfg.output.formats:
        export_csv(final.phi, os.path.join(outdir, "phi_final.csv"))
    if "png" in cfg.output.formats and grid.dims == 2:
        render_heatmap(final.phi, os.path.join(outdir, "phi_final.png"))
    write_kv_summary(os.path.join(outdir, "summary.txt"), {
        "assumptions": "ok" if report.passed else "violated",
        "T": cfg.time.T, "n_steps": summary.n_steps,
        "phi_min": summary.phi_min, "phi_max": summary.phi_max,
        "monotonicity_violations": summary.monotonicity_violations,
        "mass_drift": summary.mass_drift,
        "E_initial": summary.initial_report.E, "E_final": summary.final_report.E,
    }, seed=seed, command="simulate")
    return 0


def cmd_galerkin(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .galerkin import GalerkinSystem, integrate_galerkin

    grid = cfg.build_grid()
    params = cfg.build_params()
    state = cfg.build_initial(grid, seed=seed)
    sys_ = GalerkinSystem(grid, cfg.galerkin.n_modes, params)
    g0 = sys_.project_initial(state)
    traj = integrate_galerkin(g0, params, T=cfg.time.T, dt=min(cfg.time.dt, 1e-6),
                              rtol=cfg.galerkin.rtol,
                              record_every=cfg.galerkin.record_every, system=sys_)
    traj.write_energy_csv(os.path.join(outdir, "galerkin_energy.csv"), seed=seed)
    traj.write_coefficients_csv(os.path.join(outdir, "galerkin_coefficients.csv"), seed=seed)
    write_kv_summary(os.path.join(outdir, "galerkin_summary.txt"), {
        "n_modes": cfg.galerkin.n_modes, "T": cfg.time.T,
        "steps": traj.n_steps, "rejected": traj.n_rejected,
        "energy_identity_defect": traj.energy_identity_defect(),
    }, seed=seed, command="galerkin")
    return 0


def cmd_stationary(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .stationary import MinimizeOpts, constant_states, minimize_energy

    grid = cfg.build_grid()
    params = cfg.build_params()
    sc = cfg.stationary
    rows = []

    def add_row(kind, pt):
        rows.append((float(pt.M), float(params.chi_phi), float(params.chi_sigma),
                     float(pt.mu0), float(pt.E_value), float(pt.r1), float(pt.r2),
                     float(pt.r3), int(pt.iterations),
                     "yes" if pt.converged else "no", kind))

    for pt in constant_states(sc.M, params, grid, bracket=sc.bracket,
                              subdivisions=sc.subdivisions):
        add_row("constant", pt)

    opts = MinimizeOpts(tol=sc.tol, max_iter=sc.max_iter)
    for k in range(sc.n_starts):
        state = cfg.build_initial(grid, seed=seed + k)
        pt = minimize_energy(state, sc.M, params, opts)
        add_row(f"minimizer_{k}", pt)
        if "snapshot" in cfg.output.formats:
            save_snapshot(pt.phi_star, os.path.join(outdir, f"stationary_phi_{k}.snap"))
            save_snapshot(pt.sigma_star, os.path.join(outdir, f"stationary_sigma_{k}.snap"))

    write_table_csv(os.path.join(outdir, "stationary.csv"),
                    ["M", "chi_phi", "chi_sigma", "mu0", "E_value",
                     "r1", "r2", "r3", "iterations", "converged", "kind"],
                    rows, seed=seed, command="stationary")
    if any(row[-2] == "no" for row in rows):
        raise CommandFailure("one or more minimizations did not converge")
    return 0


def cmd_semigroup(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .semigroup import decay_constants, small_time_slope

    grid = cfg.build_grid()
    params = cfg.build_params()
    report = decay_constants(params, None, grid, t_samples=cfg.semigroup.t_samples,
                             n_random=cfg.semigroup.n_random, seed=seed)
    slowest = float(-report.abscissas.max())
    rows = [(float(lam), float(absc), "yes" if -absc == report.omega1 else "no")
            for lam, absc in zip(report.lams, report.abscissas)]
    write_table_csv(os.path.join(outdir, "decay_report.csv"),
                    ["lambda", "abscissa", "slowest_mode"], rows,
                    seed=seed, command="semigroup")
    write_kv_summary(os.path.join(outdir, "semigroup_summary.txt"), {
        "omega1": report.omega1, "omega2": report.omega2,
        "smoothing_constant": report.smoothing_constant,
        "n_modes": report.n_modes, "violations": len(report.violations),
        "slowest_abscissa": -slowest,
        "small_time_slope": small_time_slope(params, None, grid),
    }, seed=seed, command="semigroup")
    if report.violations:
        raise CommandFailure(f"{len(report.violations)} decay bound violations")
    return 0


def cmd_crossval(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .galerkin import cross_validate

    grid = cfg.build_grid()
    params = cfg.build_params()
    state = cfg.build_initial(grid, seed=seed)
    cv = cfg.crossval
    report = cross_validate(grid, cv.n_modes, params, state, T=cfg.time.T,
                            dt=cv.dt, rtol=cv.rtol,
                            n_checkpoints=cv.n_checkpoints, threshold=cv.threshold)
    write_table_csv(os.path.join(outdir, "crossval.csv"), ["t", "l2_gap"],
                    list(zip(report.times, report.gaps)), seed=seed, command="crossval")
    write_kv_summary(os.path.join(outdir, "crossval_summary.txt"), {
        "n_modes": cv.n_modes, "dt": cv.dt, "threshold": cv.threshold,
        "final_gap": report.final_gap, "max_gap": report.max_gap,
        "passed": "yes" if report.passed else "no",
    }, seed=seed, command="crossval")
    if not report.passed:
        raise CommandFailure(
            f"cross-validation gap {report.final_gap:.3e} at the horizon "
            f"exceeds {cv.threshold:.1e}")
    return 0


def cmd_dependence(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .dynamics import ExperimentConfig, continuous_dependence_experiment

    grid = cfg.build_grid()
    params = cfg.build_params()
    state = cfg.build_initial(grid, seed=seed)
    dep = cfg.dependence
    config = ExperimentConfig(epsilon=dep.epsilon, dt=dep.dt,
                              sample_times=dep.times, scheme=cfg.scheme_opts())
    report = continuous_dependence_experiment(state, params, config)
    write_table_csv(os.path.join(outdir, "dependence.csv"),
                    ["t", "d_eps", "d_half", "ratio", "growth"],
                    [(t, f, h, r, g) for t, f, h, r, g in
                     zip(report.times, report.d_full, report.d_half,
                         report.ratios, report.growth)],
                    seed=seed, command="dependence")
    write_kv_summary(os.path.join(outdir, "dependence_summary.txt"), {
        "epsilon": report.epsilon, "d0": report.d0,
        "ratios": " ".join(repr(r) for r in report.ratios),
        "growth": " ".join(repr(g) for g in report.growth),
        "linear_band": "yes" if report.ratios_within() else "no",
    }, seed=seed, command="dependence")
    return 0


def cmd_omega(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .dynamics import ExperimentConfig, omega_limit_probe

    grid = cfg.build_grid()
    params = cfg.build_params()
    state = cfg.build_initial(grid, seed=seed)
    oc = cfg.omega
    config = ExperimentConfig(T=oc.T, dt=oc.dt, velocity_tol=oc.velocity_tol,
                              state_every=oc.state_every, scheme=cfg.scheme_opts())
    flag = "assumptions=ok" if params.validate().passed else "assumptions=violated"
    sink = EnergyCSV(os.path.join(outdir, "omega_energy.csv"), seed=seed,
                     command="omega", extra=flag)
    try:
        report = omega_limit_probe(state, params, config, row_sink=sink.write_row)
    finally:
        sink.close()
    write_kv_summary(os.path.join(outdir, "omega_summary.txt"), {
        "T": oc.T, "velocity_phi": report.vel_phi, "velocity_sigma": report.vel_sigma,
        "distance_to_constant_set": report.distance_to_constant_set,
        "nearest_constant": report.nearest_constant,
        "energy_plateau": report.energy_plateau,
        "r1": report.stationary_residuals[0],
        "r2": report.stationary_residuals[1],
        "r3": report.stationary_residuals[2],
        "converged": "yes" if report.converged else "no",
        "mass_level": report.mass_level,
    }, seed=seed, command="omega")
    if not report.converged:
        raise CommandFailure("trajectory did not reach the velocity tolerance")
    return 0


def cmd_sweep(cfg: RunConfig, outdir: str, seed: int) -> int:
    from .dynamics import lyapunov_audit

    sw = cfg.sweep
    jobs = []
    for chi_phi in sw.chi_phi:
        for chi_sigma in sw.chi_sigma:
            for s in sw.seeds:
                jobs.append((chi_phi, chi_sigma, int(s)))

    def one(job):
        chi_phi, chi_sigma, s = job
        gap_floor = 2.0 * chi_phi ** 2 / chi_sigma
        r1 = max(cfg.potential.R1, gap_floor + 0.5)
        sub = replace(cfg,
                      model=replace(cfg.model, chi_phi=chi_phi, chi_sigma=chi_sigma),
                      potential=replace(cfg.potential, R1=r1, R2=None))
        grid = sub.build_grid()
        params = sub.build_params()
        state = sub.build_initial(grid, seed=s)
        tag = f"run_p{chi_phi}_s{chi_sigma}_seed{s}".replace(".", "_")
        rundir = os.path.join(outdir, tag)
        os.makedirs(rundir, exist_ok=True)
        flag = "assumptions=ok" if params.validate().passed else "assumptions=violated"
        with EnergyCSV(os.path.join(rundir, "energy.csv"), seed=s, command="sweep",
                       extra=flag) as sink:
            summary = run(state, params, T=sw.T, dt=cfg.time.dt, opts=sub.scheme_opts(),
                          csv_every=cfg.time.csv_every, row_sink=sink.write_row)
        violations = lyapunov_audit(os.path.join(rundir, "energy.csv"))
        return (tag, chi_phi, chi_sigma, s, r1, len(violations),
                float(summary.final_report.E), float(summary.mass_drift))

    workers = max(1, min(sw.workers, len(jobs)))
    if workers == 1:
        results = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    results.sort()
    write_table_csv(os.path.join(outdir, "sweep_summary.csv"),
                    ["run", "chi_phi", "chi_sigma", "seed", "R1",
                     "lyapunov_violations", "E_final", "mass_drift"],
                    results, seed=seed, command="sweep")
    total = sum(r[5] for r in results)
    if total:
        raise CommandFailure(f"{total} Lyapunov violations across the sweep")
    return 0


def cmd_render(args) -> int:
    field = load_snapshot(args.snapshot)
    out = args.out or os.path.dirname(args.snapshot) or "."
    os.makedirs(out, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.snapshot))[0]
    png, sidecar = render_heatmap(field, os.path.join(out, base + ".png"),
                                  cmap=args.cmap)
    print(png)
    print(sidecar)
    return 0


_RUNNERS = {
    "simulate": cmd_simulate,
    "galerkin": cmd_galerkin,
    "stationary": cmd_stationary,
    "semigroup": cmd_semigroup,
    "crossval": cmd_crossval,
    "dependence": cmd_dependence,
    "omega": cmd_omega,
    "sweep": cmd_sweep,
}


def dispatch(command: str, cfg: RunConfig, outdir=None, seed=None) -> int:
    """Run one pipeline; returns the process exit status."""
    if command not in _RUNNERS:
        raise ConfigError(f"unknown command {command!r}{_cmd_suggest(command)}")
    out = _outdir(cfg, outdir)
    s = _seed(cfg, seed)
    _write_config_echo(cfg, out, s, command)
    return _RUNNERS[command](cfg, out, s)


def _cmd_suggest(command):
    import difflib

    close = difflib.get_close_matches(command, COMMANDS, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="chtumor",
        description="Spectral laboratory for a two-phase tumor growth model "
                    "with chemotaxis and active transport.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "render":
            p.add_argument("--snapshot", required=True, help="field snapshot file")
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--cmap", default="gray", choices=("gray", "viridis"))
        else:
            p.add_argument("--config", required=True, help="run configuration file")
            p.add_argument("--out", default=None, help="output directory override")
            p.add_argument("--seed", type=int, default=None, help="seed override")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            return cmd_render(args)
        cfg = load_config(args.config)
        return dispatch(args.command, cfg, outdir=args.out, seed=args.seed)
    except (ConfigError, FileNotFoundError, RenderError) as exc:
        print(json.dumps({"command": args.command, "status": "error",
                          "error_type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except (CommandFailure, StepRejectedError, ValueError, RuntimeError) as exc:
        print(json.dumps({"command": args.command, "status": "error",
                          "error_type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
