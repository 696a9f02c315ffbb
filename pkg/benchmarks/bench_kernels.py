"""Benchmark: compiled kernel extension vs the pure-NumPy fallback.

Times the pointwise kernels on solver-sized arrays, the fused modal
right-hand side, one full semi-implicit step, and a short modal
integration, with both backends. Also cross-checks that the two backends
agree to rounding.

Run from the repository root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

import chtumor._kernels_py as kpy

try:
    import chtumor._kernels as kc
    HAVE_COMPILED = True
except ImportError:
    kc = None
    HAVE_COMPILED = False

from chtumor.galerkin import GalerkinSystem, integrate_galerkin
from chtumor.initial_data import initial_state
from chtumor.solver import ModelParams, energy, step
from chtumor.spectral import build_grid


def timeit(fn, *args, repeat=200, **kwargs):
    fn(*args, **kwargs)  # warm up
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args, **kwargs)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def fmt(seconds):
    return f"{seconds * 1e6:9.1f} us"


def bench_pointwise(backend, n=4096):
    rng = np.random.default_rng(0)
    s = rng.standard_normal(n)
    phi, sigma, mu, p = (rng.standard_normal(n) for _ in range(4))
    coeffs = np.array([0.0, -1.0, 0.0, 1.0])
    return {
        "quartic_psi(4096)": timeit(backend.quartic_psi, s),
        "poly_eval3(4096)": timeit(backend.poly_eval3, coeffs, s),
        "exchange_source(4096)": timeit(backend.exchange_source, p, phi, sigma, mu, 1.0, 0.7),
        "nutrient_potential(4096)": timeit(backend.nutrient_potential, phi, sigma, 1.0, 0.7),
    }


def bench_galerkin_eval(backend, n=16, nq=48):
    rng = np.random.default_rng(1)
    basis = np.ascontiguousarray(rng.standard_normal((nq, n)))
    weights = np.ascontiguousarray(rng.standard_normal((n, nq)))
    ell = np.abs(rng.standard_normal(n))
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    dc = np.array([0.0, -1.0, 0.0, 1.0])
    da = np.empty(n)
    db = np.empty(n)
    return timeit(backend.galerkin_eval, basis, weights, ell, a, b,
                  1.0, 1.0, 0.5, dc, 1.0 / nq, da, db, repeat=2000)


def parity_check():
    rng = np.random.default_rng(2)
    s = rng.standard_normal(1000)
    for a, b in zip(kpy.quartic_psi(s), kc.quartic_psi(s)):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-14)
    n, nq = 12, 36
    basis = np.ascontiguousarray(rng.standard_normal((nq, n)))
    weights = np.ascontiguousarray(rng.standard_normal((n, nq)))
    ell = np.abs(rng.standard_normal(n))
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    dc = np.array([0.1, -1.0, 0.0, 1.0])
    o1 = [np.empty(n), np.empty(n)]
    o2 = [np.empty(n), np.empty(n)]
    d1 = kpy.galerkin_eval(basis, weights, ell, a, b, 0.7, 1.1, 0.5, dc, 0.03, *o1)
    d2 = kc.galerkin_eval(basis, weights, ell, a, b, 0.7, 1.1, 0.5, dc, 0.03, *o2)
    assert abs(d1 - d2) <= 1e-10 * max(1.0, abs(d1))
    assert np.allclose(o1[0], o2[0], rtol=1e-12, atol=1e-12)
    assert np.allclose(o1[1], o2[1], rtol=1e-12, atol=1e-12)
    print("parity: compiled and fallback kernels agree to rounding\n")


def bench_solver_step():
    grid = build_grid(2, [1.0, 1.0], [64, 64])
    params = ModelParams.default()
    state = initial_state(grid, "random-uniform", seed=0, phi_amplitude=0.1,
                          sigma_mean=0.1)
    rep = energy(state, params)

    def one():
        step(state, params, 1e-4, prev_report=rep)

    return timeit(one, repeat=50)


def bench_modal_integration():
    grid = build_grid(1, [1.0], [64])
    params = ModelParams.default()
    st = initial_state(grid, "cosine", phi_amplitude=0.05, sigma_mean=0.1)
    sys_ = GalerkinSystem(grid, 12, params)
    g0 = sys_.project_initial(st)
    t0 = time.perf_counter()
    traj = integrate_galerkin(g0, params, 0.002, rtol=1e-9, system=sys_)
    return time.perf_counter() - t0, traj.n_steps


def main():
    import chtumor.kernels as active

    print(f"active kernel backend: {active.BACKEND}")
    print(f"compiled extension available: {HAVE_COMPILED}\n")

    backends = [("numpy", kpy)] + ([("cython", kc)] if HAVE_COMPILED else [])
    if HAVE_COMPILED:
        parity_check()

    rows = {}
    for name, backend in backends:
        rows[name] = bench_pointwise(backend)
        rows[name]["galerkin_eval(n=16)"] = bench_galerkin_eval(backend)

    keys = list(next(iter(rows.values())))
    header = f"{'kernel':28s}" + "".join(f"{name:>14s}" for name in rows)
    if len(rows) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for key in keys:
        line = f"{key:28s}" + "".join(fmt(rows[name][key]) for name in rows)
        if len(rows) == 2:
            line += f"{rows['numpy'][key] / rows['cython'][key]:9.2f}x"
        print(line)

    print("\nend-to-end (active backend):")
    print(f"  IMEX step, 2D 64x64:      {fmt(bench_solver_step())}")
    elapsed, steps = bench_modal_integration()
    print(f"  modal RK, n=12, T=0.002:  {elapsed:.3f} s ({steps} steps, "
          f"{elapsed / max(steps, 1) * 1e6:.0f} us/step)")


if __name__ == "__main__":
    main()
