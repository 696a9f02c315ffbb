"""Built-in initial data generators; all randomness flows from one seed."""

from __future__ import annotations

import numpy as np

from .solver import State
from .spectral import Field, Grid

GENERATORS = ("constant", "random-uniform", "bump", "checkerboard", "cosine")


def initial_state(grid: Grid, generator: str = "random-uniform", seed: int = 0,
                  phi_mean: float = 0.0, phi_amplitude: float = 0.05,
                  sigma_mean: float = 0.1, sigma_amplitude: float = 0.0,
                  bump_radius: float | None = None, bump_width: float | None = None,
                  checker_cells: int = 4, cosine_modes: int = 1) -> State:
    """Build a (phi, sigma) pair at t = 0 from a named generator."""
    if generator not in GENERATORS:
        raise ValueError(f"unknown generator {generator!r}; choose from {GENERATORS}")
    rng = np.random.default_rng(seed)

    if generator == "constant":
        phi = np.full(grid.shape, phi_mean)
        sigma = np.full(grid.shape, sigma_mean)
    elif generator == "random-uniform":
        phi = phi_mean + phi_amplitude * rng.uniform(-1.0, 1.0, size=grid.shape)
        sigma = sigma_mean + sigma_amplitude * rng.uniform(-1.0, 1.0, size=grid.shape)
    elif generator == "bump":
        mesh = grid.meshgrid()
        center = [0.5 * L for L in grid.lengths]
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(mesh, center)))
        radius = bump_radius if bump_radius is not None else 0.25 * min(grid.lengths)
        width = bump_width if bump_width is not None else 4.0 * min(
            L / n for L, n in zip(grid.lengths, grid.resolution))
        # interior value phi_mean + phi_amplitude, exterior phi_mean - phi_amplitude
        phi = phi_mean + phi_amplitude * np.tanh((radius - r) / width)
        sigma = sigma_mean + sigma_amplitude * np.tanh((radius - r) / width)
    elif generator == "checkerboard":
        idx = np.zeros(grid.shape)
        for a, (x, L) in enumerate(zip(grid.meshgrid(), grid.lengths)):
            idx += np.floor(x * checker_cells / L)
        sign = np.where(idx % 2 == 0, 1.0, -1.0)
        phi = phi_mean + phi_amplitude * sign
        sigma = np.full(grid.shape, sigma_mean)
    else:  # cosine: smooth low-mode profile, handy for convergence studies
        mesh = grid.meshgrid()
        phi = np.full(grid.shape, phi_mean)
        sigma = np.full(grid.shape, sigma_mean)
        for k in range(1, cosine_modes + 1):
            wave = np.ones(grid.shape)
            for x, L in zip(mesh, grid.lengths):
                wave = wave * np.cos(k * np.pi * x / L)
            phi = phi + phi_amplitude / k * wave
            sigma = sigma + sigma_amplitude / k * wave

    return State(0.0, Field(grid, phi), Field(grid, sigma))
