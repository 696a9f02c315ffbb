"""The linearized evolution around the stationary set, mode by mode.

In the eigenbasis of ``A = -lap + id`` the linear system

    phi_t + A^2 phi - chi_phi A sigma + R1 A phi = 0
    sigma_t + chi_sigma A sigma - chi_phi A phi  = 0

decouples into independent 2x2 blocks, one per eigenvalue ``lam >= 1``:

    d/dt (phi_k, sigma_k) = [[-lam^2 - R1 lam, chi_phi lam],
                             [chi_phi lam,     -chi_sigma lam]] (phi_k, sigma_k)

The block matrix is symmetric, its determinant is
``lam^2 (chi_sigma (lam + R1) - chi_phi^2)`` and its trace is negative, so
the spectral abscissa is negative for every mode exactly when
``R1 > 2 chi_phi^2 / chi_sigma`` (the same coercivity constant R1 the
potential carries). ``decay_constants`` verifies the uniform decay bound
(constant 2, rate = slowest mode) in the H1 x L2 weighting and measures the
parabolic smoothing gain from the dual pair H1* x H1*, including its
1/sqrt(t) short-time shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import ModelParams
from .spectral import Grid


class SemigroupError(ValueError):
    """Invalid block construction (bad lambda or violated gap condition)."""


def _gap(params: ModelParams, R1: float) -> float:
    return R1 - 2.0 * params.chi_phi ** 2 / params.chi_sigma


def _resolve_R1(params: ModelParams, R1) -> float:
    spec_R1 = getattr(params.psi, "R1", None)
    if R1 is None:
        if spec_R1 is None:
            raise SemigroupError("R1 not given and the potential spec declares none")
        return float(spec_R1)
    if spec_R1 is not None and abs(R1 - spec_R1) > 1e-12 * max(1.0, abs(spec_R1)):
        raise SemigroupError(
            f"R1={R1!r} disagrees with the potential's coercivity constant {spec_R1!r}")
    return float(R1)


@dataclass(frozen=True)
class ModeBlock:
    """One 2x2 block of the diagonalized linear flow."""

    lam: float
    matrix: np.ndarray
    spectral_abscissa: float
    eigenvalues: tuple
    eigenvectors: np.ndarray  # columns, orthonormal

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float64))


@dataclass(frozen=True)
class DecayReport:
    omega1: float
    omega2: float
    smoothing_constant: float
    n_modes: int
    lams: np.ndarray
    abscissas: np.ndarray
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations


def _sym_eig_2x2(a, b, d):
    """Eigenvalues (ascending) and orthonormal eigenvectors of [[a,b],[b,d]]."""
    tr = a + d
    disc = math.hypot(a - d, 2.0 * b)
    ev1 = 0.5 * (tr - disc)
    ev2 = 0.5 * (tr + disc)
    if b == 0.0:
        if a <= d:
            vecs = np.eye(2)
        else:
            vecs = np.array([[0.0, 1.0], [1.0, 0.0]])
        return (min(a, d), max(a, d)), vecs
    # eigenvector for ev2, choosing the better-conditioned expression
    if abs(ev2 - a) >= abs(ev2 - d):
        v2 = np.array([b, ev2 - a])
    else:
        v2 = np.array([ev2 - d, b])
    v2 /= math.hypot(*v2)
    return (ev1, ev2), np.column_stack([np.array([-v2[1], v2[0]]), v2])


def mode_block(lam: float, params: ModelParams, R1: float | None = None) -> ModeBlock:
    """Assemble and diagonalize the 2x2 block for eigenvalue lam >= 1."""
    if lam < 1.0:
        raise SemigroupError(f"lambda must be >= 1, got {lam}")
    R1 = _resolve_R1(params, R1)
    if _gap(params, R1) <= 0.0:
        raise SemigroupError(
            f"stability gap violated: R1={R1!r} <= 2*chi_phi^2/chi_sigma="
            f"{2.0 * params.chi_phi ** 2 / params.chi_sigma!r}")
    a = -lam * lam - R1 * lam
    b = params.chi_phi * lam
    d = -params.chi_sigma * lam
    (ev1, ev2), vecs = _sym_eig_2x2(a, b, d)
    return ModeBlock(
        lam=float(lam),
        matrix=np.array([[a, b], [b, d]]),
        spectral_abscissa=ev2,
        eigenvalues=(ev1, ev2),
        eigenvectors=vecs,
    )


def evolve_mode(block: ModeBlock, z0, t: float) -> np.ndarray:
    """exp(t * matrix) @ z0 through the symmetric eigendecomposition."""
    if t < 0:
        raise SemigroupError(f"t must be nonnegative, got {t}")
    z0 = np.asarray(z0, dtype=np.float64)
    v = block.eigenvectors
    phases = np.exp(np.multiply(t, block.eigenvalues))
    return v @ (phases * (v.T @ z0))


def _propagator(block: ModeBlock, t: float) -> np.ndarray:
    v = block.eigenvectors
    phases = np.exp(np.multiply(t, block.eigenvalues))
    return (v * phases) @ v.T


def _norm2x2(m: np.ndarray) -> float:
    """Spectral norm of a 2x2 matrix via its singular values."""
    s = float((m * m).sum())
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    disc = max(s * s - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (s + math.sqrt(disc)))


def weighted_gain(block: ModeBlock, t: float) -> float:
    """Operator norm of the propagator from H1* x H1* into H1 x L2.

    Per mode the H1* weight is 1/lam on both components and the H1 x L2
    weight is (lam, 1), so the weighted propagator is
    diag(sqrt(lam), 1) exp(tB) diag(sqrt(lam), sqrt(lam)).
    """
    rl = math.sqrt(block.lam)
    m = _propagator(block, t) * np.array([[rl * rl, rl * rl], [rl, rl]])
    return _norm2x2(m)


def decay_gain(block: ModeBlock, t: float) -> float:
    """Operator norm of the propagator in the H1 x L2 weighting."""
    rl = math.sqrt(block.lam)
    m = _propagator(block, t) * np.array([[1.0, rl], [1.0 / rl, 1.0]])
    return _norm2x2(m)


def decay_constants(params: ModelParams, R1: float | None, grid: Grid,
                    t_samples=(0.01, 0.1, 1.0, 10.0), n_random: int = 100,
                    seed: int = 0) -> DecayReport:
    """Uniform decay rate and smoothing constant over the grid's modes.

    omega1 is the slowest |spectral abscissa| over all grid eigenvalues; the
    bound ``|T(t) z| <= 2 exp(-omega1 t) |z|`` (H1 x L2 weighting) is checked
    on random mode vectors at each sample time, and any violation is
    recorded as (lam, t, gain). The smoothing constant is the largest
    ``sqrt(t) exp(omega2 t) gain(t)`` with omega2 = omega1 / 2.
    """
    R1 = _resolve_R1(params, R1)
    lams = np.unique(grid.lam.ravel())
    blocks = [mode_block(lam, params, R1) for lam in lams]
    abscissas = np.array([b.spectral_abscissa for b in blocks])
    omega1 = float(-abscissas.max())
    omega2 = 0.5 * omega1

    rng = np.random.default_rng(seed)
    violations = []
    smoothing = 0.0
    for block in blocks:
        w = np.array([math.sqrt(block.lam), 1.0])
        for t in t_samples:
            propagator = _propagator(block, t)
            z = rng.standard_normal((2, n_random))
            num = np.linalg.norm(w[:, None] * (propagator @ z), axis=0)
            den = np.linalg.norm(w[:, None] * z, axis=0)
            bound = 2.0 * math.exp(-omega1 * t)
            worst = float((num / den).max())
            if worst > bound * (1.0 + 1e-12):
                violations.append((float(block.lam), float(t), worst))
            smoothing = max(smoothing,
                            math.sqrt(t) * math.exp(omega2 * t) * weighted_gain(block, t))
    return DecayReport(
        omega1=omega1, omega2=omega2, smoothing_constant=float(smoothing),
        n_modes=len(blocks), lams=lams, abscissas=abscissas,
        violations=tuple(violations))


def smoothing_profile(params: ModelParams, R1: float | None, grid: Grid,
                      t_grid) -> np.ndarray:
    """max over modes of the H1* -> H1 x L2 gain at each time in t_grid."""
    R1 = _resolve_R1(params, R1)
    lams = np.unique(grid.lam.ravel())
    blocks = [mode_block(lam, params, R1) for lam in lams]
    return np.array([max(weighted_gain(b, t) for b in blocks) for t in t_grid])


def small_time_slope(params: ModelParams, R1: float | None, grid: Grid,
                     t_lo: float = 1e-4, t_hi: float = 1e-2, n: int = 9) -> float:
    """Log-log slope of the smoothing gain at small times (expect ~ -1/2)."""
    ts = np.geomspace(t_lo, t_hi, n)
    gains = smoothing_profile(params, R1, grid, ts)
    slope, _ = np.polyfit(np.log(ts), np.log(gains), 1)
    return float(slope)
