"""Cosine-spectral fields on rectangular domains with zero-flux boundaries.

The shifted Laplacian ``A = -lap + id`` with homogeneous Neumann conditions is
diagonal in the tensor cosine basis of an axis-aligned box. Fields are sampled
at midpoint (half-integer) collocation nodes, where the discrete cosine modes
are exactly orthogonal, so transforms, ``A``, ``A^{-1}`` and all norms below
are exact up to rounding.

Conventions
-----------
* Mode coefficients are scaled so that the underlying basis functions are
  L2-normalized over the box: ``sum(coeffs**2)`` equals the discrete L2
  norm squared of the field, and coefficients of a fixed smooth function do
  not depend on the resolution.
* ``lam[k] = 1 + sum_axis (pi*k_axis/L_axis)**2`` are the eigenvalues of
  ``A`` (the zero mode has eigenvalue exactly 1); ``ell = lam - 1`` are the
  eigenvalues of ``-lap``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft


class SpectralError(ValueError):
    """Invalid grid or field construction."""


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box with midpoint collocation nodes.

    Parameters
    ----------
    dims : int
        Spatial dimension, 1, 2 or 3.
    lengths : tuple of float
        Edge lengths of the box, one per axis.
    resolution : tuple of int
        Collocation points per axis (at least 4; powers of two transform
        fastest but any size works).
    """

    dims: int
    lengths: tuple
    resolution: tuple

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise SpectralError(f"dims must be 1, 2 or 3, got {self.dims}")
        if len(self.lengths) != self.dims or len(self.resolution) != self.dims:
            raise SpectralError("lengths and resolution must have one entry per axis")
        if any(not (L > 0.0) or not math.isfinite(L) for L in self.lengths):
            raise SpectralError(f"lengths must be positive, got {self.lengths}")
        if any(int(n) != n or n < 4 for n in self.resolution):
            raise SpectralError(f"resolution must be >= 4 per axis, got {self.resolution}")
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))
        # Per-axis -lap eigenvalues (pi*k/L)^2, then the full tensor sum.
        axis_ell = [
            (np.pi * np.arange(n) / L) ** 2
            for n, L in zip(self.resolution, self.lengths)
        ]
        ell = axis_ell[0]
        for a in range(1, self.dims):
            ell = ell[..., None] + axis_ell[a]
        object.__setattr__(self, "_ell", ell)
        object.__setattr__(self, "_lam", ell + 1.0)

    @property
    def volume(self) -> float:
        v = 1.0
        for L in self.lengths:
            v *= L
        return v

    @property
    def npoints(self) -> int:
        n = 1
        for r in self.resolution:
            n *= r
        return n

    @property
    def cell_volume(self) -> float:
        return self.volume / self.npoints

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def lam(self) -> np.ndarray:
        """Eigenvalues of A = -lap + id, shaped like the mode array."""
        return self._lam

    @property
    def ell(self) -> np.ndarray:
        """Eigenvalues of -lap, shaped like the mode array."""
        return self._ell

    def axes(self):
        """Midpoint node coordinates per axis."""
        return [
            (np.arange(n) + 0.5) * (L / n)
            for n, L in zip(self.resolution, self.lengths)
        ]

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")


def build_grid(dims, lengths, resolution) -> Grid:
    """Validate inputs and build a Grid (rejects bad dims/lengths/resolution)."""
    return Grid(int(dims), tuple(lengths), tuple(resolution))


class Field:
    """A real scalar field sampled on a Grid, with a cached mode representation."""

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: Grid, values, _coeffs=None):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise SpectralError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise SpectralError("field values must be finite")
        self.grid = grid
        self.values = values
        self._coeffs = _coeffs

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = values_to_coeffs(self.grid, self.values)
        return self._coeffs

    def __repr__(self):
        return f"Field(grid={self.grid.resolution}, min={self.values.min():.4g}, max={self.values.max():.4g})"


@dataclass(frozen=True)
class ModeRep:
    """Cosine-mode coefficients of a field (L2-normalized basis)."""

    grid: Grid
    coefficients: np.ndarray

    def eigenvalue(self, k) -> float:
        """Eigenvalue of A for multi-index k."""
        return float(self.grid.lam[tuple(np.atleast_1d(k))])


@dataclass(frozen=True)
class DualNormReport:
    l2: float
    h1: float
    h1_dual: float


# -- transforms ---------------------------------------------------------------

def values_to_coeffs(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.dctn(values, type=2, norm="ortho") * math.sqrt(grid.cell_volume)


def coeffs_to_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.idctn(coeffs, type=2, norm="ortho") / math.sqrt(grid.cell_volume)


def to_modes(field: Field) -> ModeRep:
    """Forward orthonormal cosine transform."""
    return ModeRep(field.grid, field.coeffs.copy())


def from_modes(rep: ModeRep) -> Field:
    """Inverse transform; exact inverse of to_modes up to rounding."""
    vals = coeffs_to_values(rep.grid, rep.coefficients)
    return Field(rep.grid, vals, _coeffs=rep.coefficients.copy())


def field_from_coeffs(grid: Grid, coeffs: np.ndarray) -> Field:
    return Field(grid, coeffs_to_values(grid, coeffs), _coeffs=coeffs)


# -- the operator A = -lap + id ----------------------------------------------

def apply_A(field: Field) -> Field:
    """Apply A; diagonal in mode space with eigenvalues lam >= 1."""
    return field_from_coeffs(field.grid, field.grid.lam * field.coeffs)


def apply_A_inv(field: Field) -> Field:
    """Apply A^{-1} (always defined: lam >= 1)."""
    return field_from_coeffs(field.grid, field.coeffs / field.grid.lam)


def mean_value(field: Field) -> float:
    """Volume-weighted average (midpoint quadrature is the plain mean)."""
    return float(field.values.mean())


def inner(u: Field, v: Field) -> float:
    """Discrete L2 inner product over the box."""
    if u.grid is not v.grid and u.grid != v.grid:
        raise SpectralError("fields live on different grids")
    return u.grid.cell_volume * float(np.dot(u.values.ravel(), v.values.ravel()))


def norms(field: Field) -> DualNormReport:
    """L2, H1 (through A) and dual H1* norms, all as mode-space sums.

    ``h1 = sqrt(<A v, v>)`` and ``h1_dual = sqrt(<A^{-1} v, v>)``; since all
    eigenvalues are >= 1 the report always satisfies h1_dual <= l2 <= h1.
    """
    c2 = field.coeffs ** 2
    lam = field.grid.lam
    return DualNormReport(
        l2=math.sqrt(float(c2.sum())),
        h1=math.sqrt(float((lam * c2).sum())),
        h1_dual=math.sqrt(float((c2 / lam).sum())),
    )


def norms_from_coeffs(grid: Grid, coeffs: np.ndarray) -> DualNormReport:
    c2 = coeffs ** 2
    return DualNormReport(
        l2=math.sqrt(float(c2.sum())),
        h1=math.sqrt(float((grid.lam * c2).sum())),
        h1_dual=math.sqrt(float((c2 / grid.lam).sum())),
    )


def sobolev_norm(field: Field, order: float) -> float:
    """Spectral norm sqrt(sum lam^order * coeffs^2); order=3 probes H3."""
    return math.sqrt(float((field.grid.lam ** order * field.coeffs ** 2).sum()))


# -- gradients and divergence (sine route, exact on midpoint nodes) -----------

def gradient_values(grid: Grid, values: np.ndarray) -> list:
    """Per-axis derivative arrays of a cosine-represented field.

    The derivative of each cosine mode is a sine mode of the same index;
    sampled on midpoint nodes the sine modes are again orthogonal, so this is
    exact for band-limited fields.
    """
    out = []
    for a in range(grid.dims):
        n = grid.resolution[a]
        L = grid.lengths[a]
        c = sfft.dct(values, type=2, axis=a, norm="ortho")
        k = np.arange(1, n)
        factor = -(np.pi * k / L)
        shape = [1] * grid.dims
        shape[a] = n - 1
        s = np.zeros_like(c)
        sl = [slice(None)] * grid.dims
        sl_src = list(sl)
        sl[a] = slice(0, n - 1)
        sl_src[a] = slice(1, n)
        s[tuple(sl)] = c[tuple(sl_src)] * factor.reshape(shape)
        out.append(sfft.idst(s, type=2, axis=a, norm="ortho"))
    return out


def divergence_values(grid: Grid, components: list) -> np.ndarray:
    """Divergence of a vector field whose components vanish in normal flux.

    Each component is pushed through the sine basis along its own axis and
    differentiated back to cosine space; the constant cosine mode of the
    result is identically zero, so the integral of the divergence vanishes
    exactly (discrete no-flux).
    """
    div = np.zeros(grid.shape)
    for a, comp in enumerate(components):
        n = grid.resolution[a]
        L = grid.lengths[a]
        s = sfft.dst(comp, type=2, axis=a, norm="ortho")
        k = np.arange(1, n)
        factor = np.pi * k / L
        shape = [1] * grid.dims
        shape[a] = n - 1
        c = np.zeros_like(s)
        sl = [slice(None)] * grid.dims
        sl_src = list(sl)
        sl[a] = slice(1, n)
        sl_src[a] = slice(0, n - 1)
        # mode n differentiates into cos(n*pi*x/L), which vanishes at midpoints
        c[tuple(sl)] = s[tuple(sl_src)] * factor.reshape(shape)
        div += sfft.idct(c, type=2, axis=a, norm="ortho")
    return div


# -- lambda-sorted mode ordering (shared by Galerkin and mode truncation) -----

def sorted_mode_indices(grid: Grid):
    """Flat indices of all modes ordered by (eigenvalue, multi-index).

    The first entry is always the constant mode (eigenvalue exactly 1).
    """
    lam_flat = grid.lam.ravel()
    order = np.lexsort(
        tuple(reversed(np.unravel_index(np.arange(lam_flat.size), grid.shape)))
        + (lam_flat,)
    )
    return order


def truncation_mask(grid: Grid, n_modes: int) -> np.ndarray:
    """Boolean mode mask keeping the first n_modes lambda-sorted modes."""
    if n_modes < 1 or n_modes > grid.npoints:
        raise SpectralError(f"n_modes must be in [1, {grid.npoints}], got {n_modes}")
    mask = np.zeros(grid.npoints, dtype=bool)
    mask[sorted_mode_indices(grid)[:n_modes]] = True
    return mask.reshape(grid.shape)
