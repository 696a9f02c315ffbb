"""Bulk free-energy densities, proliferation rates, mobilities and validators.

A potential is split as ``psi(s) = psi0(s) + lam(s)`` where ``psi0`` carries
the (possibly super-quadratic) convex growth and ``lam`` has bounded second
derivative. The default family is the quartic double well
``psi(s) = 0.25*(s^2-1)^2`` with the split ``psi0 = 0.25*(s^2-1)^2 + s^2``,
``lam = -s^2`` (growth exponent rho=4, convexity bracket constants c1=1,
c2=3, curvature bound alpha=2).

``truncate_potential`` replaces ``psi0`` outside ``[-m, m]`` by its
second-order Taylor polynomial at the cut, leaving ``lam`` untouched, which
produces a quadratic-growth potential agreeing with the original inside the
cut. All standing assumptions are checked numerically on a dense sample by
``validate_assumptions``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import kernels


# -- potential families --------------------------------------------------------

@dataclass(frozen=True)
class QuarticDoubleWell:
    """psi(s) = 0.25*(s^2-1)^2 with split psi0 = psi + s^2, lam = -s^2."""

    R1: float = 2.5
    R2: float | None = None
    family: str = "quartic-double-well"
    rho: float = 4.0
    c1: float = 1.0
    c2: float = 3.0
    alpha: float = 2.0

    def psi0(self, s):
        s = np.asarray(s, dtype=np.float64)
        v, d, h = kernels.quartic_psi(s)
        return v + s * s, d + 2.0 * s, h + 2.0

    def lam(self, s):
        s = np.asarray(s, dtype=np.float64)
        return -s * s, -2.0 * s, np.full_like(s, -2.0)


@dataclass(frozen=True)
class PolynomialPotential:
    """Custom polynomial split; coefficients listed lowest degree first."""

    psi0_coeffs: tuple
    lam_coeffs: tuple
    R1: float
    R2: float | None = None
    family: str = "custom-polynomial"
    rho: float | None = None
    c1: float | None = None
    c2: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "psi0_coeffs", tuple(float(c) for c in self.psi0_coeffs))
        object.__setattr__(self, "lam_coeffs", tuple(float(c) for c in self.lam_coeffs))
        if self.rho is None:
            object.__setattr__(self, "rho", float(max(2, len(self.psi0_coeffs) - 1)))

    def psi0(self, s):
        return kernels.poly_eval3(np.asarray(self.psi0_coeffs), s)

    def lam(self, s):
        return kernels.poly_eval3(np.asarray(self.lam_coeffs), s)


@dataclass(frozen=True)
class TruncatedPotential:
    """Quadratic-growth truncation of a base potential at cutoff m > 1.

    Inside [-m, m] identical to the base; outside, psi0 continues as its
    second-order Taylor polynomial at the cut. lam is inherited unchanged,
    so pointwise convergence to the base holds as m grows.
    """

    base: object
    cutoff: float
    family: str = "truncated"
    rho: float = 2.0

    def __post_init__(self):
        if not self.cutoff > 1.0:
            raise ValueError(f"truncation cutoff must be > 1, got {self.cutoff}")
        if getattr(self.base, "rho", 2.0) <= 2.0:
            raise ValueError("truncation requires a base with super-quadratic growth (rho > 2)")
        # Convexity bracket for rho=2: psi0'' is constant outside the cut, so a
        # sample over [-m-1, m+1] sees its full range.
        s = np.linspace(-self.cutoff - 1.0, self.cutoff + 1.0, 2001)
        dd = self.psi0(s)[2]
        object.__setattr__(self, "c1", float(dd.min() / 2.0))
        object.__setattr__(self, "c2", float(dd.max() / 2.0))
        object.__setattr__(self, "alpha", getattr(self.base, "alpha", None))

    @property
    def R1(self):
        return self.base.R1

    @property
    def R2(self):
        return self.base.R2

    def psi0(self, s):
        s = np.asarray(s, dtype=np.float64)
        m = self.cutoff
        v, d, h = self.base.psi0(np.clip(s, -m, m))
        edge = np.clip(s, -m, m)
        dx = s - edge
        out = np.abs(s) > m
        v = np.where(out, v + d * dx + 0.5 * h * dx * dx, v)
        d = np.where(out, d + h * dx, d)
        # h: already the edge value outside (constant continuation)
        return v, d, h

    def lam(self, s):
        return self.base.lam(s)


def psi_eval(spec, s):
    """psi, psi', psi'' at s, always assembled as psi0 + lam.

    Accepts scalars or arrays; returns matching shapes.
    """
    scalar = np.isscalar(s)
    v0, d0, h0 = spec.psi0(s)
    vl, dl, hl = spec.lam(s)
    v, d, h = v0 + vl, d0 + dl, h0 + hl
    if scalar:
        return float(v), float(d), float(h)
    return v, d, h


def truncate_potential(spec, m: float) -> TruncatedPotential:
    """Quadratic-growth truncation of spec at cutoff m (requires m > 1)."""
    return TruncatedPotential(base=spec, cutoff=float(m))


def minimal_R2(spec, R1: float, search_limit: float = 50.0) -> float:
    """Smallest R2 with psi(s) >= R1*s^2 - R2, by minimizing psi(s) - R1*s^2."""

    def f(s):
        v = psi_eval(spec, float(s))[0]
        return v - R1 * s * s

    s = np.linspace(-search_limit, search_limit, 4001)
    vals = psi_eval(spec, s)[0] - R1 * s * s
    i = int(np.argmin(vals))
    lo = s[max(i - 1, 0)]
    hi = s[min(i + 1, len(s) - 1)]
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return float(-min(res.fun, vals[i]))


# -- proliferation families ----------------------------------------------------

@dataclass(frozen=True)
class ConstantProliferation:
    """p(s) = p0 (p0 > 0 for P2 mode; p0 = 0 expresses switched-off exchange)."""

    p0: float = 0.5
    mode: str = "P2"
    family: str = "constant"
    q: float = 1.0

    def __post_init__(self):
        if self.p0 < 0:
            raise ValueError("p0 must be nonnegative")
        if self.mode not in ("P1", "P2"):
            raise ValueError(f"mode must be P1 or P2, got {self.mode}")

    def eval(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.full_like(s, self.p0), np.zeros_like(s)


@dataclass(frozen=True)
class RationalBumpProliferation:
    """p(s) = delta + p0 / (1 + s^2); strictly positive, bounded, q = 1."""

    p0: float = 1.0
    delta: float = 0.01
    mode: str = "P2"
    family: str = "rational-bump"
    q: float = 1.0

    def eval(self, s):
        s = np.asarray(s, dtype=np.float64)
        den = 1.0 + s * s
        return self.delta + self.p0 / den, -2.0 * self.p0 * s / (den * den)


@dataclass(frozen=True)
class PolynomialProliferation:
    """p(s) = max(poly(s), 0); derivative is zero wherever the clip binds."""

    coeffs: tuple
    mode: str = "P1"
    family: str = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def q(self):
        return float(max(1, len(self.coeffs) - 1))

    def eval(self, s):
        v, d, _ = kernels.poly_eval3(np.asarray(self.coeffs), s)
        pos = v > 0.0
        return np.where(pos, v, 0.0), np.where(pos, d, 0.0)


def p_eval(spec, s):
    """Proliferation value and derivative; scalar in, scalar out."""
    scalar = np.isscalar(s)
    v, d = spec.eval(s)
    if scalar:
        return float(v), float(d)
    return v, d


# -- mobilities ------------------------------------------------------------

@dataclass(frozen=True)
class UnitMobility:
    family: str = "unit"
    lower: float = 1.0
    upper: float = 1.0

    def eval(self, s):
        return np.ones_like(np.asarray(s, dtype=np.float64))


@dataclass(frozen=True)
class BoundedMobility:
    """m(s) = m0 + (m1 - m0)/(1 + s^2), pinched between m0 and m1."""

    m0: float
    m1: float
    family: str = "bounded"

    def __post_init__(self):
        if not (0.0 < self.m0 <= self.m1):
            raise ValueError(f"need 0 < m0 <= m1, got ({self.m0}, {self.m1})")

    @property
    def lower(self):
        return self.m0

    @property
    def upper(self):
        return self.m1

    def eval(self, s):
        s = np.asarray(s, dtype=np.float64)
        return self.m0 + (self.m1 - self.m0) / (1.0 + s * s)


def mobility_eval(spec, s):
    scalar = np.isscalar(s)
    v = spec.eval(s)
    return float(v) if scalar else v


def is_unit(spec) -> bool:
    return getattr(spec, "family", None) == "unit"


# -- assumption validation ------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple
    minimal_R2: float
    chemotaxis_gap: float
    sample_limit: float
    seed: int
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", all(c.passed for c in self.checks))

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = [f"assumptions: {'ok' if self.passed else 'VIOLATED'}"]
        for c in self.checks:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        lines.append(f"  minimal_R2={self.minimal_R2!r} chemotaxis_gap={self.chemotaxis_gap!r}")
        return "\n".join(lines)


def validate_assumptions(params, psi_spec=None, p_spec=None, mobilities=None,
                         sample_limit: float = 10.0, n_samples: int = 4001,
                         seed: int = 0) -> AssumptionReport:
    """Check every standing structural assumption on a dense sample.

    ``params`` is anything exposing chi_phi and chi_sigma (e.g. ModelParams,
    in which case the specs are taken from it unless given explicitly).
    The report never raises; failures are collected as structured checks.
    """
    chi_phi = float(params.chi_phi)
    chi_sigma = float(params.chi_sigma)
    psi_spec = psi_spec if psi_spec is not None else params.psi
    p_spec = p_spec if p_spec is not None else params.p
    if mobilities is None:
        mobilities = (params.mobility_m, params.mobility_n)

    rng = np.random.default_rng(seed)
    s = np.concatenate([
        np.linspace(-sample_limit, sample_limit, n_samples),
        rng.uniform(-sample_limit, sample_limit, size=256),
    ])
    checks = []

    if chi_sigma <= 0:
        checks.append(AssumptionCheck(
            "chi-sigma-positive", False,
            f"chi_sigma must be positive, got {chi_sigma!r}"))
        gap = float("nan")
    else:
        checks.append(AssumptionCheck("chi-sigma-positive", True, f"chi_sigma={chi_sigma!r}"))
        gap = psi_spec.R1 - 2.0 * chi_phi ** 2 / chi_sigma
        checks.append(AssumptionCheck(
            "chemotaxis-gap", gap > 0,
            f"R1 - 2*chi_phi^2/chi_sigma = {gap!r} (must be > 0)"))
    checks.append(AssumptionCheck(
        "chi-phi-nonnegative", chi_phi >= 0, f"chi_phi={chi_phi!r}"))

    # potential split consistency
    v, _, _ = psi_eval(psi_spec, s)
    v0 = psi_spec.psi0(s)[0]
    vl = psi_spec.lam(s)[0]
    split_err = float(np.max(np.abs(v - (v0 + vl)) / (1.0 + np.abs(v))))
    checks.append(AssumptionCheck(
        "psi-split", split_err <= 1e-12, f"max split defect {split_err:.3e}"))

    # convexity bracket on psi0''
    rho = getattr(psi_spec, "rho", None)
    c1 = getattr(psi_spec, "c1", None)
    c2 = getattr(psi_spec, "c2", None)
    if rho is not None and c1 is not None and c2 is not None:
        envelope = 1.0 + np.abs(s) ** (rho - 2.0)
        dd0 = psi_spec.psi0(s)[2]
        lo_ok = np.all(dd0 >= c1 * envelope - 1e-9 * envelope)
        hi_ok = np.all(dd0 <= c2 * envelope + 1e-9 * envelope)
        checks.append(AssumptionCheck(
            "psi0-convexity-bracket", bool(lo_ok and hi_ok),
            f"rho={rho!r} c1={c1!r} c2={c2!r}"))
    else:
        checks.append(AssumptionCheck(
            "psi0-convexity-bracket", False, "rho/c1/c2 not declared on spec"))

    # bounded curvature of the concave part
    alpha = getattr(psi_spec, "alpha", None)
    ddl = np.abs(psi_spec.lam(s)[2])
    if alpha is not None:
        checks.append(AssumptionCheck(
            "lambda-curvature", bool(np.all(ddl <= alpha + 1e-9)),
            f"max |lam''| = {float(ddl.max())!r} vs alpha={alpha!r}"))
    else:
        checks.append(AssumptionCheck(
            "lambda-curvature", False, "alpha not declared on spec"))

    # quadratic coercivity: smallest admissible R2 for the requested R1
    r2_min = minimal_R2(psi_spec, psi_spec.R1)
    r2 = psi_spec.R2
    if r2 is None:
        checks.append(AssumptionCheck(
            "coercivity", True, f"R2 unset; minimal admissible R2 = {r2_min!r}"))
    else:
        checks.append(AssumptionCheck(
            "coercivity", r2 >= r2_min - 1e-9,
            f"R2={r2!r} vs minimal {r2_min!r}"))

    # proliferation growth / regularity
    pv, pd = p_eval(p_spec, s)
    q = p_spec.q
    nonneg = bool(np.all(pv >= 0.0))
    checks.append(AssumptionCheck(
        "proliferation-nonnegative", nonneg, f"min p = {float(pv.min())!r}"))
    c3 = float(np.max(pv / (1.0 + np.abs(s) ** q)))
    if p_spec.mode == "P1":
        checks.append(AssumptionCheck(
            "proliferation-growth-q", 1.0 <= q < 9.0,
            f"P1 requires q in [1, 9), got {q!r}; growth witness c3={c3!r}"))
    else:
        pos = bool(np.all(pv > 0.0))
        checks.append(AssumptionCheck(
            "proliferation-positive", pos, f"min p = {float(pv.min())!r} (P2 needs p > 0)"))
        c4 = float(np.max(np.abs(pd) / (1.0 + np.abs(s) ** (q - 1.0))))
        checks.append(AssumptionCheck(
            "proliferation-growth-q", 1.0 <= q <= 4.0,
            f"P2 requires q in [1, 4], got {q!r}; derivative witness c4={c4!r}"))

    # mobility bounds
    for label, mob in zip(("m", "n"), mobilities):
        mv = mobility_eval(mob, s)
        if is_unit(mob):
            ok = bool(np.all(mv == 1.0))
            checks.append(AssumptionCheck(f"mobility-{label}", ok, "unit mobility"))
        else:
            ok = bool(np.all((mv >= mob.lower - 1e-12) & (mv <= mob.upper + 1e-12)))
            checks.append(AssumptionCheck(
                f"mobility-{label}", ok,
                f"range [{float(mv.min())!r}, {float(mv.max())!r}] vs "
                f"[{mob.lower!r}, {mob.upper!r}]"))

    return AssumptionReport(tuple(checks), r2_min, gap, sample_limit, seed)


def with_minimal_R2(spec):
    """Copy of the potential spec with R2 pinned to the minimal admissible value."""
    if spec.R2 is not None:
        return spec
    return replace(spec, R2=minimal_R2(spec, spec.R1))
