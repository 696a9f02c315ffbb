"""The sectioned run-configuration format.

A run is described by one INI-style text file with fixed sections; unknown
sections or keys are hard errors (with a nearest-name suggestion), every
value is validated with a field-precise message, and a parsed configuration
serializes back to text that reparses to an equal object. All randomness
derives from the single ``[initial] seed``.
"""

from __future__ import annotations

import configparser
import difflib
import io
from dataclasses import dataclass, field, fields as dc_fields

from .initial_data import GENERATORS, initial_state
from .potentials import (
    BoundedMobility,
    ConstantProliferation,
    PolynomialPotential,
    PolynomialProliferation,
    QuarticDoubleWell,
    RationalBumpProliferation,
    UnitMobility,
    truncate_potential,
)
from .solver import ModelParams, SchemeOpts
from .spectral import build_grid


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


def _suggest(name, options):
    close = difflib.get_close_matches(name, options, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


@dataclass(frozen=True)
class GridConfig:
    dims: int = 2
    lengths: tuple = (1.0, 1.0)
    resolution: tuple = (64, 64)


@dataclass(frozen=True)
class ModelConfig:
    chi_phi: float = 1.0
    chi_sigma: float = 1.0


@dataclass(frozen=True)
class PotentialConfig:
    family: str = "quartic"           # quartic | polynomial
    R1: float = 2.5
    R2: float | None = None
    cutoff: float | None = None       # quadratic-growth truncation, if set
    psi0_coeffs: tuple = ()
    lambda_coeffs: tuple = ()
    rho: float | None = None
    c1: float | None = None
    c2: float | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class ProliferationConfig:
    family: str = "constant"          # constant | rational-bump | polynomial
    mode: str = "P2"
    p0: float = 0.5
    delta: float = 0.01
    coeffs: tuple = ()


@dataclass(frozen=True)
class MobilityConfig:
    m: str = "unit"                   # unit | bounded
    n: str = "unit"
    m0: float = 1.0
    m1: float = 1.0
    n0: float = 1.0
    n1: float = 1.0


@dataclass(frozen=True)
class InitialConfig:
    generator: str = "random-uniform"
    seed: int = 0
    phi_mean: float = 0.0
    phi_amplitude: float = 0.05
    sigma_mean: float = 0.1
    sigma_amplitude: float = 0.0
    bump_radius: float | None = None
    bump_width: float | None = None
    checker_cells: int = 4
    cosine_modes: int = 1


@dataclass(frozen=True)
class TimeConfig:
    T: float = 1.0
    dt: float = 1e-3
    guard: bool = True
    guard_tol: float = 1e-10
    max_retries: int = 20
    exchange_heun: bool = True
    stabilization: float | None = None
    csv_every: int = 1
    snapshot_every: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "snapshot")


@dataclass(frozen=True)
class StationaryConfig:
    M: float = 0.0
    tol: float = 1e-9
    max_iter: int = 50_000
    bracket: tuple = (-3.0, 3.0)
    subdivisions: int = 600
    n_starts: int = 1


@dataclass(frozen=True)
class SemigroupConfig:
    t_samples: tuple = (0.01, 0.1, 1.0, 10.0)
    n_random: int = 100


@dataclass(frozen=True)
class CrossvalConfig:
    n_modes: int = 16
    dt: float = 1e-5
    rtol: float = 1e-9
    threshold: float = 1e-6
    n_checkpoints: int = 5


@dataclass(frozen=True)
class GalerkinConfig:
    n_modes: int = 16
    rtol: float = 1e-9
    record_every: int = 200


@dataclass(frozen=True)
class DependenceConfig:
    epsilon: float = 1e-3
    times: tuple = (0.1, 0.5, 1.0)
    dt: float = 1e-3


@dataclass(frozen=True)
class OmegaConfig:
    T: float = 200.0
    dt: float = 0.01
    velocity_tol: float = 1e-6
    state_every: int = 50


@dataclass(frozen=True)
class SweepConfig:
    chi_phi: tuple = (0.0, 0.5, 1.0, 1.5)
    chi_sigma: tuple = (0.5, 1.0, 2.0)
    seeds: tuple = (1, 2, 3)
    T: float = 0.5
    workers: int = 4


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    proliferation: ProliferationConfig = field(default_factory=ProliferationConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    stationary: StationaryConfig = field(default_factory=StationaryConfig)
    semigroup: SemigroupConfig = field(default_factory=SemigroupConfig)
    crossval: CrossvalConfig = field(default_factory=CrossvalConfig)
    galerkin: GalerkinConfig = field(default_factory=GalerkinConfig)
    dependence: DependenceConfig = field(default_factory=DependenceConfig)
    omega: OmegaConfig = field(default_factory=OmegaConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    # -- runtime object builders ------------------------------------------

    def build_grid(self):
        g = self.grid
        return build_grid(g.dims, g.lengths, g.resolution)

    def build_potential(self):
        p = self.potential
        if p.family == "quartic":
            spec = QuarticDoubleWell(R1=p.R1, R2=p.R2)
        else:
            kwargs = {}
            for name in ("rho", "c1", "c2", "alpha"):
                if getattr(p, name) is not None:
                    kwargs[name] = getattr(p, name)
            spec = PolynomialPotential(psi0_coeffs=p.psi0_coeffs,
                                       lam_coeffs=p.lambda_coeffs,
                                       R1=p.R1, R2=p.R2, **kwargs)
        if p.cutoff is not None:
            spec = truncate_potential(spec, p.cutoff)
        return spec

    def build_proliferation(self):
        p = self.proliferation
        if p.family == "constant":
            return ConstantProliferation(p0=p.p0, mode=p.mode)
        if p.family == "rational-bump":
            return RationalBumpProliferation(p0=p.p0, delta=p.delta, mode=p.mode)
        return PolynomialProliferation(coeffs=p.coeffs, mode=p.mode)

    def build_mobilities(self):
        m = self.mobility
        mob_m = UnitMobility() if m.m == "unit" else BoundedMobility(m.m0, m.m1)
        mob_n = UnitMobility() if m.n == "unit" else BoundedMobility(m.n0, m.n1)
        return mob_m, mob_n

    def build_params(self):
        mob_m, mob_n = self.build_mobilities()
        return ModelParams(
            chi_phi=self.model.chi_phi, chi_sigma=self.model.chi_sigma,
            psi=self.build_potential(), p=self.build_proliferation(),
            mobility_m=mob_m, mobility_n=mob_n)

    def build_initial(self, grid, seed=None):
        c = self.initial
        return initial_state(
            grid, generator=c.generator, seed=c.seed if seed is None else seed,
            phi_mean=c.phi_mean, phi_amplitude=c.phi_amplitude,
            sigma_mean=c.sigma_mean, sigma_amplitude=c.sigma_amplitude,
            bump_radius=c.bump_radius, bump_width=c.bump_width,
            checker_cells=c.checker_cells, cosine_modes=c.cosine_modes)

    def scheme_opts(self):
        t = self.time
        return SchemeOpts(guard=t.guard, guard_tol=t.guard_tol,
                          max_retries=t.max_retries, exchange_heun=t.exchange_heun,
                          stabilization=t.stabilization)


_SECTION_TYPES = {
    "grid": GridConfig,
    "model": ModelConfig,
    "potential": PotentialConfig,
    "proliferation": ProliferationConfig,
    "mobility": MobilityConfig,
    "initial": InitialConfig,
    "time": TimeConfig,
    "output": OutputConfig,
    "stationary": StationaryConfig,
    "semigroup": SemigroupConfig,
    "crossval": CrossvalConfig,
    "galerkin": GalerkinConfig,
    "dependence": DependenceConfig,
    "omega": OmegaConfig,
    "sweep": SweepConfig,
}

_BOOL_WORDS = {"on": True, "true": True, "yes": True, "1": True,
               "off": False, "false": False, "no": False, "0": False}


def _parse_value(section, key, raw, kind, sample):
    raw = raw.strip()
    where = f"[{section}] {key}"
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise ConfigError(f"{where}: expected on/off, got {raw!r}")
            return _BOOL_WORDS[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind is tuple:
            if raw == "":
                return ()
            element = type(sample[0]) if sample else float
            return tuple(element(tok) for tok in raw.split())
        if kind == "optional-float":
            return None if raw == "" else float(raw)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    raise ConfigError(f"{where}: unsupported value kind {kind}")


_OPTIONAL_FLOATS = {
    ("potential", "R2"), ("potential", "cutoff"), ("potential", "rho"),
    ("potential", "c1"), ("potential", "c2"), ("potential", "alpha"),
    ("initial", "bump_radius"), ("initial", "bump_width"),
    ("time", "stabilization"),
}


def _field_kind(section, name, default):
    if (section, name) in _OPTIONAL_FLOATS:
        return "optional-float"
    return type(default) if default is not None else "optional-float"


def _validate(cfg: RunConfig):
    g = cfg.grid
    where = "[grid]"
    if g.dims not in (1, 2, 3):
        raise ConfigError(f"{where} dims: must be 1, 2 or 3, got {g.dims}")
    if len(g.lengths) != g.dims:
        raise ConfigError(f"{where} lengths: expected {g.dims} entries, got {len(g.lengths)}")
    if len(g.resolution) != g.dims:
        raise ConfigError(f"{where} resolution: expected {g.dims} entries, got {len(g.resolution)}")
    if any(L <= 0 for L in g.lengths):
        raise ConfigError(f"{where} lengths: must be positive, got {g.lengths}")
    if any(n < 4 for n in g.resolution):
        raise ConfigError(f"{where} resolution: must be at least 4 per axis, got {g.resolution}")
    if cfg.model.chi_sigma <= 0:
        raise ConfigError("[model] chi_sigma: must be positive (the chemical "
                          "mobility is a fixed positive constant)")
    if cfg.model.chi_phi < 0:
        raise ConfigError("[model] chi_phi: must be nonnegative")
    if cfg.potential.family not in ("quartic", "polynomial"):
        raise ConfigError(f"[potential] family: unknown family {cfg.potential.family!r}"
                          f"{_suggest(cfg.potential.family, ['quartic', 'polynomial'])}")
    if cfg.potential.family == "polynomial" and not cfg.potential.psi0_coeffs:
        raise ConfigError("[potential] psi0_coeffs: required for the polynomial family")
    if cfg.proliferation.family not in ("constant", "rational-bump", "polynomial"):
        raise ConfigError(
            f"[proliferation] family: unknown family {cfg.proliferation.family!r}"
            f"{_suggest(cfg.proliferation.family, ['constant', 'rational-bump', 'polynomial'])}")
    if cfg.proliferation.mode not in ("P1", "P2"):
        raise ConfigError(f"[proliferation] mode: must be P1 or P2, got {cfg.proliferation.mode!r}")
    for label in ("m", "n"):
        fam = getattr(cfg.mobility, label)
        if fam not in ("unit", "bounded"):
            raise ConfigError(f"[mobility] {label}: unknown family {fam!r}"
                              f"{_suggest(fam, ['unit', 'bounded'])}")
    if cfg.initial.generator not in GENERATORS:
        raise ConfigError(f"[initial] generator: unknown generator {cfg.initial.generator!r}"
                          f"{_suggest(cfg.initial.generator, GENERATORS)}")
    if cfg.initial.seed < 0:
        raise ConfigError("[initial] seed: must be nonnegative")
    if cfg.time.T < 0:
        raise ConfigError("[time] T: must be nonnegative")
    if cfg.time.dt <= 0:
        raise ConfigError("[time] dt: must be positive")
    for name in ("csv_every", "snapshot_every", "max_retries"):
        if getattr(cfg.time, name) < 0:
            raise ConfigError(f"[time] {name}: must be nonnegative")
    bad = [f for f in cfg.output.formats if f not in ("csv", "snapshot", "png")]
    if bad:
        raise ConfigError(f"[output] formats: unknown format {bad[0]!r}"
                          f"{_suggest(bad[0], ['csv', 'snapshot', 'png'])}")
    if cfg.dependence.epsilon <= 0:
        raise ConfigError("[dependence] epsilon: must be positive")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a sectioned configuration text."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from None

    sections = {}
    for section in parser.sections():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown section [{section}]"
                              f"{_suggest(section, list(_SECTION_TYPES))}")
        cls = _SECTION_TYPES[section]
        prototype = cls()
        known = {f.name: getattr(prototype, f.name) for f in dc_fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"[{section}] unknown key {key!r}"
                                  f"{_suggest(key, list(known))}")
            kind = _field_kind(section, key, known[key])
            values[key] = _parse_value(section, key, raw, kind, known[key])
        sections[section] = cls(**{**{k: v for k, v in known.items()}, **values})
    return _validate(RunConfig(**sections))


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(v):
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_format_value(x) for x in v)
    if v is None:
        return ""
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    out = io.StringIO()
    for section, cls in _SECTION_TYPES.items():
        out.write(f"[{section}]\n")
        sub = getattr(cfg, section)
        for f in dc_fields(cls):
            out.write(f"{f.name} = {_format_value(getattr(sub, f.name))}\n")
        out.write("\n")
    return out.getvalue()


DEFAULT_CONFIG = RunConfig()
