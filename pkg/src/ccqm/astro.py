"""Exact astrophysical constraint calculators, SI units throughout.

Starlight pipeline: a photon emitted by a distant star occupies a
spherical shell of thickness t.  The first collapse fires when the shell
volume 4*pi*r^2*t reaches the critical volume V_c, each later collapse
halves the occupied solid angle, and every halving delivers a transverse
momentum kick h/(4*pi*r_c).  Telescope angular resolution then bounds the
number of collapses n and from it r_c and V_c.

CMB pipeline: each collapse raises a photon's frequency by
c/(4*pi*r_c), which distorts the Planck photon number density like a
temperature drop delta = lambda/(4*pi*r_c) * B(u) with the dimensionless
bracket B(u) = 1 - 2(e^u - 1)/(u e^u) and u = h*nu/(k_B*T).  Bounding
|delta| at a reference wavelength constrains V_c; the fixed-cell and
variable-cell models give distinct spectral signatures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError
from .units import BOLTZMANN_CONSTANT, LIGHT_YEAR, PLANCK_CONSTANT, SPEED_OF_LIGHT


@dataclass(frozen=True)
class AbsoluteThickness:
    meters: float


@dataclass(frozen=True)
class ProportionalThickness:
    """Shell thickness as a multiple of the photon wavelength."""

    ratio: float


@dataclass(frozen=True)
class PhotonShellModel:
    """Geometry of a single emitted photon's shell wavefunction.

    The collapse fraction is pinned at one half: each collapse halves the
    occupied solid angle.
    """

    distance_m: float
    wavelength_m: float
    thickness: AbsoluteThickness | ProportionalThickness
    critical_volume_m3: float | None = None
    collapse_fraction: float = field(default=0.5, init=False)

    def __post_init__(self):
        if not self.distance_m > 0 or not self.wavelength_m > 0:
            raise ConfigError("distance and wavelength must be positive")

    @property
    def thickness_m(self) -> float:
        if isinstance(self.thickness, AbsoluteThickness):
            return self.thickness.meters
        return self.thickness.ratio * self.wavelength_m


def first_collapse_radius(critical_volume: float, thickness: float) -> float:
    """Radius where the shell volume 4*pi*r^2*t first equals V_c."""
    if critical_volume <= 0 or thickness <= 0:
        raise ConfigError("critical volume and thickness must be positive")
    return math.sqrt(critical_volume / (4.0 * math.pi * thickness))


def min_critical_volume_starlight(r_c: float, thickness: float) -> float:
    """V_c = 4*pi*r_c^2*t — inverse of first_collapse_radius."""
    if r_c <= 0 or thickness <= 0:
        raise ConfigError("radius and thickness must be positive")
    return 4.0 * math.pi * r_c**2 * thickness


def angular_deviation(n: int, wavelength: float, r_c: float) -> float:
    """Accumulated deflection of n collapses: (n-1)*lambda/(4*pi*r_c)."""
    if n < 2:
        raise ConfigError("deviation needs at least two collapses")
    return (n - 1) * wavelength / (4.0 * math.pi * r_c)


def momentum_kick(r_c: float) -> float:
    """Per-collapse transverse momentum kick h/(4*pi*r_c) from the uncertainty bound."""
    if r_c <= 0:
        raise ConfigError("radius must be positive")
    return PLANCK_CONSTANT / (4.0 * math.pi * r_c)


def max_collapse_count(distance: float, resolution: float, wavelength: float) -> int:
    """Largest collapse count n compatible with the angular resolution.

    Solves log10(n-1) + ((n-5)/2) log10(2) <= log10(pi*d*dphi/lambda) by
    integer scan.  Returns 1 when even two collapses would over-deflect
    (no deflecting collapse permitted).
    """
    if distance <= 0 or resolution <= 0 or wavelength <= 0:
        raise ConfigError("distance, resolution and wavelength must be positive")
    rhs = math.log10(math.pi * distance * resolution / wavelength)

    def lhs(n: int) -> float:
        return math.log10(n - 1) + 0.5 * (n - 5) * math.log10(2.0)

    if lhs(2) > rhs:
        return 1
    n = 2
    while lhs(n + 1) <= rhs:
        n += 1
    return n


def min_radius_from_resolution(distance: float, n: int) -> float:
    """r_c = d * 2^((1-n)/2): shell radius growth sqrt(2) per collapse, inverted."""
    if n < 1:
        raise ConfigError("need at least one collapse")
    return distance * 2.0 ** ((1 - n) / 2.0)


def planck_number_density(nu, temperature: float):
    """Photon number density per unit frequency: (8*pi*nu^2/c^3)/(e^u - 1)."""
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(nu <= 0):
        raise ConfigError("frequencies must be positive")
    u = PLANCK_CONSTANT * nu / (BOLTZMANN_CONSTANT * temperature)
    out = (8.0 * math.pi * nu**2 / SPEED_OF_LIGHT**3) / np.expm1(u)
    return out if out.ndim else float(out)


def temperature_shift_factor(u):
    """Bracket B(u) = 1 - 2(e^u - 1)/(u e^u) converting a kick into a temperature shift.

    Tends to -1 as u -> 0+ and to +1 as u -> infinity, with a single
    positive root (which coincides with the number-density peak).
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u <= 0):
        raise ConfigError("u must be positive")
    # (e^u - 1)/(u e^u) = (1 - e^-u)/u, safe against overflow at large u.
    out = 1.0 + 2.0 * np.expm1(-u) / u
    return out if out.ndim else float(out)


def bracket_root_u() -> float:
    """Positive root of the bracket, u ~ 1.5936; also the number-density peak."""
    return float(brentq(temperature_shift_factor, 0.5, 5.0, xtol=1e-12))


def number_density_peak_u() -> float:
    """u maximizing u^2/(e^u - 1); identical to the bracket root."""
    return bracket_root_u()


def energy_density_peak_u() -> float:
    """u maximizing u^3/(e^u - 1), u ~ 2.8214 (the conventional 2.82)."""
    return float(brentq(lambda u: 3.0 * np.expm1(u) - u * math.exp(u), 1.0, 10.0, xtol=1e-12))


def collapse_frequency_shift(r_c: float) -> float:
    """Per-collapse frequency increase Delta nu = c/(4*pi*r_c)."""
    if r_c <= 0:
        raise ConfigError("radius must be positive")
    return SPEED_OF_LIGHT / (4.0 * math.pi * r_c)


def temperature_fluctuation(wavelength: float, r_c: float, u: float) -> float:
    """Effective temperature fluctuation of one collapse: lambda/(4*pi*r_c) * B(u)."""
    if wavelength <= 0 or r_c <= 0:
        raise ConfigError("wavelength and radius must be positive")
    return wavelength / (4.0 * math.pi * r_c) * temperature_shift_factor(u)


def min_radius_cmb(delta_limit: float, wavelength: float, u: float) -> float:
    """Invert the fluctuation bound: r_c = lambda/(4*pi*delta) * |B(u)|."""
    if delta_limit <= 0:
        raise ConfigError("delta limit must be positive")
    return wavelength / (4.0 * math.pi * delta_limit) * abs(temperature_shift_factor(u))


def min_critical_volume_cmb(
    delta_limit: float, wavelength: float, u: float, thickness_ratio: float
) -> float:
    """V_c = 4*pi*r_c^2 * t_ratio * lambda with r_c from the fluctuation bound."""
    r_c = min_radius_cmb(delta_limit, wavelength, u)
    return 4.0 * math.pi * r_c**2 * thickness_ratio * wavelength


def cell_constant_from_volume(critical_volume: float, wavelength: float) -> float:
    """Dimensionless a_ratio^3 * v_c = V_c / lambda^3 of the variable-cell model."""
    return critical_volume / wavelength**3


def variable_cell_k(thickness_ratio: float, cell_constant: float) -> float:
    """Epoch-independent fluctuation scale k = sqrt(t_ratio/(4*pi*a^3*v_c))."""
    if cell_constant <= 0:
        raise ConfigError("cell constant must be positive")
    return math.sqrt(thickness_ratio / (4.0 * math.pi * cell_constant))


def redshift_coefficient(wavelength: float, thickness_ratio: float, u: float) -> float:
    """Prefactor of delta(z) = coeff / sqrt(V_c (z+1)^3): (lambda^1.5/4pi) sqrt(4pi t) B(u)."""
    return (
        wavelength**1.5
        / (4.0 * math.pi)
        * math.sqrt(4.0 * math.pi * thickness_ratio)
        * temperature_shift_factor(u)
    )


def redshift_delta(z: int, critical_volume: float, coefficient: float) -> float:
    """Per-epoch fluctuation delta(z) = coeff * sqrt(1/(V_c (z+1)^3))."""
    if z < 0:
        raise ConfigError("redshift must be >= 0")
    return coefficient * math.sqrt(1.0 / (critical_volume * (z + 1) ** 3))


def redshift_volume_bound(redshifts, delta_limit: float, coefficient: float) -> float:
    """Summed epoch bound V_c > (coeff/delta)^2 * sum_z (z+1)^-3.

    The single-epoch z=0 case reduces to the plain CMB volume bound; terms
    fall off as (z+1)^-3, so early epochs contribute negligibly.
    """
    redshifts = list(redshifts)
    if not redshifts:
        raise ConfigError("need at least one collapse epoch")
    if any(z < 0 for z in redshifts):
        raise ConfigError("redshifts must be >= 0")
    if delta_limit <= 0:
        raise ConfigError("delta limit must be positive")
    return (coefficient / delta_limit) ** 2 * sum((z + 1) ** -3 for z in redshifts)


def teleportation_volume(divergence: float, path_length_1: float, path_length_2: float) -> float:
    """Volume of a two-photon pair sent down two beams, as two cones.

    ``divergence`` is the full apex angle, so each cone has base radius
    (divergence/2)*L and volume (pi/3)*((divergence/2)*L)^2*L.
    """
    if divergence < 0 or path_length_1 < 0 or path_length_2 < 0:
        raise ConfigError("divergence and path lengths cannot be negative")

    def cone(length: float) -> float:
        return math.pi / 3.0 * (0.5 * divergence * length) ** 2 * length

    return cone(path_length_1) + cone(path_length_2)


@dataclass(frozen=True)
class CMBModel:
    """Inputs of the CMB distortion pipeline with derived quantities."""

    temperature_K: float = 2.725
    delta_limit: float = 1e-5
    reference_u: float = 0.282
    reference_wavelength_m: float = 0.019
    thickness_ratio: float = 3e7
    redshifts: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.temperature_K <= 0:
            raise ConfigError("temperature must be positive")
        if not 0 < self.delta_limit < 1:
            raise ConfigError("delta limit must lie in (0, 1)")
        if self.reference_u <= 0:
            raise ConfigError("reference u must be positive")
        if self.reference_wavelength_m <= 0 or self.thickness_ratio <= 0:
            raise ConfigError("wavelength and thickness ratio must be positive")
        if any(z < 0 for z in self.redshifts):
            raise ConfigError("redshifts must be >= 0")

    @property
    def min_radius_m(self) -> float:
        return min_radius_cmb(self.delta_limit, self.reference_wavelength_m, self.reference_u)

    @property
    def critical_volume_m3(self) -> float:
        return min_critical_volume_cmb(
            self.delta_limit, self.reference_wavelength_m, self.reference_u, self.thickness_ratio
        )

    @property
    def cell_constant(self) -> float:
        return cell_constant_from_volume(self.critical_volume_m3, self.reference_wavelength_m)

    @property
    def k_variable(self) -> float:
        return variable_cell_k(self.thickness_ratio, self.cell_constant)

    def frequency_of_u(self, u) -> np.ndarray:
        return np.asarray(u) * BOLTZMANN_CONSTANT * self.temperature_K / PLANCK_CONSTANT


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Planck and collapse-perturbed photon number densities on a frequency grid."""

    nu_hz: np.ndarray
    u: np.ndarray
    n_planck: np.ndarray
    n_fixed: np.ndarray
    n_variable: np.ndarray
    magnification: float = 1.0

    def __post_init__(self):
        if np.any(np.diff(self.nu_hz) <= 0):
            raise ConfigError("spectrum frequencies must be strictly increasing")
        if np.any(self.n_planck <= 0):
            raise ConfigError("Planck density must be positive on the grid")


def perturbed_spectrum(
    model: CMBModel,
    nu_hz,
    *,
    critical_volume_m3: float | None = None,
    k_variable: float | None = None,
    magnification: float = 1.0,
) -> SpectrumTable:
    """Planck spectrum plus fixed-cell and variable-cell perturbed spectra.

    Both perturbations apply N~(nu) = N(nu) * (1 - u*delta*e^u/(e^u - 1)).
    Fixed cell: delta(nu) = lambda/(4*pi*r_c(lambda)) * B(u) with
    r_c(lambda) = sqrt(V_c/(4*pi*t_ratio*lambda)) — wavelength-dependent.
    Variable cell: delta = k * B(u), independent of epoch and frequency
    scale.  Passing V_c = inf or k = 0 reproduces the Planck law exactly.
    """
    nu = np.asarray(nu_hz, dtype=np.float64)
    v_c = model.critical_volume_m3 if critical_volume_m3 is None else critical_volume_m3
    k_var = model.k_variable if k_variable is None else k_variable
    u = PLANCK_CONSTANT * nu / (BOLTZMANN_CONSTANT * model.temperature_K)
    n0 = planck_number_density(nu, model.temperature_K)
    bracket = temperature_shift_factor(u)
    response = u * np.exp(u) / np.expm1(u)  # converts delta into a relative density change

    wavelength = SPEED_OF_LIGHT / nu
    if math.isinf(v_c):
        delta_fixed = np.zeros_like(u)
    else:
        r_c = np.sqrt(v_c / (4.0 * math.pi * model.thickness_ratio * wavelength))
        delta_fixed = wavelength / (4.0 * math.pi * r_c) * bracket
    delta_variable = k_var * bracket

    n_fixed = n0 * (1.0 - delta_fixed * response)
    n_variable = n0 * (1.0 - delta_variable * response)
    return SpectrumTable(
        nu_hz=nu,
        u=u,
        n_planck=n0,
        n_fixed=n_fixed,
        n_variable=n_variable,
        magnification=magnification,
    )


@dataclass
class ConstraintReport:
    """Named scalar results with units and the formula that produced them."""

    inputs: dict
    results: dict = field(default_factory=dict)

    def add(self, name: str, value, unit: str, formula: str) -> None:
        self.results[name] = {"value": value, "unit": unit, "formula": formula}

    def value(self, name: str):
        return self.results[name]["value"]

    def to_json_dict(self) -> dict:
        return {"inputs": self.inputs, "results": self.results}
