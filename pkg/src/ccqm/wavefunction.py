"""Discrete-valued wavefunctions on configuration-space grids.

A state of N particles, each living in d spatial dimensions, is a complex
array over the (N*d)-dimensional cell grid.  Particle k contributes axes
[k*d, k*d + d) and a cell length a_k, so one configuration-space cell has
measure prod_k a_k^d.  The discrete norm is

    ||psi||^2 = sum_cells |psi|^2 * prod_k a_k^d = 1.

Amplitudes are either free ("continuous", mid-evolution) or quantized:
every magnitude an integer multiple of the base magnitude f0 and every
phase an integer multiple of the base angle theta0 = 2*pi/M.  Quantized
states keep the integer record (magnitude_steps, phase_steps) together
with one scalar ``amp_scale`` that restores exact unit norm — rounding and
normalization cannot both hold exactly, so the integers carry the
quantized values and the scalar carries the norm.

The support of a quantized state (cells with magnitude_steps >= 1) is
finite; its cell count is the state's relative volume, the complexity
measure that drives the collapse dynamics.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, PauliExclusionError, VanishingWavefunctionError


class Statistics(enum.Enum):
    BOSON = "boson"
    FERMION = "fermion"
    DISTINGUISHABLE = "distinguishable"


@dataclass(frozen=True)
class ParticleMeta:
    """Identity and scale data for one particle."""

    mass: float
    species_id: str
    statistics: Statistics = Statistics.DISTINGUISHABLE
    mean_de_broglie_wavelength: float | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"particle mass must be positive, got {self.mass}")
        if self.mean_de_broglie_wavelength is not None and not self.mean_de_broglie_wavelength > 0:
            raise ConfigError("mean de Broglie wavelength must be positive when given")


@dataclass(frozen=True)
class FixedCell:
    """Fixed configuration-space cell length, the same for every particle."""

    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError(f"cell length must be positive, got {self.length}")


@dataclass(frozen=True)
class VariableCell:
    """Cell length proportional to each particle's mean de Broglie wavelength."""

    wavelength_ratio: float

    def __post_init__(self):
        if not self.wavelength_ratio > 0:
            raise ConfigError(f"wavelength ratio must be positive, got {self.wavelength_ratio}")


@dataclass(frozen=True)
class QuantizationParams:
    """Base magnitude f0, base phase theta0 = 2*pi/M, and cell geometry.

    ``quantize_during_evolution`` selects the strict mode in which the
    propagator re-quantizes after every step; the default quantizes only at
    events (collapse, merge, split) and on demand.  Per-step thresholding
    fragments spreading states, which is exactly why the mode exists: both
    behaviors must be observable.
    """

    base_magnitude: float
    base_phase: float
    cell_mode: FixedCell | VariableCell = field(default_factory=lambda: FixedCell(1.0))
    quantize_during_evolution: bool = False

    def __post_init__(self):
        if not self.base_magnitude > 0:
            raise ConfigError(f"base magnitude must be positive, got {self.base_magnitude}")
        if not self.base_phase > 0:
            raise ConfigError(f"base phase must be positive, got {self.base_phase}")
        m = 2.0 * math.pi / self.base_phase
        if abs(m - round(m)) > 1e-9 * m or round(m) < 4:
            raise ConfigError(
                "base phase must equal 2*pi/M for an integer M >= 4 so that "
                f"phase arithmetic closes under wrap-around; got {self.base_phase}"
            )

    @classmethod
    def with_phase_steps(cls, base_magnitude, phase_steps=256, **kwargs):
        """Construct with theta0 = 2*pi/phase_steps."""
        return cls(base_magnitude, 2.0 * math.pi / phase_steps, **kwargs)

    @property
    def phase_step_count(self) -> int:
        return int(round(2.0 * math.pi / self.base_phase))

    def cell_length_for(self, particle: ParticleMeta) -> float:
        if isinstance(self.cell_mode, FixedCell):
            return self.cell_mode.length
        if particle.mean_de_broglie_wavelength is None:
            raise ConfigError(
                f"variable cell mode needs a mean de Broglie wavelength for species "
                f"{particle.species_id!r}"
            )
        return self.cell_mode.wavelength_ratio * particle.mean_de_broglie_wavelength


@dataclass(frozen=True, eq=False)
class DiscreteWavefunction:
    """Immutable N-particle state on a configuration-space grid.

    ``amplitudes`` always holds the physical (normalized) complex values.
    When quantized, ``magnitude_steps`` / ``phase_steps`` hold the integer
    record and ``amplitudes == amp_scale * steps * f0 * exp(i*theta0*phase)``.
    Operations return new values; instances are safe to share across threads.
    """

    particles: tuple[ParticleMeta, ...]
    spatial_dims: int
    amplitudes: np.ndarray
    quant: QuantizationParams
    cell_lengths: tuple[float, ...]
    magnitude_steps: np.ndarray | None = None
    phase_steps: np.ndarray | None = None
    amp_scale: float = 1.0

    def __post_init__(self):
        n_axes = len(self.particles) * self.spatial_dims
        if self.spatial_dims not in (1, 2, 3):
            raise ConfigError(f"spatial_dims must be 1, 2 or 3, got {self.spatial_dims}")
        if self.amplitudes.ndim != n_axes:
            raise ConfigError(
                f"amplitude array has {self.amplitudes.ndim} axes, expected "
                f"{n_axes} for {len(self.particles)} particles in {self.spatial_dims}D"
            )
        if len(self.cell_lengths) != len(self.particles):
            raise ConfigError("need one cell length per particle")
        if any(not (a > 0) for a in self.cell_lengths):
            raise ConfigError("cell lengths must be positive")
        by_species: dict[str, Statistics] = {}
        for p in self.particles:
            prev = by_species.setdefault(p.species_id, p.statistics)
            if prev is not p.statistics:
                raise ConfigError(
                    f"particles with species {p.species_id!r} carry conflicting statistics"
                )

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    @property
    def grid_extents(self) -> tuple[int, ...]:
        return self.amplitudes.shape

    @property
    def quantized(self) -> bool:
        return self.magnitude_steps is not None

    @property
    def cell_measure(self) -> float:
        d = self.spatial_dims
        m = 1.0
        for a in self.cell_lengths:
            m *= a**d
        return m

    def particle_axes(self, k: int) -> tuple[int, ...]:
        d = self.spatial_dims
        return tuple(range(k * d, (k + 1) * d))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one grid axis, origin at grid center."""
        n = self.amplitudes.shape[axis]
        a = self.cell_lengths[axis // self.spatial_dims]
        return (np.arange(n) - (n - 1) / 2.0) * a


def _norm(amplitudes: np.ndarray, measure: float) -> float:
    return math.sqrt(float(np.sum(np.abs(amplitudes) ** 2)) * measure)


def discrete_norm(psi: DiscreteWavefunction) -> float:
    """sqrt( sum |psi|^2 * cell measure )."""
    return _norm(psi.amplitudes, psi.cell_measure)


def from_array(
    raw: np.ndarray,
    particles,
    spatial_dims: int,
    quant: QuantizationParams,
    renormalize: bool = True,
) -> DiscreteWavefunction:
    """Build a continuous-amplitude state from a raw complex array."""
    arr = np.asarray(raw, dtype=np.complex128)
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ConfigError("raw amplitudes must be finite")
    particles = tuple(particles)
    cell_lengths = tuple(quant.cell_length_for(p) for p in particles)
    psi = DiscreteWavefunction(
        particles=particles,
        spatial_dims=spatial_dims,
        amplitudes=arr,
        quant=quant,
        cell_lengths=cell_lengths,
    )
    return normalize(psi) if renormalize else psi


def normalize(psi: DiscreteWavefunction) -> DiscreteWavefunction:
    """Rescale to unit discrete norm; support and phases are untouched."""
    n = discrete_norm(psi)
    if n == 0.0 or not math.isfinite(n):
        raise VanishingWavefunctionError("cannot normalize a zero wavefunction")
    if psi.quantized:
        return replace(psi, amplitudes=psi.amplitudes / n, amp_scale=psi.amp_scale / n)
    return replace(psi, amplitudes=psi.amplitudes / n)


def quantize(psi: DiscreteWavefunction, quant: QuantizationParams | None = None) -> DiscreteWavefunction:
    """Round to the discrete value lattice, then renormalize.

    Magnitudes go to the nearest integer multiple of f0 with ties rounding
    up; cells rounding to zero leave the support exactly.  Phases of the
    surviving cells go to the nearest multiple of theta0 modulo 2*pi.  The
    grid geometry is fixed at construction; a ``quant`` override here only
    changes the value lattice.
    """
    q = quant if quant is not None else psi.quant
    f0 = q.base_magnitude
    mags = np.abs(psi.amplitudes)
    peak = float(mags.max()) if mags.size else 0.0
    if peak / f0 > 9e18:
        raise ConfigError("base magnitude too small for this state: integer steps overflow")
    steps = np.floor(mags / f0 + 0.5).astype(np.int64)
    if not steps.any():
        raise VanishingWavefunctionError(
            "every cell magnitude rounded below f0/2; the wavefunction would vanish"
        )
    theta0 = q.base_phase
    m_count = q.phase_step_count
    phase_steps = np.floor(np.angle(psi.amplitudes) / theta0 + 0.5).astype(np.int64) % m_count
    phase_steps[steps == 0] = 0
    values = steps * f0 * np.exp(1j * theta0 * phase_steps)
    scale = 1.0 / _norm(values, psi.cell_measure)
    return replace(
        psi,
        amplitudes=scale * values,
        quant=q,
        magnitude_steps=steps,
        phase_steps=phase_steps,
        amp_scale=scale,
    )


def relative_volume(psi: DiscreteWavefunction) -> int:
    """Number of occupied cells (magnitude_steps >= 1) of a quantized state."""
    if not psi.quantized:
        raise ValueError("relative volume is defined on quantized states; call quantize first")
    return int(np.count_nonzero(psi.magnitude_steps))


def project_density(psi: DiscreteWavefunction, k: int) -> np.ndarray:
    """Position-space density of particle k (marginal of |psi|^2).

    Returns an array over particle k's position grid.  Multiplying by
    a_k^spatial_dims and summing gives 1 for a normalized state.
    """
    if not 0 <= k < psi.n_particles:
        raise ValueError(f"particle index {k} out of range")
    keep = set(psi.particle_axes(k))
    other_axes = tuple(ax for ax in range(psi.amplitudes.ndim) if ax not in keep)
    dens = np.abs(psi.amplitudes) ** 2
    if other_axes:
        dens = dens.sum(axis=other_axes)
    other_measure = psi.cell_measure / psi.cell_lengths[k] ** psi.spatial_dims
    return dens * other_measure


def _axis_marginals(psi: DiscreteWavefunction, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-axis (coordinates, probabilities) for particle k."""
    weight = project_density(psi, k) * psi.cell_lengths[k] ** psi.spatial_dims
    d = psi.spatial_dims
    out = []
    for j, axis in enumerate(psi.particle_axes(k)):
        x = psi.axis_coordinates(axis)
        marg = weight.sum(axis=tuple(i for i in range(d) if i != j)) if d > 1 else weight
        out.append((x, marg))
    return out


def position_mean(psi: DiscreteWavefunction, k: int) -> np.ndarray:
    """Expected position of particle k, one component per spatial dimension."""
    return np.array([float(np.sum(p * x)) for x, p in _axis_marginals(psi, k)])


def position_std(psi: DiscreteWavefunction, k: int) -> np.ndarray:
    """Standard deviation of particle k's position per spatial dimension."""
    mean = position_mean(psi, k)
    out = np.empty(psi.spatial_dims)
    for j, (x, p) in enumerate(_axis_marginals(psi, k)):
        out[j] = math.sqrt(max(float(np.sum(p * (x - mean[j]) ** 2)), 0.0))
    return out


def identical_groups(particles) -> list[tuple[tuple[int, ...], Statistics]]:
    """Index groups of exchangeable particles (same species, not distinguishable)."""
    by_species: dict[str, list[int]] = {}
    for i, p in enumerate(particles):
        if p.statistics is not Statistics.DISTINGUISHABLE:
            by_species.setdefault(p.species_id, []).append(i)
    return [
        (tuple(idx), particles[idx[0]].statistics)
        for idx in by_species.values()
        if len(idx) >= 2
    ]


def _permutation_parity(perm) -> int:
    inversions = sum(
        1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


def _exchange_axis_order(n_axes: int, d: int, members, perm) -> list[int]:
    axes = list(range(n_axes))
    for dst, src in zip(members, perm):
        for j in range(d):
            axes[dst * d + j] = src * d + j
    return axes


def exchange_particles(psi: DiscreteWavefunction, i: int, j: int) -> np.ndarray:
    """Amplitudes with the coordinate blocks of particles i and j swapped."""
    perm = list(range(psi.n_particles))
    perm[i], perm[j] = perm[j], perm[i]
    order = _exchange_axis_order(psi.amplitudes.ndim, psi.spatial_dims, range(psi.n_particles), perm)
    return np.transpose(psi.amplitudes, order)


def symmetrize(psi: DiscreteWavefunction) -> DiscreteWavefunction:
    """Project onto the exchange-(anti)symmetric subspace per identical group.

    Bosonic groups get the symmetric average over block permutations,
    fermionic groups the signed average.  The result is renormalized, and
    re-quantized when the input was quantized.  A state that is already a
    fixed point is returned unchanged.
    """
    groups = identical_groups(psi.particles)
    if not groups:
        return psi
    d = psi.spatial_dims
    for members, _ in groups:
        ref = members[0]
        for m in members[1:]:
            same_shape = all(
                psi.amplitudes.shape[a] == psi.amplitudes.shape[b]
                for a, b in zip(psi.particle_axes(ref), psi.particle_axes(m))
            )
            if not same_shape or psi.cell_lengths[ref] != psi.cell_lengths[m]:
                raise ConfigError("identical particles must share grid geometry")
    projected = psi.amplitudes
    for members, stats in groups:
        acc = np.zeros_like(projected)
        count = 0
        for perm in itertools.permutations(members):
            sign = _permutation_parity(perm) if stats is Statistics.FERMION else 1
            order = _exchange_axis_order(projected.ndim, d, members, perm)
            acc = acc + sign * np.transpose(projected, order)
            count += 1
        projected = acc / count
    scale = float(np.abs(psi.amplitudes).max())
    if np.allclose(projected, psi.amplitudes, rtol=0.0, atol=1e-14 * scale):
        return psi
    norm = _norm(projected, psi.cell_measure)
    if norm < 1e-9:
        raise PauliExclusionError("antisymmetrization annihilated the state")
    out = replace(
        psi,
        amplitudes=projected / norm,
        magnitude_steps=None,
        phase_steps=None,
        amp_scale=1.0,
    )
    return quantize(out) if psi.quantized else out


def estimate_de_broglie_wavelength(psi: DiscreteWavefunction, k: int) -> float:
    """Mean de Broglie wavelength of particle k: 2*pi / <|p|> with hbar = 1.

    The expectation runs over the particle's marginal momentum density,
    taken from the FFT along its axes.
    """
    axes = psi.particle_axes(k)
    ft = np.fft.fftn(psi.amplitudes, axes=axes)
    dens = np.abs(ft) ** 2
    other = tuple(ax for ax in range(dens.ndim) if ax not in axes)
    if other:
        dens = dens.sum(axis=other)
    d = psi.spatial_dims
    a = psi.cell_lengths[k]
    k_axes = [2.0 * math.pi * np.fft.fftfreq(n, d=a) for n in dens.shape]
    k_sq = np.zeros(dens.shape)
    for j, kv in enumerate(k_axes):
        shape = [1] * d
        shape[j] = len(kv)
        k_sq = k_sq + kv.reshape(shape) ** 2
    total = float(dens.sum())
    if total == 0.0:
        raise VanishingWavefunctionError("cannot estimate wavelength of a zero state")
    mean_p = float(np.sum(np.sqrt(k_sq) * dens)) / total
    if mean_p == 0.0:
        raise ValueError("state has zero mean |p|; de Broglie wavelength undefined")
    return 2.0 * math.pi / mean_p
