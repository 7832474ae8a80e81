"""Unitary propagation of configuration-space wavefunctions, hbar = 1.

Two schemes:

* split-step spectral (2nd-order Strang): half potential kick, full
  kinetic step in momentum space, half potential kick.  Transforms are
  effectively periodic, so a boundary guard band plus an overflow error
  stands in for absorbing boundaries — collapse physics must not be
  confounded by boundary absorption.
* Crank-Nicolson: Cayley form (1 + i dt H/2) psi' = (1 - i dt H/2) psi
  with a finite-difference Laplacian and hard-wall (Dirichlet) edges,
  solved by a cached sparse LU factorization.

``spread_until_volume`` drives the collapse trigger: it samples the
relative volume of a quantized copy at report intervals and stops at the
first report at or past the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, GridOverflowError, NumericalError, StalledEvolutionError
from .wavefunction import DiscreteWavefunction, QuantizationParams, quantize, relative_volume


@dataclass(frozen=True)
class FreePotential:
    pass


@dataclass(frozen=True)
class HarmonicPotential:
    """V = sum_k (1/2) m_k omega_k^2 |x_k|^2, centered on the grid."""

    omegas: tuple[float, ...]


@dataclass(frozen=True)
class PairGaussianWell:
    """Attractive pair coupling -depth * exp(-|x_i - x_j|^2 / (2 width^2))."""

    depth: float
    width: float
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class TabulatedPotential:
    """Real potential sampled on the full configuration grid."""

    values: np.ndarray


PotentialSpec = FreePotential | HarmonicPotential | PairGaussianWell | TabulatedPotential

SPLIT_STEP = "split_step"
CRANK_NICOLSON = "crank_nicolson"


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    scheme: str = SPLIT_STEP
    steps_per_report: int = 100
    boundary_guard_cells: int = 3

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.scheme not in (SPLIT_STEP, CRANK_NICOLSON):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.steps_per_report < 1:
            raise ConfigError("steps_per_report must be >= 1")
        if self.boundary_guard_cells < 2:
            raise ConfigError("boundary_guard_cells must be >= 2")


def evaluate_potential(potential: PotentialSpec, psi: DiscreteWavefunction) -> np.ndarray | None:
    """Potential energy per configuration cell; None for the free case."""
    if isinstance(potential, FreePotential):
        return None
    if isinstance(potential, TabulatedPotential):
        v = np.asarray(potential.values, dtype=np.float64)
        if v.shape != psi.grid_extents:
            raise ConfigError("tabulated potential shape does not match the grid")
        if not np.all(np.isfinite(v)):
            raise ConfigError("tabulated potential must be finite and real")
        return v
    if isinstance(potential, HarmonicPotential):
        if len(potential.omegas) != psi.n_particles:
            raise ConfigError("need one oscillator frequency per particle")
        v = np.zeros(psi.grid_extents)
        for k, omega in enumerate(potential.omegas):
            m = psi.particles[k].mass
            for axis in psi.particle_axes(k):
                x = psi.axis_coordinates(axis)
                shape = [1] * v.ndim
                shape[axis] = len(x)
                v = v + 0.5 * m * omega**2 * x.reshape(shape) ** 2
        return v
    if isinstance(potential, PairGaussianWell):
        d = psi.spatial_dims
        v = np.zeros(psi.grid_extents)
        for i, j in potential.pairs:
            r2 = np.zeros(psi.grid_extents)
            for comp in range(d):
                ax_i = psi.particle_axes(i)[comp]
                ax_j = psi.particle_axes(j)[comp]
                xi = psi.axis_coordinates(ax_i)
                xj = psi.axis_coordinates(ax_j)
                si = [1] * v.ndim
                si[ax_i] = len(xi)
                sj = [1] * v.ndim
                sj[ax_j] = len(xj)
                r2 = r2 + (xi.reshape(si) - xj.reshape(sj)) ** 2
            v = v - potential.depth * np.exp(-r2 / (2.0 * potential.width**2))
        return v
    raise ConfigError(f"unknown potential {potential!r}")


def _kinetic_grid(psi: DiscreteWavefunction) -> np.ndarray:
    """sum_axes k_axis^2 / (2 m_particle) on the full grid (spectral)."""
    kin = np.zeros(psi.grid_extents)
    for k in range(psi.n_particles):
        m = psi.particles[k].mass
        a = psi.cell_lengths[k]
        for axis in psi.particle_axes(k):
            n = psi.grid_extents[axis]
            kv = 2.0 * math.pi * np.fft.fftfreq(n, d=a)
            shape = [1] * kin.ndim
            shape[axis] = n
            kin = kin + kv.reshape(shape) ** 2 / (2.0 * m)
    return kin


class _SplitStepPropagator:
    def __init__(self, psi: DiscreteWavefunction, potential: PotentialSpec, dt: float):
        self.kin_phase = np.exp(-1j * dt * _kinetic_grid(psi))
        v = evaluate_potential(potential, psi)
        self.half_v = np.exp(-0.5j * dt * v) if v is not None else None

    def step(self, a: np.ndarray) -> np.ndarray:
        if self.half_v is not None:
            a = self.half_v * a
        a = np.fft.ifftn(self.kin_phase * np.fft.fftn(a))
        if self.half_v is not None:
            a = self.half_v * a
        return a


def sparse_hamiltonian(psi: DiscreteWavefunction, potential: PotentialSpec) -> sp.csr_matrix:
    """H = -sum_k (1/2 m_k) Laplacian_k + V with 3-point stencils, hard walls."""
    shape = psi.grid_extents
    total = int(np.prod(shape))
    h = sp.csr_matrix((total, total), dtype=np.complex128)
    for k in range(psi.n_particles):
        m = psi.particles[k].mass
        a = psi.cell_lengths[k]
        coef = -1.0 / (2.0 * m * a * a)
        for axis in psi.particle_axes(k):
            n = shape[axis]
            lap = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="csr")
            before = int(np.prod(shape[:axis])) if axis else 1
            after = int(np.prod(shape[axis + 1 :])) if axis + 1 < len(shape) else 1
            op = sp.kron(sp.identity(before, format="csr"), sp.kron(lap, sp.identity(after, format="csr")))
            h = h + coef * op.tocsr()
    v = evaluate_potential(potential, psi)
    if v is not None:
        h = h + sp.diags(v.ravel().astype(np.complex128))
    return h.tocsr()


class _CrankNicolsonPropagator:
    def __init__(self, psi: DiscreteWavefunction, potential: PotentialSpec, dt: float):
        h = sparse_hamiltonian(psi, potential)
        eye = sp.identity(h.shape[0], format="csr", dtype=np.complex128)
        self.forward = (eye - 0.5j * dt * h).tocsr()
        self.lu = spla.splu((eye + 0.5j * dt * h).tocsc())
        self.shape = psi.grid_extents

    def step(self, a: np.ndarray) -> np.ndarray:
        return self.lu.solve(self.forward @ a.ravel()).reshape(self.shape)


def _make_propagator(psi, potential, cfg: EvolutionConfig, dt: float):
    if cfg.scheme == SPLIT_STEP:
        return _SplitStepPropagator(psi, potential, dt)
    return _CrankNicolsonPropagator(psi, potential, dt)


def check_guard_band(psi: DiscreteWavefunction, guard_cells: int) -> None:
    """Raise GridOverflowError if quantized support reaches the guard band."""
    mask = np.abs(psi.amplitudes) >= 0.5 * psi.quant.base_magnitude
    for axis, n in enumerate(psi.grid_extents):
        if n <= 2 * guard_cells:
            raise GridOverflowError(
                f"grid axis {axis} has only {n} cells for a {guard_cells}-cell guard band; "
                "enlarge the grid"
            )
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[axis] = slice(0, guard_cells)
        hi[axis] = slice(n - guard_cells, n)
        if mask[tuple(lo)].any() or mask[tuple(hi)].any():
            raise GridOverflowError(
                f"wavefunction support reached the guard band on axis {axis}; enlarge the grid"
            )


def evolve(
    psi: DiscreteWavefunction,
    potential: PotentialSpec,
    cfg: EvolutionConfig,
    n_steps: int,
    dt: float | None = None,
) -> DiscreteWavefunction:
    """Propagate n_steps of cfg.dt (or an explicit dt, e.g. negative for reversal).

    Returns a continuous-amplitude state; in strict quantize-during-evolution
    mode every step is re-quantized and the result stays quantized.
    """
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    check_guard_band(psi, cfg.boundary_guard_cells)
    if n_steps == 0:
        return psi
    step_dt = cfg.dt if dt is None else dt
    prop = _make_propagator(psi, potential, cfg, step_dt)
    strict = psi.quant.quantize_during_evolution
    a = psi.amplitudes
    out = psi
    for _ in range(n_steps):
        a = prop.step(a)
        if strict:
            out = quantize(
                replace(out, amplitudes=a, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
            )
            a = out.amplitudes
    if strict:
        check_guard_band(out, cfg.boundary_guard_cells)
        return out
    out = replace(psi, amplitudes=a, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
    check_guard_band(out, cfg.boundary_guard_cells)
    return out


def energy_expectation(psi: DiscreteWavefunction, potential: PotentialSpec) -> float:
    """<psi|H|psi> with the finite-difference Hamiltonian (CN-consistent)."""
    h = sparse_hamiltonian(psi, potential)
    flat = psi.amplitudes.ravel()
    return float(np.vdot(flat, h @ flat).real) * psi.cell_measure


def momentum_density(psi: DiscreteWavefunction) -> np.ndarray:
    """|FFT psi|^2 over the full grid, normalized to sum 1."""
    dens = np.abs(np.fft.fftn(psi.amplitudes)) ** 2
    return dens / dens.sum()


@dataclass(frozen=True)
class VolumeTraceRow:
    time: float
    volume: int
    peak_magnitude_over_f0: float


def spread_until_volume(
    psi: DiscreteWavefunction,
    potential: PotentialSpec,
    cfg: EvolutionConfig,
    v_target: int,
    quant: QuantizationParams | None = None,
    *,
    stall_patience: int = 20,
    confirm_reports: int = 1,
    max_reports: int = 100_000,
    start_time: float = 0.0,
) -> tuple[DiscreteWavefunction, float, list[VolumeTraceRow]]:
    """Evolve until the quantized relative volume first reaches v_target.

    Volume is measured on a quantized copy every cfg.steps_per_report steps;
    the continuous state is returned along with the elapsed time and the
    sampled volume trace.  ``confirm_reports`` > 1 demands the threshold
    hold for that many consecutive reports (hysteresis against counting
    noise); the default uses the raw count.
    """
    q = quant if quant is not None else psi.quant
    f0 = q.base_magnitude

    def peak(state):
        return float(np.abs(state.amplitudes).max()) / f0

    v0 = relative_volume(quantize(psi, q))
    if v0 >= v_target:
        raise ValueError(f"state already at volume {v0} >= target {v_target}")
    trace = [VolumeTraceRow(start_time, v0, peak(psi))]
    prop = _make_propagator(psi, potential, cfg, cfg.dt)
    strict = psi.quant.quantize_during_evolution
    current = psi
    hits = 0
    for report in range(1, max_reports + 1):
        a = current.amplitudes
        for _ in range(cfg.steps_per_report):
            a = prop.step(a)
            if strict:
                current = quantize(
                    replace(current, amplitudes=a, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
                )
                a = current.amplitudes
        if not strict:
            current = replace(psi, amplitudes=a, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
        check_guard_band(current, cfg.boundary_guard_cells)
        elapsed = report * cfg.steps_per_report * cfg.dt
        v = relative_volume(quantize(current, q))
        trace.append(VolumeTraceRow(start_time + elapsed, v, peak(current)))
        if v >= v_target:
            hits += 1
            if hits >= confirm_reports:
                return current, elapsed, trace
        else:
            hits = 0
        recent = [row.volume for row in trace[-(stall_patience + 1) :]]
        if len(recent) == stall_patience + 1 and len(set(recent)) == 1:
            raise StalledEvolutionError(
                f"volume stuck at {recent[-1]} for {stall_patience} reports "
                f"(target {v_target}); the state is not spreading"
            )
    raise NumericalError(f"volume target {v_target} not reached within {max_reports} reports")
