"""Propagator oracles: dispersion, stationarity, unitarity, volume spreading."""

import math

import numpy as np
import pytest

from ccqm.errors import ConfigError, GridOverflowError, StalledEvolutionError
from ccqm.evolution import (
    CRANK_NICOLSON,
    EvolutionConfig,
    FreePotential,
    HarmonicPotential,
    PairGaussianWell,
    TabulatedPotential,
    _SplitStepPropagator,
    energy_expectation,
    evaluate_potential,
    evolve,
    momentum_density,
    spread_until_volume,
)
from ccqm.wavefunction import (
    FixedCell,
    ParticleMeta,
    QuantizationParams,
    discrete_norm,
    from_array,
    position_std,
    quantize,
    relative_volume,
)

MASS = 1.0


def particles(n=1):
    return [ParticleMeta(mass=MASS, species_id=f"p{i}") for i in range(n)]


def quant(f0=1e-9, cell=0.1):
    return QuantizationParams.with_phase_steps(f0, cell_mode=FixedCell(cell))


def gaussian_1d(n=1024, cell=0.1, sigma=1.0, center=0.0, f0=1e-9):
    x = (np.arange(n) - (n - 1) / 2) * cell
    raw = np.exp(-((x - center) ** 2) / (4 * sigma**2))
    return from_array(raw, particles(), 1, quant(f0, cell))


def analytic_width(sigma0, t, mass=MASS):
    return sigma0 * math.sqrt(1.0 + (t / (2.0 * mass * sigma0**2)) ** 2)


class TestSplitStep:
    def test_free_gaussian_dispersion(self):
        psi = gaussian_1d()
        cfg = EvolutionConfig(dt=0.01, steps_per_report=50)
        steps = 566
        out = evolve(psi, FreePotential(), cfg, steps)
        t = steps * cfg.dt
        measured = position_std(out, 0)[0]
        assert abs(measured - analytic_width(1.0, t)) / analytic_width(1.0, t) < 0.005

    def test_harmonic_ground_state_stationary(self):
        # Ground state for m = omega = 1 is exp(-x^2/2); density drift over
        # one full period must stay below 1e-8.
        n, cell = 256, 0.1
        x = (np.arange(n) - (n - 1) / 2) * cell
        psi = from_array(np.exp(-(x**2) / 2), particles(), 1, quant(cell=cell))
        dt = 1e-3
        steps = int(round(2 * math.pi / dt))
        out = evolve(psi, HarmonicPotential(omegas=(1.0,)), EvolutionConfig(dt=dt), steps)
        drift = np.max(np.abs(np.abs(out.amplitudes) ** 2 - np.abs(psi.amplitudes) ** 2))
        assert drift < 1e-8

    def test_plane_wave_density_static_phase_advances(self):
        # Periodic test rig: drive the propagator directly since a plane
        # wave has no guard band to respect.
        n, cell = 64, 0.25
        k0 = 2 * math.pi * 4 / (n * cell)
        x = (np.arange(n) - (n - 1) / 2) * cell
        raw = np.exp(1j * k0 * x)
        psi = from_array(raw, particles(), 1, quant(cell=cell))
        dt, steps = 0.01, 200
        prop = _SplitStepPropagator(psi, FreePotential(), dt)
        a = psi.amplitudes
        for _ in range(steps):
            a = prop.step(a)
        dens0 = np.abs(psi.amplitudes) ** 2
        assert np.max(np.abs(np.abs(a) ** 2 - dens0)) < 1e-9
        energy = k0**2 / (2 * MASS)
        expected_phase = np.exp(-1j * energy * dt * steps)
        assert np.allclose(a / psi.amplitudes, expected_phase, atol=1e-9)

    def test_norm_preserved(self):
        psi = gaussian_1d()
        out = evolve(psi, FreePotential(), EvolutionConfig(dt=0.01), 1000)
        assert abs(discrete_norm(out) - 1.0) < 1e-10

    def test_momentum_density_preserved_free(self):
        psi = gaussian_1d()
        out = evolve(psi, FreePotential(), EvolutionConfig(dt=0.01), 500)
        assert np.max(np.abs(momentum_density(out) - momentum_density(psi))) < 1e-9

    def test_time_reversal(self):
        psi = gaussian_1d()
        cfg = EvolutionConfig(dt=0.01)
        there = evolve(psi, FreePotential(), cfg, 300)
        back = evolve(there, FreePotential(), cfg, 300, dt=-cfg.dt)
        assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-7

    def test_returns_continuous_state(self):
        psi = quantize(gaussian_1d(f0=1e-5))
        out = evolve(psi, FreePotential(), EvolutionConfig(dt=0.01), 10)
        assert not out.quantized


class TestCrankNicolson:
    def cfg(self, dt=0.005):
        return EvolutionConfig(dt=dt, scheme=CRANK_NICOLSON)

    def displaced_packet(self):
        n, cell = 256, 0.1
        x = (np.arange(n) - (n - 1) / 2) * cell
        return from_array(np.exp(-((x - 0.5) ** 2) / 2), particles(), 1, quant(cell=cell))

    def test_norm_preserved(self):
        out = evolve(self.displaced_packet(), HarmonicPotential(omegas=(1.0,)), self.cfg(), 1000)
        assert abs(discrete_norm(out) - 1.0) < 1e-10

    def test_energy_conserved(self):
        psi = self.displaced_packet()
        pot = HarmonicPotential(omegas=(1.0,))
        e0 = energy_expectation(psi, pot)
        out = evolve(psi, pot, self.cfg(), 10_000)
        assert abs(energy_expectation(out, pot) - e0) / abs(e0) < 1e-6


class TestPotentials:
    def test_pair_gaussian_well_shape(self):
        psi = from_array(
            np.ones((8, 8), dtype=complex), particles(2), 1, quant(cell=0.5)
        )
        v = evaluate_potential(PairGaussianWell(depth=2.0, width=1.0, pairs=((0, 1),)), psi)
        # Deepest on the diagonal (zero separation), value -depth.
        assert v.shape == (8, 8)
        assert np.allclose(np.diag(v), -2.0)
        assert np.all(v <= 0)
        assert v[0, 7] > -2.0

    def test_tabulated_shape_mismatch(self):
        psi = from_array(np.ones(8, dtype=complex), particles(), 1, quant())
        with pytest.raises(ConfigError):
            evaluate_potential(TabulatedPotential(values=np.zeros(9)), psi)

    def test_harmonic_needs_one_omega_per_particle(self):
        psi = from_array(np.ones((4, 4), dtype=complex), particles(2), 1, quant())
        with pytest.raises(ConfigError):
            evaluate_potential(HarmonicPotential(omegas=(1.0,)), psi)


class TestGuardBand:
    def test_overflow_raises(self):
        psi = gaussian_1d(n=64, cell=0.1, sigma=1.0, f0=1e-5)
        cfg = EvolutionConfig(dt=0.01, steps_per_report=100)
        with pytest.raises(GridOverflowError):
            evolve(psi, FreePotential(), cfg, 4000)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(dt=-1.0)
        with pytest.raises(ConfigError):
            EvolutionConfig(dt=0.1, boundary_guard_cells=1)
        with pytest.raises(ConfigError):
            EvolutionConfig(dt=0.1, scheme="leapfrog")


class TestSpreadUntilVolume:
    def test_free_gaussian_reaches_doubled_volume_on_schedule(self):
        # Analytic oracle: 1D support scales with sigma(t), so volume
        # doubles when sigma does, at t = 2 m sigma0^2 sqrt(3).
        psi = gaussian_1d(f0=1e-5)
        v0 = relative_volume(quantize(psi))
        cfg = EvolutionConfig(dt=0.005, steps_per_report=20)
        _, elapsed, trace = spread_until_volume(psi, FreePotential(), cfg, 2 * v0)
        t_analytic = 2 * MASS * 1.0**2 * math.sqrt(3)
        assert abs(elapsed - t_analytic) / t_analytic < 0.10
        assert trace[-1].volume >= 2 * v0

    def test_volume_trace_monotone_after_transients(self):
        psi = gaussian_1d(f0=1e-5)
        v0 = relative_volume(quantize(psi))
        cfg = EvolutionConfig(dt=0.005, steps_per_report=20)
        _, _, trace = spread_until_volume(psi, FreePotential(), cfg, 2 * v0)
        volumes = [row.volume for row in trace]
        assert all(b >= a for a, b in zip(volumes[2:], volumes[3:]))

    def test_stationary_state_stalls(self):
        n, cell = 256, 0.1
        x = (np.arange(n) - (n - 1) / 2) * cell
        psi = from_array(np.exp(-(x**2) / 2), particles(), 1, quant(f0=1e-5, cell=cell))
        v0 = relative_volume(quantize(psi))
        with pytest.raises(StalledEvolutionError):
            spread_until_volume(
                psi,
                HarmonicPotential(omegas=(1.0,)),
                EvolutionConfig(dt=0.01, steps_per_report=10),
                2 * v0,
                stall_patience=10,
            )

    def test_two_particle_volume_matches_product_counting_oracle(self):
        # A free 2-particle product stays an exact product, so the pipeline
        # count must equal an independent count over the outer product of
        # the separately evolved 1D factors.
        n, cell, f0 = 128, 0.25, 2e-4
        q2 = QuantizationParams.with_phase_steps(f0, cell_mode=FixedCell(cell))
        x = (np.arange(n) - (n - 1) / 2) * cell
        raw = np.exp(-(x**2) / 4)
        psi_1d = from_array(raw, particles(), 1, q2)
        psi_2d = from_array(np.multiply.outer(raw, raw), particles(2), 1, q2)
        cfg = EvolutionConfig(dt=0.02, steps_per_report=25)
        out_1d = evolve(psi_1d, FreePotential(), cfg, 150)
        out_2d = evolve(psi_2d, FreePotential(), cfg, 150)
        amp = out_1d.amplitudes
        product = np.multiply.outer(amp, amp)
        norm = math.sqrt(float(np.sum(np.abs(product) ** 2)) * cell**2)
        oracle = int(np.sum(np.abs(product) / norm >= 0.5 * f0))
        assert relative_volume(quantize(out_2d)) == oracle

    def test_two_particle_target_is_square_of_single(self):
        # Uniform magnitudes make the configuration support exactly s^2.
        f0 = 1.0 / 64
        s = 9
        a = np.zeros(32)
        a[10 : 10 + s] = 4 * f0
        q2 = QuantizationParams.with_phase_steps(f0 * f0, cell_mode=FixedCell(1.0))
        psi = from_array(np.multiply.outer(a, a).astype(complex), particles(2), 1, q2)
        assert relative_volume(quantize(psi)) == s * s

    def test_rejects_state_already_at_target(self):
        psi = gaussian_1d(f0=1e-5)
        v0 = relative_volume(quantize(psi))
        with pytest.raises(ValueError):
            spread_until_volume(
                psi, FreePotential(), EvolutionConfig(dt=0.01, steps_per_report=10), v0
            )


class TestStrictQuantizeDuringEvolution:
    def test_per_step_thresholding_distorts_spreading(self):
        # Strict mode re-quantizes every step.  Rounding the threshold
        # cells up each step builds a hard-edged profile whose support
        # grows anomalously fast — a measurable local deviation from the
        # unitary evolution, which is exactly why the mode is observable.
        n, cell, f0 = 256, 0.1, 2e-3
        x = (np.arange(n) - (n - 1) / 2) * cell
        raw = np.exp(-(x**2) / (4 * 0.5**2))
        strict_q = QuantizationParams.with_phase_steps(
            f0, cell_mode=FixedCell(cell), quantize_during_evolution=True
        )
        free_q = QuantizationParams.with_phase_steps(f0, cell_mode=FixedCell(cell))
        cfg = EvolutionConfig(dt=0.005, steps_per_report=50)
        strict_out = evolve(from_array(raw, particles(), 1, strict_q), FreePotential(), cfg, 80)
        free_out = evolve(from_array(raw, particles(), 1, free_q), FreePotential(), cfg, 80)
        assert strict_out.quantized
        v_strict = relative_volume(strict_out)
        v_free = relative_volume(quantize(free_out))
        assert v_strict != v_free
