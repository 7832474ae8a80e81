"""Collapse mechanics: Born sampling, GRW hits, schedules, width solving."""

import math

import numpy as np
import pytest
import scipy.stats

from ccqm.collapse import (
    CCQMParams,
    GRWParams,
    ccqm_collapse,
    ccqm_jump_factor,
    ccqm_solve_epsilon,
    collapse_volume_at,
    grw_center_distribution,
    grw_localize,
    grw_schedule,
    mean_hit_interval,
    sample_collapse_center,
    sample_grw_center,
)
from ccqm.errors import ConfigError, EpsilonBracketError, VanishingWavefunctionError
from ccqm.wavefunction import (
    FixedCell,
    ParticleMeta,
    QuantizationParams,
    Statistics,
    discrete_norm,
    exchange_particles,
    from_array,
    normalize,
    quantize,
    relative_volume,
    symmetrize,
)


def particles(n=1, species=None, stats=Statistics.DISTINGUISHABLE):
    return [
        ParticleMeta(mass=1.0, species_id=species or f"p{i}", statistics=stats)
        for i in range(n)
    ]


def quant(f0=1e-4, cell=1.0):
    return QuantizationParams.with_phase_steps(f0, cell_mode=FixedCell(cell))


def gaussian_state(n=1024, cell=0.5, sigma=20.0, f0=1e-4):
    x = (np.arange(n) - (n - 1) / 2) * cell
    raw = np.exp(-(x**2) / (4 * sigma**2))
    return quantize(from_array(raw, particles(), 1, quant(f0, cell)))


def two_packet_state(weight_left=0.7, n=512, cell=1.0, sigma=12.0, offset=120.0, f0=2e-4):
    x = (np.arange(n) - (n - 1) / 2) * cell
    left = np.exp(-((x + offset) ** 2) / (4 * sigma**2))
    right = np.exp(-((x - offset) ** 2) / (4 * sigma**2))
    raw = math.sqrt(weight_left) * left + math.sqrt(1 - weight_left) * right
    return quantize(from_array(raw, particles(), 1, quant(f0, cell))), x


class TestSampleCollapseCenter:
    def test_single_cell_support(self):
        psi = quantize(from_array(np.array([0, 1.0, 0]), particles(), 1, quant()))
        rng = np.random.default_rng(0)
        for _ in range(32):
            index, coords = sample_collapse_center(psi, rng)
            assert index == (1,)
            assert coords == (0.0,)

    def test_nine_to_one_ratio(self):
        psi = quantize(from_array(np.array([3.0, 1.0]), particles(), 1, quant()))
        rng = np.random.default_rng(1)
        draws = 10_000
        hits = sum(sample_collapse_center(psi, rng)[0] == (0,) for _ in range(draws))
        sigma = math.sqrt(draws * 0.9 * 0.1)
        assert abs(hits - draws * 0.9) <= 3 * sigma

    def test_uniform_chi_squared(self):
        psi = quantize(from_array(np.ones(64), particles(), 1, quant()))
        rng = np.random.default_rng(2)
        draws = 10_000
        counts = np.zeros(64)
        for _ in range(draws):
            counts[sample_collapse_center(psi, rng)[0][0]] += 1
        assert scipy.stats.chisquare(counts).pvalue > 0.001

    def test_deterministic_given_seed(self):
        psi = gaussian_state()
        a = [sample_collapse_center(psi, np.random.default_rng(7))[0] for _ in range(5)]
        b = [sample_collapse_center(psi, np.random.default_rng(7))[0] for _ in range(5)]
        assert a == b

    def test_center_inside_support(self):
        psi = gaussian_state()
        rng = np.random.default_rng(3)
        for _ in range(64):
            index, _ = sample_collapse_center(psi, rng)
            assert psi.magnitude_steps[index] >= 1


class TestGRWLocalize:
    def test_uniform_state_gets_gaussian_profile(self):
        n, cell, alpha = 128, 1.0, 0.01
        psi = quantize(from_array(np.ones(n), particles(), 1, quant(f0=1e-8, cell=cell)))
        x = psi.axis_coordinates(0)
        center = (float(x[40]),)
        out, event = grw_localize(psi, 0, center, alpha)
        expected = np.exp(-0.5 * alpha * (x - center[0]) ** 2)
        expected /= math.sqrt(np.sum(expected**2) * cell)
        mask = np.abs(out.amplitudes) > 0
        assert np.allclose(np.abs(out.amplitudes[mask]), expected[mask], rtol=1e-4)
        assert event.kind == "grw_hit"
        assert event.particle == 0
        assert event.v_post <= event.v_pre

    def test_alpha_to_zero_is_identity(self):
        psi = gaussian_state(f0=1e-6)
        out, _ = grw_localize(psi, 0, (0.0,), 1e-20)
        assert np.max(np.abs(out.amplitudes - psi.amplitudes)) < 1e-9

    def test_two_packet_born_selection(self):
        weight = 0.7
        psi, x = two_packet_state(weight)
        alpha = 1.0 / 4.0**2  # localization width 4 << packet separation 240
        rng = np.random.default_rng(11)
        trials = 1000
        left = 0
        for _ in range(trials):
            _, coords = sample_grw_center(psi, 0, alpha, rng)
            out, _ = grw_localize(psi, 0, coords, alpha)
            dens = np.abs(out.amplitudes) ** 2
            left += float(dens[x < 0].sum()) > float(dens[x > 0].sum())
        sigma = math.sqrt(trials * weight * (1 - weight))
        assert abs(left - trials * weight) <= 3 * sigma

    def test_vanishing_when_f0_too_coarse(self):
        psi = from_array(np.ones(64), particles(), 1, quant(f0=10.0))
        with pytest.raises(VanishingWavefunctionError):
            grw_localize(psi, 0, (0.0,), 1.0)

    def test_norm_after_event(self):
        psi = gaussian_state()
        out, _ = grw_localize(psi, 0, (5.0,), 0.01)
        assert abs(discrete_norm(out) - 1.0) < 1e-9

    def test_breaks_exchange_symmetry(self):
        # Localizing one particle of a symmetrized identical pair leaves an
        # exchange-asymmetric state: the GRW contrast case.
        x = np.arange(48) - 23.5
        u = np.exp(-((x + 8) ** 2) / 18)
        w = np.exp(-((x - 8) ** 2) / 18)
        raw = np.multiply.outer(u, w)
        psi = quantize(
            symmetrize(
                from_array(raw, particles(2, species="b", stats=Statistics.BOSON), 1, quant(f0=1e-6))
            )
        )
        out, _ = grw_localize(psi, 0, (8.0,), 0.1)
        asymmetry = np.max(np.abs(out.amplitudes - exchange_particles(out, 0, 1)))
        assert asymmetry > 1e-6


class TestGRWSchedule:
    def test_empirical_poisson_counts(self):
        n, rate, horizon = 50, 0.2, 10.0
        mean = n * rate * horizon
        rng = np.random.default_rng(5)
        total = sum(len(grw_schedule(n, rate, horizon, rng)) for _ in range(100))
        assert abs(total - 100 * mean) <= 3 * math.sqrt(100 * mean)

    def test_times_sorted_and_particles_in_range(self):
        rng = np.random.default_rng(6)
        events = grw_schedule(8, 1.0, 5.0, rng)
        times = [t for t, _ in events]
        assert times == sorted(times)
        assert all(0 <= k < 8 for _, k in events)

    def test_zero_horizon_empty(self):
        assert grw_schedule(3, 1.0, 0.0, np.random.default_rng(0)) == []

    def test_mean_intervals_match_analytic_figures(self):
        assert math.isclose(mean_hit_interval(1, 1e-16), 1e16, rel_tol=1e-12)
        assert math.isclose(mean_hit_interval(1e23, 1e-16), 1e-7, rel_tol=1e-12)


class TestJumpFactor:
    def test_single_particle_is_plain_gaussian(self):
        psi = gaussian_state(n=64, cell=1.0)
        x = psi.axis_coordinates(0)
        factor = ccqm_jump_factor(psi, (3.0,), 0.25)
        assert np.allclose(factor, np.exp(-0.125 * (x - 3.0) ** 2), atol=1e-12)

    def test_two_distinguishable_matches_brute_force(self):
        raw = np.ones((4, 4))
        psi = from_array(raw, particles(2), 1, quant(cell=1.0))
        x0 = psi.axis_coordinates(0)
        x1 = psi.axis_coordinates(1)
        center = (float(x0[1]), float(x1[2]))
        eps = 1.0
        factor = ccqm_jump_factor(psi, center, eps)
        expected = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                expected[i, j] = math.exp(
                    -eps * ((x0[i] - center[0]) ** 2 + (x1[j] - center[1]) ** 2) / 2
                )
        assert np.allclose(factor, expected, atol=1e-12)

    def test_identical_pair_factor_is_exchange_symmetric(self):
        raw = np.ones((6, 6))
        psi = from_array(raw, particles(2, species="b", stats=Statistics.BOSON), 1, quant())
        factor = ccqm_jump_factor(psi, (1.5, -0.5), 0.7)
        assert np.allclose(factor, factor.T, atol=1e-14)


class TestSolveEpsilon:
    def test_extreme_epsilon_limits(self):
        psi = gaussian_state()
        rng = np.random.default_rng(8)
        _, coords = sample_collapse_center(psi, rng)
        assert collapse_volume_at(psi, coords, 1e12) == 1
        assert collapse_volume_at(psi, coords, 1e-12) == relative_volume(psi)

    def test_gaussian_half_volume_with_scan_oracle(self):
        psi = gaussian_state()
        v_pre = relative_volume(psi)
        rng = np.random.default_rng(9)
        _, coords = sample_collapse_center(psi, rng)
        params = CCQMParams(critical_volume=100)
        eps = ccqm_solve_epsilon(psi, coords, params)
        target = math.floor(0.5 * v_pre + 0.5)
        assert abs(collapse_volume_at(psi, coords, eps) - target) <= 1
        # Brute-force scan oracle: the volume staircase is nonincreasing and
        # the scan points flanking the solver's eps bracket its volume.
        scan = np.logspace(-12, 12, 400)
        volumes = [collapse_volume_at(psi, coords, e) for e in scan]
        assert all(b <= a for a, b in zip(volumes, volumes[1:]))
        solved = collapse_volume_at(psi, coords, eps)
        i = int(np.searchsorted(scan, eps))
        assert volumes[min(i, 399)] <= solved <= volumes[max(i - 1, 0)]

    def test_bracket_error_when_min_epsilon_overshoots(self):
        psi = gaussian_state()
        rng = np.random.default_rng(10)
        _, coords = sample_collapse_center(psi, rng)
        params = CCQMParams(critical_volume=100, epsilon_bracket=(1e6, 1e12))
        with pytest.raises(EpsilonBracketError):
            ccqm_solve_epsilon(psi, coords, params)

    def test_bracket_error_when_max_epsilon_undershoots(self):
        psi = gaussian_state()
        rng = np.random.default_rng(10)
        _, coords = sample_collapse_center(psi, rng)
        params = CCQMParams(critical_volume=100, epsilon_bracket=(1e-12, 1e-10))
        with pytest.raises(EpsilonBracketError):
            ccqm_solve_epsilon(psi, coords, params)


class TestCCQMCollapse:
    def test_post_volume_contract(self):
        psi = gaussian_state()
        params = CCQMParams(critical_volume=100)
        rng = np.random.default_rng(12)
        out, event = ccqm_collapse(psi, params, rng=rng)
        target = math.floor(0.5 * event.v_pre + 0.5)
        assert abs(event.v_post - target) <= 1
        assert event.v_post == relative_volume(out)
        assert event.v_post < event.v_pre
        assert abs(discrete_norm(out) - 1.0) < 1e-9
        assert psi.magnitude_steps[event.center_index] >= 1

    def test_below_critical_volume_rejected(self):
        psi = gaussian_state()
        params = CCQMParams(critical_volume=10 * relative_volume(psi))
        with pytest.raises(ValueError):
            ccqm_collapse(psi, params, rng=np.random.default_rng(0))

    def test_two_packet_born_frequencies(self):
        weight = 0.7
        psi, x = two_packet_state(weight)
        params = CCQMParams(critical_volume=64)
        rng = np.random.default_rng(13)
        trials = 200
        left = 0
        for _ in range(trials):
            out, _ = ccqm_collapse(psi, params, rng=rng)
            dens = np.abs(out.amplitudes) ** 2
            left += float(dens[x < 0].sum()) > float(dens[x > 0].sum())
        sigma = math.sqrt(trials * weight * (1 - weight))
        assert abs(left - trials * weight) <= 3 * sigma

    def test_preserves_boson_symmetry(self):
        x = np.arange(40) - 19.5
        u = np.exp(-((x + 6) ** 2) / 14)
        w = np.exp(-((x - 6) ** 2) / 14)
        raw = np.multiply.outer(u, w) + np.multiply.outer(w, u)
        psi = quantize(
            from_array(raw, particles(2, species="b", stats=Statistics.BOSON), 1, quant(f0=5e-5))
        )
        params = CCQMParams(critical_volume=32)
        out, _ = ccqm_collapse(psi, params, rng=np.random.default_rng(14))
        assert np.max(np.abs(out.amplitudes - exchange_particles(out, 0, 1))) < 1e-9

    def test_preserves_fermion_antisymmetry(self):
        x = np.arange(40) - 19.5
        u = np.exp(-((x + 6) ** 2) / 14)
        w = np.exp(-((x - 6) ** 2) / 14)
        raw = np.multiply.outer(u, w) - np.multiply.outer(w, u)
        psi = quantize(
            from_array(raw, particles(2, species="f", stats=Statistics.FERMION), 1, quant(f0=5e-5))
        )
        params = CCQMParams(critical_volume=32)
        out, _ = ccqm_collapse(psi, params, rng=np.random.default_rng(15))
        assert np.max(np.abs(out.amplitudes + exchange_particles(out, 0, 1))) < 1e-9


class TestParamValidation:
    def test_ccqm_params(self):
        with pytest.raises(ConfigError):
            CCQMParams(critical_volume=1)
        with pytest.raises(ConfigError):
            CCQMParams(critical_volume=10, collapse_fraction=1.5)
        with pytest.raises(ConfigError):
            CCQMParams(critical_volume=10, epsilon_bracket=(1.0, 0.5))

    def test_grw_params(self):
        with pytest.raises(ConfigError):
            GRWParams(localization_alpha=-1.0)
        with pytest.raises(ConfigError):
            GRWParams(hit_rate=0.0)


def test_grw_center_distribution_limits():
    psi, x = two_packet_state(0.6)
    # Narrow jump: center law follows the packet densities.
    p_narrow = grw_center_distribution(psi, 0, 1.0)
    left_mass = float(p_narrow[x < 0].sum())
    assert abs(left_mass - 0.6) < 0.02
    # Infinitely wide jump: center law flattens out.
    p_wide = grw_center_distribution(psi, 0, 1e-12)
    assert p_wide.max() / p_wide.min() < 1.001
