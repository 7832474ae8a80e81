"""The multi-wavefunction world: merging, splitting, and world stepping.

Separate wavefunctions whose particles overlap in position space merge
with hazard probability p = 1 - exp(-kappa * strength * dt) into the
exchange-symmetrized product state.  A wavefunction that reaches the
critical relative volume either splits — truncation to the leading Schmidt
pair of a near-factorizable bipartition — or undergoes a critical-volume
collapse.  Both outcomes are nonlinear; the split reports the fidelity
|<A x B|psi>|^2 it preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collapse import CCQMParams, CollapseEvent, ccqm_collapse
from .errors import ConfigError, MemoryBudgetError, SplitRefusalError
from .evolution import EvolutionConfig, PotentialSpec, evolve
from .wavefunction import (
    DiscreteWavefunction,
    QuantizationParams,
    normalize,
    position_mean,
    project_density,
    quantize,
    relative_volume,
    symmetrize,
)

DENSITY_OVERLAP = "density_overlap"
POTENTIAL_WEIGHTED_OVERLAP = "potential_weighted_overlap"


@dataclass(frozen=True)
class MergeRule:
    """Hazard-rate merge law parameters.

    ``coupling_scale`` is kappa in p = 1 - exp(-kappa * strength * dt).
    The potential-weighted model multiplies each pair's density overlap by
    |V| evaluated at the distance between the particles' mean positions;
    ``pair_potential`` supplies (depth, width) of that Gaussian well.
    """

    coupling_scale: float
    interaction_model: str = DENSITY_OVERLAP
    pair_potential: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.coupling_scale > 0:
            raise ConfigError("coupling scale must be positive")
        if self.interaction_model not in (DENSITY_OVERLAP, POTENTIAL_WEIGHTED_OVERLAP):
            raise ConfigError(f"unknown interaction model {self.interaction_model!r}")
        if self.interaction_model == POTENTIAL_WEIGHTED_OVERLAP and self.pair_potential is None:
            raise ConfigError("potential-weighted overlap needs a (depth, width) pair potential")


@dataclass(frozen=True)
class SplitRule:
    """Factorizability threshold eta and the bipartition search budget."""

    factorizability_threshold: float
    max_partitions_examined: int = 8

    def __post_init__(self):
        if not 0.0 < self.factorizability_threshold < 1.0:
            raise ConfigError("factorizability threshold must lie in (0, 1)")
        if self.max_partitions_examined < 1:
            raise ConfigError("must examine at least one bipartition")


@dataclass(frozen=True)
class SplitCandidate:
    partition_a: tuple[int, ...]
    partition_b: tuple[int, ...]
    score: float


@dataclass(frozen=True, eq=False)
class WorldState:
    """Disjoint wavefunctions plus the ordered event log."""

    wavefunctions: tuple[DiscreteWavefunction, ...]
    event_log: tuple[CollapseEvent, ...] = ()
    time: float = 0.0
    rng_seed: int = 0

    def particle_census(self) -> dict[str, int]:
        census: dict[str, int] = {}
        for w in self.wavefunctions:
            for p in w.particles:
                census[p.species_id] = census.get(p.species_id, 0) + 1
        return census


def _check_shared_geometry(psi1: DiscreteWavefunction, psi2: DiscreteWavefunction) -> None:
    if psi1.spatial_dims != psi2.spatial_dims:
        raise ConfigError("wavefunctions must share spatial dimensionality")
    grids = set()
    for psi in (psi1, psi2):
        for k in range(psi.n_particles):
            extents = tuple(psi.grid_extents[ax] for ax in psi.particle_axes(k))
            grids.add((extents, psi.cell_lengths[k]))
    if len(grids) != 1:
        raise ConfigError("interaction strength needs a shared position-space grid")


def interaction_strength(
    psi1: DiscreteWavefunction, psi2: DiscreteWavefunction, rule: MergeRule
) -> float:
    """Pairwise position-space density overlap, zero iff supports are disjoint."""
    _check_shared_geometry(psi1, psi2)
    d = psi1.spatial_dims
    total = 0.0
    for i in range(psi1.n_particles):
        g1 = project_density(psi1, i)
        m = psi1.cell_lengths[i] ** d
        for j in range(psi2.n_particles):
            g2 = project_density(psi2, j)
            overlap = float(np.sum(g1 * g2)) * m
            if rule.interaction_model == POTENTIAL_WEIGHTED_OVERLAP:
                depth, width = rule.pair_potential
                r = float(np.linalg.norm(position_mean(psi1, i) - position_mean(psi2, j)))
                overlap *= depth * math.exp(-(r**2) / (2.0 * width**2))
            total += overlap
    return total


def merge_probability(strength: float, dt: float, rule: MergeRule) -> float:
    """p = 1 - exp(-kappa * strength * dt), monotone in both arguments."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if strength < 0:
        raise ConfigError("interaction strength cannot be negative")
    return 1.0 - math.exp(-rule.coupling_scale * strength * dt)


def merge(
    psi1: DiscreteWavefunction,
    psi2: DiscreteWavefunction,
    *,
    max_cells: int = 1 << 22,
    quant: QuantizationParams | None = None,
) -> DiscreteWavefunction:
    """Symmetrized product state of two wavefunctions, renormalized and quantized."""
    if psi1.spatial_dims != psi2.spatial_dims:
        raise ConfigError("cannot merge wavefunctions of different spatial dimensionality")
    q = quant if quant is not None else psi1.quant
    if quant is None and (
        psi1.quant.base_magnitude != psi2.quant.base_magnitude
        or psi1.quant.base_phase != psi2.quant.base_phase
    ):
        raise ConfigError("merging states with different value lattices needs an explicit quant")
    cells = int(np.prod(psi1.grid_extents)) * int(np.prod(psi2.grid_extents))
    if cells > max_cells:
        raise MemoryBudgetError(
            f"merged grid would hold {cells} cells, over the {max_cells}-cell budget"
        )
    product = np.multiply.outer(psi1.amplitudes, psi2.amplitudes)
    combined = DiscreteWavefunction(
        particles=psi1.particles + psi2.particles,
        spatial_dims=psi1.spatial_dims,
        amplitudes=product,
        quant=q,
        cell_lengths=psi1.cell_lengths + psi2.cell_lengths,
    )
    return quantize(symmetrize(normalize(combined)), q)


def _contiguous_bipartitions(n: int, limit: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    cuts = [(tuple(range(i + 1)), tuple(range(i + 1, n))) for i in range(n - 1)]
    return cuts[:limit]


def _schmidt_matrix(
    psi: DiscreteWavefunction, part_a: tuple[int, ...], part_b: tuple[int, ...]
) -> np.ndarray:
    """Unfold psi into a (dim A, dim B) matrix with cell measures folded in.

    Rows/columns carry sqrt(measure), so singular values are the Schmidt
    coefficients of the unit-norm state and sum(sigma^2) = 1.
    """
    if sorted(part_a + part_b) != list(range(psi.n_particles)):
        raise ConfigError("bipartition must partition the particle set")
    d = psi.spatial_dims
    order = [ax for k in part_a + part_b for ax in psi.particle_axes(k)]
    arr = np.transpose(psi.amplitudes, order)
    dim_a = int(np.prod([psi.grid_extents[ax] for k in part_a for ax in psi.particle_axes(k)]))
    measure_a = math.prod(psi.cell_lengths[k] ** d for k in part_a)
    measure_b = math.prod(psi.cell_lengths[k] ** d for k in part_b)
    return arr.reshape(dim_a, -1) * math.sqrt(measure_a * measure_b)


def split_candidates(psi: DiscreteWavefunction, rule: SplitRule) -> list[SplitCandidate]:
    """Score contiguous bipartitions by leading Schmidt weight, best first."""
    if psi.n_particles < 2:
        raise ConfigError("splitting needs at least two particles")
    out = []
    for part_a, part_b in _contiguous_bipartitions(psi.n_particles, rule.max_partitions_examined):
        sigma = np.linalg.svd(_schmidt_matrix(psi, part_a, part_b), compute_uv=False)
        out.append(SplitCandidate(part_a, part_b, float(sigma[0] ** 2)))
    out.sort(key=lambda c: c.score, reverse=True)
    return out


def _factor_state(
    psi: DiscreteWavefunction, members: tuple[int, ...], vector: np.ndarray
) -> DiscreteWavefunction:
    extents = tuple(psi.grid_extents[ax] for k in members for ax in psi.particle_axes(k))
    measure = math.prod(psi.cell_lengths[k] ** psi.spatial_dims for k in members)
    arr = vector.reshape(extents) / math.sqrt(measure)
    factor = DiscreteWavefunction(
        particles=tuple(psi.particles[k] for k in members),
        spatial_dims=psi.spatial_dims,
        amplitudes=arr,
        quant=psi.quant,
        cell_lengths=tuple(psi.cell_lengths[k] for k in members),
    )
    return quantize(normalize(factor))


def split(
    psi: DiscreteWavefunction,
    bipartition: tuple[tuple[int, ...], tuple[int, ...]],
    rule: SplitRule,
) -> tuple[DiscreteWavefunction, DiscreteWavefunction, float]:
    """Truncate to the leading Schmidt pair of the bipartition.

    Returns the two factors (each renormalized and quantized) and the
    fidelity |<A x B|psi>|^2, which equals the top Schmidt weight.  Refuses
    bipartitions scoring below 1 - eta.
    """
    part_a, part_b = bipartition
    matrix = _schmidt_matrix(psi, tuple(part_a), tuple(part_b))
    u, sigma, vh = np.linalg.svd(matrix, full_matrices=False)
    score = float(sigma[0] ** 2)
    if score < 1.0 - rule.factorizability_threshold:
        raise SplitRefusalError(
            f"leading Schmidt weight {score:.6f} below the "
            f"{1.0 - rule.factorizability_threshold:.6f} qualifying bound"
        )
    left = u[:, 0]
    right = vh[0, :]
    # Pin the global phase for reproducibility; the product is unchanged.
    anchor = left[int(np.argmax(np.abs(left)))]
    phase = anchor / abs(anchor)
    left = left / phase
    right = right * phase
    psi_a = _factor_state(psi, tuple(part_a), left)
    psi_b = _factor_state(psi, tuple(part_b), right)
    return psi_a, psi_b, score


def step_world(
    world: WorldState,
    dt: float,
    *,
    potential: PotentialSpec,
    evolution: EvolutionConfig,
    merge_rule: MergeRule,
    split_rule: SplitRule,
    ccqm: CCQMParams,
    quant: QuantizationParams,
    rng: np.random.Generator,
    max_merge_cells: int = 1 << 22,
) -> WorldState:
    """Advance the world by dt: evolve, merge, then split-or-collapse.

    Each wavefunction evolves independently; every unordered pair is then
    offered one merge draw (a wavefunction merges at most once per step);
    finally any wavefunction at or above the critical volume attempts a
    split with the configured probability and otherwise collapses.  Events
    are appended in deterministic order, so a fixed seed replays exactly.
    """
    n_steps = max(1, int(round(dt / evolution.dt)))
    t_next = world.time + dt
    states = [evolve(w, potential, evolution, n_steps) for w in world.wavefunctions]
    events: list[CollapseEvent] = []

    merged_away: set[int] = set()
    next_states: list[DiscreteWavefunction] = list(states)
    for i in range(len(states)):
        if i in merged_away:
            continue
        for j in range(i + 1, len(states)):
            if i in merged_away or j in merged_away:
                continue
            strength = interaction_strength(next_states[i], next_states[j], merge_rule)
            p = merge_probability(strength, dt, merge_rule)
            if rng.random() < p:
                qi = quantize(next_states[i], quant)
                qj = quantize(next_states[j], quant)
                combined = merge(next_states[i], next_states[j], max_cells=max_merge_cells, quant=quant)
                events.append(
                    CollapseEvent(
                        time=t_next,
                        kind="merge",
                        v_pre=relative_volume(qi) * relative_volume(qj),
                        v_post=relative_volume(combined),
                        rng_draws=1,
                    )
                )
                next_states[i] = combined
                merged_away.add(j)
                break

    survivors = [s for idx, s in enumerate(next_states) if idx not in merged_away]
    final_states: list[DiscreteWavefunction] = []
    for state in survivors:
        q = state if state.quantized else quantize(state, quant)
        v = relative_volume(q)
        if v < ccqm.critical_volume:
            final_states.append(state)
            continue
        did_split = False
        if q.n_particles >= 2 and rng.random() < ccqm.split_attempt_probability:
            candidates = split_candidates(q, split_rule)
            best = candidates[0]
            if best.score >= 1.0 - split_rule.factorizability_threshold:
                psi_a, psi_b, fidelity = split(q, (best.partition_a, best.partition_b), split_rule)
                events.append(
                    CollapseEvent(
                        time=t_next,
                        kind="split",
                        v_pre=v,
                        v_post=relative_volume(psi_a) * relative_volume(psi_b),
                        fidelity=fidelity,
                        rng_draws=1,
                    )
                )
                final_states.extend([psi_a, psi_b])
                did_split = True
        if not did_split:
            collapsed, event = ccqm_collapse(q, ccqm, quant, rng, time=t_next)
            events.append(event)
            final_states.append(collapsed)

    new_world = WorldState(
        wavefunctions=tuple(final_states),
        event_log=world.event_log + tuple(events),
        time=t_next,
        rng_seed=world.rng_seed,
    )
    if new_world.particle_census() != world.particle_census():
        raise RuntimeError("particle census changed during step_world; this is a bug")
    return new_world
