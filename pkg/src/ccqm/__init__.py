"""Discrete-wavefunction collapse laboratory.

Quantized wavefunctions on configuration-space grids, unitary propagation,
critical-volume collapse with a GRW baseline, wavefunction merging and
splitting, and SI calculators for the starlight and CMB observational
constraints.
"""

from .astro import (
    CMBModel,
    ConstraintReport,
    PhotonShellModel,
    SpectrumTable,
    perturbed_spectrum,
    planck_number_density,
    temperature_fluctuation,
    temperature_shift_factor,
)
from .collapse import (
    CCQMParams,
    CollapseEvent,
    GRWParams,
    ccqm_collapse,
    ccqm_jump_factor,
    ccqm_solve_epsilon,
    grw_localize,
    grw_schedule,
    sample_collapse_center,
)
from .ensemble import (
    MergeRule,
    SplitCandidate,
    SplitRule,
    WorldState,
    interaction_strength,
    merge,
    merge_probability,
    split,
    split_candidates,
    step_world,
)
from .evolution import (
    CRANK_NICOLSON,
    SPLIT_STEP,
    EvolutionConfig,
    FreePotential,
    HarmonicPotential,
    PairGaussianWell,
    TabulatedPotential,
    evolve,
    spread_until_volume,
)
from .wavefunction import (
    DiscreteWavefunction,
    FixedCell,
    ParticleMeta,
    QuantizationParams,
    Statistics,
    VariableCell,
    from_array,
    normalize,
    project_density,
    quantize,
    relative_volume,
    symmetrize,
)

__version__ = "0.1.0"
