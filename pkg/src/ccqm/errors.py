"""Exception hierarchy.

Every error carries the CLI exit code it maps to:
2 = configuration error, 3 = numerical error, 4 = physics-domain error.
"""


class CcqmError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(CcqmError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class NumericalError(CcqmError):
    """Solver or grid failure: overflow, stall, missed bracket."""

    exit_code = 3


class PhysicsError(CcqmError):
    """Physically meaningful terminal condition."""

    exit_code = 4


class VanishingWavefunctionError(PhysicsError):
    """Every cell magnitude rounded to zero: the state ceased to exist."""


class PauliExclusionError(PhysicsError):
    """Antisymmetrization annihilated the state."""


class GridOverflowError(NumericalError):
    """Wavefunction support reached the boundary guard band."""


class StalledEvolutionError(NumericalError):
    """Volume trace stayed flat for the whole patience window."""


class EpsilonBracketError(NumericalError):
    """Collapse-width search bracket does not straddle the target volume."""


class MemoryBudgetError(NumericalError):
    """Requested configuration-space grid exceeds the cell budget."""


class SplitRefusalError(NumericalError):
    """Requested bipartition falls below the factorizability threshold."""
