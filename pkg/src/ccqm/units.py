"""Physical constants and unit conventions.

Grid dynamics (wavefunction, evolution, collapse, ensemble) run in natural
units with hbar = 1; masses, lengths and times are whatever consistent
scale the caller chooses.  The astrophysics calculators work in SI
throughout and are the only code that touches dimensional constants.
"""

from scipy.constants import c as SPEED_OF_LIGHT  # m / s
from scipy.constants import h as PLANCK_CONSTANT  # J s
from scipy.constants import k as BOLTZMANN_CONSTANT  # J / K

# Pinned so length conversions are reproducible to the digit.
LIGHT_YEAR = 9.4607e15  # m

__all__ = [
    "SPEED_OF_LIGHT",
    "PLANCK_CONSTANT",
    "BOLTZMANN_CONSTANT",
    "LIGHT_YEAR",
]
