"""Reeb flows on star-shaped hypersurfaces of R^4: indices, linking and sections."""
__version__ = "0.1.0"

from .errors import ConfigError, ReeblabError  # noqa: E402
from .geometry import StarShapedSystem, hopf, perturbed_split, split  # noqa: E402
from .orbits import PeriodicOrbit, axis_orbit, find_periodic_orbits, orbit_through  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "ReeblabError", "StarShapedSystem", "hopf", "perturbed_split", "split",
    "PeriodicOrbit", "axis_orbit", "find_periodic_orbits", "orbit_through",
]
