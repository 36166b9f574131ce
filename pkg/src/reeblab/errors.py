"""Exception hierarchy shared by all reeblab modules."""


class ReeblabError(Exception):
    """Base class for computation errors (CLI exit status 1)."""


class ConfigError(ReeblabError):
    """Malformed scenario configuration (CLI exit status 2)."""


# geometry
class GeometryError(ReeblabError):
    pass


class DegenerateGradient(GeometryError):
    pass


class FrameDegenerate(GeometryError):
    pass


class NotTangent(GeometryError):
    pass


class ReebCheckFailed(GeometryError):
    """Reeb postcondition failed; usually a non-homogeneous custom Hamiltonian."""


# flow
class FlowError(ReeblabError):
    pass


class StepFailure(FlowError):
    pass


class GridTooCoarse(FlowError):
    pass


# orbits
class OrbitError(ReeblabError):
    pass


class NewtonDivergence(OrbitError):
    pass


class EmptyResult(OrbitError):
    pass


# spectral
class SpectralError(ReeblabError):
    pass


class NonSymmetricCoefficient(SpectralError):
    pass


class WindingNotInteger(SpectralError):
    pass


class WindowUnresolved(SpectralError):
    pass


class WindowTooNarrow(SpectralError):
    pass


class GapStraddle(SpectralError):
    pass


class SpectrumNotConverged(SpectralError):
    pass


class SlowConvergence(SpectralError):
    pass


class DegenerateSystem(ReeblabError):
    pass


# knots
class KnotError(ReeblabError):
    pass


class CurvesTooClose(KnotError):
    pass


class DegenerateProjection(KnotError):
    pass


class EpsilonInstability(KnotError):
    pass


class ComponentsIntersect(KnotError):
    pass


# cycles
class CycleError(ReeblabError):
    pass


class NonTransverseCrossing(CycleError):
    pass


class NoRecurrence(CycleError):
    pass


class ChordCrossesLink(CycleError):
    pass


# sections
class SectionError(ReeblabError):
    pass


class NotSplitSystem(SectionError):
    pass


class StokesMismatch(SectionError):
    pass
