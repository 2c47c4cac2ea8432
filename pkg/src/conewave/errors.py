"""Exception hierarchy shared by every module of the package."""


class ConewaveError(Exception):
    """Base class for all errors raised by the package."""


class AtomOutsideSector(ConewaveError, ValueError):
    """A frequency atom lies outside the sector or the dyadic band of its wave."""


class OffLattice(ConewaveError, ValueError):
    """A frequency is not an integer multiple of ``1/period``."""


class EmptyWave(ConewaveError, ValueError):
    """The operation needs at least one atom."""


class MixedDomains(ConewaveError, ValueError):
    """Two waves live on incompatible tori."""


class UnboundedRegion(ConewaveError, ValueError):
    """Quadrature was requested over a region with no bounding box."""


class RegionExceedsTorus(ConewaveError, ValueError):
    """A region is too large to be represented on the periodic torus."""


class MarginTooSmall(ConewaveError, ValueError):
    """A wave does not have enough margin for the requested projection."""


class DiskTooSmall(ConewaveError, ValueError):
    """A disk radius is below the admissible scale."""


class GridTooCoarse(ConewaveError, ValueError):
    """The sampling grid cannot resolve the requested length scale."""


class RowSumViolation(ConewaveError, ValueError):
    """Assignment weights of a tube do not sum to one."""


class SingularSymbol(ConewaveError, ValueError):
    """A negative power of a vanishing multiplier symbol was requested."""


class NegativeL(ConewaveError, ValueError):
    """The rescaling index must be a non-negative integer."""


class EnergyNotNormalized(ConewaveError, ValueError):
    """A family member does not have unit energy."""


class InfeasibleSpec(ConewaveError, ValueError):
    """A random family specification cannot be satisfied on the lattice."""


class ConfigError(ConewaveError, ValueError):
    """Invalid experiment configuration."""
