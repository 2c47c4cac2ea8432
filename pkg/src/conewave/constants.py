"""Desk-scale stand-ins for the large structural constants.

The analysis behind the toolkit uses constants that are astronomically large
(a dimension-dependent ``N`` and an absolute ``C0``).  Only the *shapes* of the
estimates are testable, so every such constant is a field here with a small
default, and every routine that needs one takes a :class:`DeskConstants`.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class DeskConstants:
    """Configuration of scale-dependent constants.

    Attributes
    ----------
    N : int
        Smoothing exponent; mollification radius is ``r**(1 - 1/N)``.
    C0 : int
        Margin/radius safety factor and default wave-table depth.
    decay_power : float
        Exponent of the polynomial cutoffs ``(1 + |x - x_D|/r)**(-decay_power)``.
    inflation : float
        Factor ``C`` inflating cone and annulus regions in the Huygens report.
    lattice_scale : int
        Spatial lattice of wave packets has spacing ``lattice_scale * r``.
    rotations : int
        Number of rotations discretizing the averaging measure on rotations.
    """

    N: int = 4
    C0: int = 2
    decay_power: float = 8.0
    inflation: float = 2.0
    lattice_scale: int = 2
    rotations: int = 8

    def as_dict(self) -> dict:
        return asdict(self)


DESK = DeskConstants()
