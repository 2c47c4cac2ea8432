"""Numerical toolkit for frequency-localized wave solutions and bilinear estimates.

Submodules
----------
waves         red/blue waves as exact atom sums on a torus
geometry      disks, cubes, cone neighbourhoods, tubes, interior sets, quadrature
localization  smoothing kernel, disk projections, cutoff and Huygens reports
packets       wave-packet (tube) decomposition, wave tables, quilts
bilinear      bilinear norms, cone energy, low dispersion, k-scaling experiments
nullform      product spectra, null-form multipliers, Lorentz rescaling, exponents
"""
from .constants import DESK, DeskConstants
from .waves import (
    Color, FrequencyAtom, TorusDomain, Wave, angular_dispersion, dilate, energy,
    evaluate, make_wave, margin, time_reverse,
)

__all__ = [
    "DESK", "DeskConstants", "Color", "FrequencyAtom", "TorusDomain", "Wave",
    "angular_dispersion", "dilate", "energy", "evaluate", "make_wave", "margin",
    "time_reverse",
]
__version__ = "0.1.0"
