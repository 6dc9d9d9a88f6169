"""Benjamin-Ono reduction for an internal wave beneath a flat lid, with a uniform current and piecewise-constant vorticity."""

from .model_params import DerivedCoeffs, FluidStack, SolitonParams, derive, soliton_params
from .spectral import PeriodicGrid

__all__ = ["DerivedCoeffs", "FluidStack", "PeriodicGrid", "SolitonParams", "derive", "soliton_params"]
