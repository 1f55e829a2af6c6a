"""Pseudo-spectral evolution and viscous spectra of ``<D>^-1 D_x2 - r beta(x)`` on the 2-torus."""

from .errors import (CapExceeded, ConfigError, FitUndefined, GridMismatch, NonFinite,
                     NonRealBeta, NotConverged, NumericalFailure, StaleCoefficients,
                     SweepBroken, TorusWavesError, ZeroXi)
from .expr import Expression, parse
from .spectral_grid import Grid, GridField, SpectralField, dft, idft, red, sobolev_norm
from .operators import OperatorSpec, apply, assemble_dense
from .evolution import EvolutionConfig, run
from .eigensolver import EigenPair, EigenSet, eig_arnoldi, eig_dense

__version__ = "0.1.0"
