"""The operator ``P(x, D) - omega0 + i nu Laplacian`` on the discrete torus.

``P = <D>^-1 D_x2 - r beta(x)`` with a real potential ``beta``. In Fourier
space the first term is the diagonal multiplier ``k2 / <k>``; the potential
acts by pseudo-spectral multiplication ``F(beta F^-1 u_hat)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np
import scipy.fft as sfft

from .errors import CapExceeded, NonRealBeta
from .expr import Expression, as_expression, sample
from .spectral_grid import (Grid, GridField, SpectralField, check_same_grid, dft,
                            from_native, to_native)

DENSE_CAP_N = 96
BETA_IMAG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Parameters of ``P - omega0 + i nu Laplacian`` on a given grid.

    ``beta`` may be given as source text; samples and coefficients of the
    potential are cached at construction.
    """

    grid: Grid
    r: float
    beta: Expression
    omega0: float = 0.0
    nu: float = 0.0
    beta_samples: GridField = field(init=False, repr=False)
    beta_hat: SpectralField = field(init=False, repr=False)

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"potential strength r must be >= 0, got {self.r}")
        if self.nu < 0:
            raise ValueError(f"viscosity nu must be >= 0, got {self.nu}")
        beta = as_expression(self.beta)
        samples = sample(beta, self.grid)
        if np.max(np.abs(samples.values.imag)) > BETA_IMAG_TOL:
            raise NonRealBeta(f"beta = {beta.text!r} is not real on the grid")
        samples = GridField(self.grid, samples.values.real)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "beta_samples", samples)
        object.__setattr__(self, "beta_hat", dft(samples))
        # native-order copies for the FFT hot path
        object.__setattr__(self, "_beta_native", to_native(samples.values.real))
        object.__setattr__(self, "_multiplier", multiplier_array(self))
        object.__setattr__(self, "_multiplier_native", to_native(self._multiplier))

    def with_params(self, **changes) -> "OperatorSpec":
        """Copy with some of ``grid, r, beta, omega0, nu`` replaced."""
        return replace(self, **changes)

    @property
    def multiplier_values(self) -> np.ndarray:
        return self._multiplier


def multiplier(k: Tuple[int, int], spec: OperatorSpec) -> complex:
    """Diagonal symbol ``k2/<k> - omega0 - i nu |k|^2`` at one wavenumber."""
    k1, k2 = k
    ksq = k1 * k1 + k2 * k2
    return complex(k2 / np.sqrt(1.0 + ksq) - spec.omega0, -spec.nu * ksq)


def multiplier_array(spec: OperatorSpec) -> np.ndarray:
    g = spec.grid
    _, k2 = g.wavenumbers
    return k2 / g.bracket - spec.omega0 - 1j * spec.nu * g.k_squared


def coupling_native(spec: OperatorSpec, u_native: np.ndarray) -> np.ndarray:
    """``F(beta F^-1 u)`` with everything in FFT-native order."""
    return sfft.fft2(spec._beta_native * sfft.ifft2(u_native))


def apply_native(spec: OperatorSpec, u_native: np.ndarray) -> np.ndarray:
    return spec._multiplier_native * u_native - spec.r * coupling_native(spec, u_native)


def apply(spec: OperatorSpec, u: SpectralField) -> SpectralField:
    """Matrix-free application of the operator to centered coefficients."""
    check_same_grid(spec.grid, u.grid)
    out = apply_native(spec, to_native(u.coeffs))
    return SpectralField(spec.grid, from_native(out))


def check_dense_cap(grid: Grid, cap: int = DENSE_CAP_N) -> None:
    if grid.N > cap:
        raise CapExceeded(f"dense assembly needs N <= {cap}, got N = {grid.N}")


def assemble_dense(spec: OperatorSpec, cap: int = DENSE_CAP_N) -> np.ndarray:
    """Dense ``N^2 x N^2`` matrix acting on row-major flattened centered coefficients.

    ``A[k, k'] = m(k) delta_{kk'} - (r / N^2) beta_hat(k - k')`` with the
    wavenumber difference wrapped periodically into the box.
    """
    g = spec.grid
    check_dense_cap(g, cap)
    n = g.N
    beta_native = to_native(spec.beta_hat.coeffs)
    idx = np.arange(n)
    diff = (idx[:, None] - idx[None, :]) % n
    # A4[i1, i2, j1, j2] = beta_hat(k - k') ; broadcasting avoids N^4 index arrays
    mat = beta_native[diff[:, None, :, None], diff[None, :, None, :]]
    mat = mat.reshape(n * n, n * n)
    mat *= -spec.r / n ** 2
    mat[np.diag_indices(n * n)] += spec.multiplier_values.ravel()
    return mat


def essential_band(spec: OperatorSpec) -> Tuple[float, float]:
    """Interval containing the essential spectrum of ``P`` (inviscid, unshifted)."""
    if spec.nu != 0:
        raise ValueError("essential_band is defined for nu = 0")
    b = spec.beta_samples.values.real
    return (-1.0 - spec.r * float(b.max()), 1.0 - spec.r * float(b.min()))
