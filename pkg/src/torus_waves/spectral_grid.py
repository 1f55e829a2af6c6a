"""Discrete torus geometry, centered DFT, discrete Sobolev norms and radial energy density.

Storage convention
------------------
Both physical samples and Fourier coefficients are stored as ``N x N`` complex
arrays in *centered* order: array index ``i`` along an axis corresponds to the
node ``j = i - N/2`` (physical) or to the wavenumber ``k = i - N/2`` (spectral).
Row index is the first coordinate (``x1`` / ``k1``), column index the second.

The transforms follow the unnormalized convention

    u_hat(k) = sum_j u(x_j) exp(-2 pi i k.j / N),
    u(x_j)   = N^-2 sum_k u_hat(k) exp(+2 pi i k.j / N),

with ``x_j = 2 pi j / N`` and ``j, k`` ranging over ``-N/2 .. N/2-1``.
FFT-native (non-centered) ordering only ever appears inside this module and in
the hot loops that explicitly ask for it via :func:`to_native`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft as sfft

from .errors import FitUndefined, GridMismatch

GRID_MAGIC = b"TWGRID1\x00"


@dataclass(frozen=True)
class Grid:
    """Uniform ``N x N`` mesh on the 2-torus ``[-pi, pi)^2``."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.N

    @cached_property
    def indices(self) -> np.ndarray:
        """Signed node / wavenumber labels ``-N/2 .. N/2-1`` in storage order."""
        return np.arange(-self.N // 2, self.N // 2)

    @cached_property
    def nodes(self) -> np.ndarray:
        """1-D node coordinates ``x = 2 pi j / N``."""
        return 2.0 * np.pi * self.indices / self.N

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(X1, X2)`` node coordinates, ``X1`` varying along rows."""
        return np.meshgrid(self.nodes, self.nodes, indexing="ij")

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(K1, K2)`` integer wavenumbers in centered storage order."""
        return np.meshgrid(self.indices, self.indices, indexing="ij")

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return (k1 * k1 + k2 * k2).astype(float)

    @cached_property
    def bracket(self) -> np.ndarray:
        """Japanese bracket ``<k> = (1 + |k|^2)^(1/2)`` on the wavenumber box."""
        return np.sqrt(1.0 + self.k_squared)

    def index_of(self, k1: int, k2: int) -> Tuple[int, int]:
        """Storage index of wavenumber (or node label) ``(k1, k2)``."""
        half = self.N // 2
        if not (-half <= k1 < half and -half <= k2 < half):
            raise IndexError(f"({k1}, {k2}) outside the {self.N}-point box")
        return k1 + half, k2 + half


def _as_field_array(values, grid: Grid, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.shape != (grid.N, grid.N):
        raise ValueError(f"{what} must have shape {(grid.N, grid.N)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex samples on the physical mesh."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_field_array(self.values, self.grid, "values"))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Centered Fourier coefficients on the wavenumber box."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_field_array(self.coeffs, self.grid, "coeffs"))

    def at(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[self.grid.index_of(k1, k2)])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scale(self, c: complex) -> "SpectralField":
        return SpectralField(self.grid, c * self.coeffs)


def check_same_grid(a: Grid, b: Grid) -> None:
    if a.N != b.N:
        raise GridMismatch(f"grid N={a.N} does not match grid N={b.N}")


# --- FFT-order helpers -----------------------------------------------------

def to_native(arr: np.ndarray) -> np.ndarray:
    """Centered storage -> FFT-native order (index 0 is node/wavenumber 0)."""
    return np.fft.ifftshift(arr, axes=(-2, -1))


def from_native(arr: np.ndarray) -> np.ndarray:
    """FFT-native order -> centered storage."""
    return np.fft.fftshift(arr, axes=(-2, -1))


def dft_array(values: np.ndarray) -> np.ndarray:
    """Centered DFT of a centered sample array (no validation)."""
    return from_native(sfft.fft2(to_native(values)))


def idft_array(coeffs: np.ndarray) -> np.ndarray:
    """Centered inverse DFT of a centered coefficient array (no validation)."""
    return from_native(sfft.ifft2(to_native(coeffs)))


def dft(field: GridField) -> SpectralField:
    return SpectralField(field.grid, dft_array(field.values))


def idft(spec: SpectralField) -> GridField:
    return GridField(spec.grid, idft_array(spec.coeffs))


# --- norms and radial energy density ---------------------------------------

def sobolev_norm_array(coeffs: np.ndarray, grid: Grid, s: float = 0.0) -> float:
    weights = grid.bracket ** (2.0 * s)
    total = np.sum(weights * (coeffs.real ** 2 + coeffs.imag ** 2))
    return float(np.sqrt(grid.h ** 2 / grid.N ** 2 * total))


def sobolev_norm(spec: SpectralField, s: float = 0.0) -> float:
    """Discrete H^s norm ``sqrt(h^2/N^2 sum_k <k>^(2s) |u_hat(k)|^2)``."""
    return sobolev_norm_array(spec.coeffs, spec.grid, s)


@dataclass(frozen=True)
class REDCurve:
    s: float
    radii: np.ndarray
    values: np.ndarray
    fitted_slope: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None


def annulus_labels(grid: Grid) -> np.ndarray:
    """Annulus radius ``R`` that each wavenumber falls in (``R-2 <= |k| < R``).

    Wavenumbers with ``|k| >= N/2`` get label 0 and belong to no annulus.
    """
    kabs = np.sqrt(grid.k_squared)
    # exact integer test avoids sqrt rounding at lattice points with |k| even
    labels = 2 * (np.floor(kabs / 2.0).astype(int) + 1)
    k2 = grid.k_squared.astype(np.int64)
    # correct floor errors: need (R-2)^2 <= |k|^2 < R^2
    too_high = (labels - 2) ** 2 > k2
    labels[too_high] -= 2
    too_low = labels ** 2 <= k2
    labels[too_low] += 2
    labels[labels > grid.N // 2] = 0
    return labels


def fit_loglog_slope(radii: Sequence[float], values: Sequence[float],
                     window: Tuple[float, float]) -> float:
    """OLS slope of ``log10(values)`` against ``log10(radii)`` inside ``window``."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    use = (radii >= lo) & (radii <= hi) & (values > 0)
    if np.count_nonzero(use) < 2:
        raise FitUndefined(f"fewer than 2 positive samples in radius window [{lo}, {hi}]")
    slope, _ = np.polyfit(np.log10(radii[use]), np.log10(values[use]), 1)
    return float(slope)


def red(spec: SpectralField, s: float = 0.0,
        fit_window: Optional[Tuple[float, float]] = None) -> REDCurve:
    """Radial energy density ``E_s(R)`` for ``R = 2, 4, ..., N/2``.

    If ``fit_window = (Rmin, Rmax)`` is given, the log-log slope over radii in
    that window with positive energy is attached; otherwise ``fitted_slope`` is
    ``None``.
    """
    grid = spec.grid
    labels = annulus_labels(grid)
    weighted = grid.bracket ** (2.0 * s) * np.abs(spec.coeffs) ** 2
    radii = np.arange(2, grid.N // 2 + 1, 2)
    sums = np.bincount(labels.ravel(), weights=weighted.ravel(), minlength=grid.N // 2 + 1)
    values = sums[radii] / grid.N ** 2
    slope = None
    if fit_window is not None:
        slope = fit_loglog_slope(radii, values, fit_window)
    return REDCurve(s=float(s), radii=radii, values=values, fitted_slope=slope,
                    fit_window=None if fit_window is None else tuple(map(float, fit_window)))


# --- binary dump ------------------------------------------------------------

def write_grid_dump(path, field) -> Path:
    """Write a GridField or SpectralField as ``TWGRID1`` binary."""
    arr = field.values if isinstance(field, GridField) else field.coeffs
    n = field.grid.N
    path = Path(path)
    pairs = np.empty((n, n, 2), dtype="<f8")
    pairs[..., 0] = arr.real
    pairs[..., 1] = arr.imag
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(pairs.tobytes(order="C"))
    return path


def read_grid_dump(path) -> Tuple[Grid, np.ndarray]:
    """Read a ``TWGRID1`` file; returns the grid and the complex array."""
    data = Path(path).read_bytes()
    if data[:8] != GRID_MAGIC:
        raise ValueError(f"{path}: not a TWGRID1 file")
    (n,) = struct.unpack("<I", data[8:12])
    expected = 12 + 16 * n * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    pairs = np.frombuffer(data, dtype="<f8", offset=12).reshape(n, n, 2)
    return Grid(n), pairs[..., 0] + 1j * pairs[..., 1]
