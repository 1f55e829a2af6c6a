"""Convergence studies in time, in space (locally) and for eigenvalues.

* time: fixed ``N``, step sizes ``dt_list`` for RK4 and ETDRK4, errors at
  ``T`` in the discrete L2 norm against an ETDRK4 run with ``reference_dt``.
* space: fixed ``dt``, grids ``N_list``; the error is the discrete L2 norm on
  the nodes of ``[-pi/4, pi/4]^2`` against a run on ``reference_N`` points,
  compared on the shared nodes (no interpolation).
* eig: the first ``m`` eigenvalues on each grid against a reference grid;
  every reference eigenvalue is matched to its nearest computed value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .eigensolver import eig_arnoldi, eig_dense
from .evolution import EvolutionConfig, run
from .operators import OperatorSpec
from .spectral_grid import Grid, idft_array, sobolev_norm_array

DEFAULT_DTS = tuple(2.0 ** -j for j in range(9))
DEFAULT_REFERENCE_DT = 2.0 ** -10 * 1e-2


def fitted_order(h: Sequence[float], err: Sequence[float]) -> float:
    """OLS slope of ``log2(err)`` against ``log2(h)``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    use = err > 0
    if np.count_nonzero(use) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log2(h[use]), np.log2(err[use]), 1)
    return float(slope)


@dataclass
class TimeStudy:
    dts: List[float]
    errors: Dict[str, List[float]]
    orders: Dict[str, float]
    reference_dt: float

    def rows(self):
        for scheme, errs in self.errors.items():
            for dt, e in zip(self.dts, errs):
                yield scheme, dt, e


def time_convergence(spec: OperatorSpec, forcing, T: float = 1.0,
                     dts: Sequence[float] = DEFAULT_DTS,
                     reference_dt: float = DEFAULT_REFERENCE_DT,
                     schemes: Sequence[str] = ("rk4", "etdrk4")) -> TimeStudy:
    ref = run(EvolutionConfig(spec, forcing, dt=reference_dt, T=T), record_energy=False).final
    g = spec.grid
    errors: Dict[str, List[float]] = {}
    for scheme in schemes:
        errs = []
        for dt in dts:
            u = run(EvolutionConfig(spec, forcing, dt=dt, T=T, scheme=scheme),
                    record_energy=False).final
            errs.append(sobolev_norm_array(u.coeffs - ref.coeffs, g, 0.0))
        errors[scheme] = errs
    orders = {s: fitted_order(dts, e) for s, e in errors.items()}
    return TimeStudy(list(map(float, dts)), errors, orders, float(reference_dt))


def region_mask(grid: Grid, half_width: float = np.pi / 4) -> np.ndarray:
    X1, X2 = grid.mesh
    tol = 1e-12
    return (np.abs(X1) <= half_width + tol) & (np.abs(X2) <= half_width + tol)


def local_error(u_vals: np.ndarray, ref_vals: np.ndarray, grid: Grid,
                half_width: float = np.pi / 4) -> float:
    """Discrete L2 error on the square ``|x1|, |x2| <= half_width``.

    ``ref_vals`` lives on a finer grid whose size is a multiple of ``grid.N``;
    it is restricted to the coarse nodes by index subsetting.
    """
    stride = ref_vals.shape[0] // grid.N
    if stride * grid.N != ref_vals.shape[0]:
        raise ValueError("reference grid size must be a multiple of N")
    # centered storage: coarse index i sits at fine index stride * i
    ref_c = ref_vals[::stride, ::stride]
    mask = region_mask(grid, half_width)
    diff = (u_vals - ref_c)[mask]
    return float(np.sqrt(grid.h ** 2 * np.sum(np.abs(diff) ** 2)))


@dataclass
class SpaceStudy:
    Ns: List[int]
    errors: Dict[str, List[float]]
    reference_N: int

    def rows(self):
        for name, errs in self.errors.items():
            for n, e in zip(self.Ns, errs):
                yield name, n, e


def final_values(spec: OperatorSpec, forcing, dt: float, T: float) -> np.ndarray:
    u = run(EvolutionConfig(spec, forcing, dt=dt, T=T), record_energy=False).final
    return idft_array(u.coeffs)


def space_convergence(template: OperatorSpec, forcings: Dict[str, str],
                      Ns: Sequence[int] = (8, 16, 32, 64, 128), reference_N: int = 1024,
                      dt: float = 0.1, T: float = 10.0) -> SpaceStudy:
    ref_spec = template.with_params(grid=Grid(reference_N))
    errors: Dict[str, List[float]] = {}
    for name, f in forcings.items():
        ref = final_values(ref_spec, f, dt, T)
        errs = []
        for n in Ns:
            g = Grid(n)
            u = final_values(template.with_params(grid=g), f, dt, T)
            errs.append(local_error(u, ref, g))
        errors[name] = errs
    return SpaceStudy(list(map(int, Ns)), errors, int(reference_N))


@dataclass
class EigStudy:
    Ns: List[int]
    nus: List[float]
    reference: Dict[float, np.ndarray]
    # errors[nu][N] is an array over the reference eigenvalues
    errors: Dict[float, Dict[int, np.ndarray]] = field(default_factory=dict)

    def rows(self):
        for nu, per_n in self.errors.items():
            for n, errs in per_n.items():
                for j, e in enumerate(errs):
                    yield nu, n, j, e


def _eigenvalues(spec: OperatorSpec, m: int, tol: float) -> np.ndarray:
    if spec.grid.N <= 16:
        # tiny grids: the Krylov space would be a large share of the matrix anyway
        return eig_dense(spec, m).eigenvalues
    return eig_arnoldi(spec, m, tol=tol).eigenvalues


def nearest_errors(values: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return np.array([np.min(np.abs(values - r)) for r in reference])


def eig_convergence(template: OperatorSpec, Ns: Sequence[int] = tuple(range(12, 65, 4)),
                    reference_N: int = 80, nus: Sequence[float] = (1e-2, 1e-3), m: int = 12,
                    tol: float = 1e-10) -> EigStudy:
    study = EigStudy(list(map(int, Ns)), list(map(float, nus)), {})
    for nu in nus:
        ref = _eigenvalues(template.with_params(grid=Grid(reference_N), nu=nu), m, tol)
        study.reference[nu] = ref
        study.errors[nu] = {}
        for n in Ns:
            vals = _eigenvalues(template.with_params(grid=Grid(n), nu=nu), m, tol)
            study.errors[nu][n] = nearest_errors(vals, ref)
    return study
