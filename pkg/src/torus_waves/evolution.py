"""Forced evolution ``i u_t - P u = f exp(-i omega0 t)``, ``u(0) = 0``, in Fourier space.

Solved for the time derivative the semi-discrete system reads

    d/dt u_hat = L u_hat + g(t, u_hat),
    L(k)       = -i k2 / <k>,
    g(t, u)    = i r F(beta F^-1 u) - i f_hat exp(-i omega0 t).

ETDRK4 treats the diagonal ``L`` exactly and ``g`` explicitly; RK4 integrates
the whole right-hand side. Both loops run on FFT-native arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GridMismatch, NonFinite, StaleCoefficients
from .expr import Expression, as_expression, sample
from .operators import OperatorSpec, coupling_native
from .spectral_grid import (REDCurve, SpectralField, dft_array, from_native, red,
                            sobolev_norm_array, to_native)

RK4_DT_MAX = 2.7
CONTOUR_POINTS = 32
SCHEMES = ("rk4", "etdrk4")


@dataclass(frozen=True, eq=False)
class EvolutionConfig:
    spec: OperatorSpec
    forcing: Expression
    dt: float = 0.1
    T: float = 1.0
    scheme: str = "etdrk4"
    snapshot_times: Sequence[float] = ()
    diagnostics: Sequence[float] = ()
    red_fit_window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "forcing", as_expression(self.forcing))
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.spec.nu != 0:
            raise ValueError("evolution requires an inviscid operator (nu = 0)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme == "rk4" and self.dt > RK4_DT_MAX:
            raise ValueError(f"rk4 is unstable for dt > {RK4_DT_MAX}")
        if self.T < self.dt:
            raise ValueError("final time T must be at least dt")


@dataclass
class EvolutionOutput:
    snapshots: List[Tuple[float, SpectralField]]
    energy_series: List[Tuple[float, float]]
    red_series: Dict[float, List[Tuple[float, REDCurve]]]
    growth_fit: Tuple[float, float, float]
    final: SpectralField


@dataclass(frozen=True, eq=False)
class EtdCoefficients:
    """Per-wavenumber ETDRK4 weights (centered storage) for one step size."""

    dt: float
    N: int
    E: np.ndarray
    E2: np.ndarray
    Q: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    contour_points: int = CONTOUR_POINTS
    native: Tuple[np.ndarray, ...] = field(default=(), repr=False)


class _System:
    """Native-order pieces of the semi-discrete right-hand side."""

    def __init__(self, cfg: EvolutionConfig):
        spec = cfg.spec
        g = spec.grid
        self.cfg = cfg
        self.grid = g
        _, k2 = g.wavenumbers
        self.L = to_native(-1j * k2 / g.bracket)
        f_vals = sample(cfg.forcing, g).values
        self.f_hat = to_native(dft_array(f_vals))
        self.r = spec.r
        self.omega0 = spec.omega0

    def g(self, t, u):
        out = (1j * self.r) * coupling_native(self.cfg.spec, u) if self.r else np.zeros_like(u)
        return out - (1j * np.exp(-1j * self.omega0 * t)) * self.f_hat

    def rhs(self, t, u):
        return self.L * u + self.g(t, u)


def _check_grid(cfg: EvolutionConfig, u: SpectralField):
    if u.grid.N != cfg.spec.grid.N:
        raise GridMismatch(f"state on N={u.grid.N}, config on N={cfg.spec.grid.N}")


def rhs(t: float, u: SpectralField, cfg: EvolutionConfig) -> SpectralField:
    """Time derivative of the coefficients at state ``u`` and time ``t``."""
    _check_grid(cfg, u)
    sysm = _System(cfg)
    return SpectralField(u.grid, from_native(sysm.rhs(t, to_native(u.coeffs))))


def _rk4_native(sysm: _System, t, u, dt):
    k1 = sysm.rhs(t, u)
    k2 = sysm.rhs(t + dt / 2, u + (dt / 2) * k1)
    k3 = sysm.rhs(t + dt / 2, u + (dt / 2) * k2)
    k4 = sysm.rhs(t + dt, u + dt * k3)
    return u + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def step_rk4(t: float, u: SpectralField, dt: float, cfg: EvolutionConfig) -> SpectralField:
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_grid(cfg, u)
    out = _rk4_native(_System(cfg), t, to_native(u.coeffs), dt)
    return SpectralField(u.grid, from_native(out))


def contour_points(z: np.ndarray, M: int = CONTOUR_POINTS) -> np.ndarray:
    """``M`` points on the unit circle around each entry of ``z`` (trailing axis)."""
    theta = 2 * np.pi * (np.arange(1, M + 1) - 0.5) / M
    return np.asarray(z, dtype=complex)[..., None] + np.exp(1j * theta)


def phi_functions(z, M: int = CONTOUR_POINTS):
    """``phi_1, phi_2, phi_3`` by contour averaging (safe at ``z = 0``)."""
    w = contour_points(z, M)
    ew = np.exp(w)
    phi1 = ((ew - 1) / w).mean(-1)
    phi2 = ((ew - 1 - w) / w ** 2).mean(-1)
    phi3 = ((ew - 1 - w - w ** 2 / 2) / w ** 3).mean(-1)
    return phi1, phi2, phi3


def etd_weights(z, dt: float, M: int = CONTOUR_POINTS):
    """Kassam-Trefethen weights ``(Q, f1, f2, f3)`` for ``z = L dt``."""
    w = contour_points(z, M)
    ew = np.exp(w)
    Q = dt * ((np.exp(w / 2) - 1) / w).mean(-1)
    f1 = dt * ((-4 - w + ew * (4 - 3 * w + w ** 2)) / w ** 3).mean(-1)
    f2 = dt * ((2 + w + ew * (w - 2)) / w ** 3).mean(-1)
    f3 = dt * ((-4 - 3 * w - w ** 2 + ew * (4 - w)) / w ** 3).mean(-1)
    return Q, f1, f2, f3


def precompute_etdrk4(cfg: EvolutionConfig, dt: float, M: int = CONTOUR_POINTS) -> EtdCoefficients:
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = cfg.spec.grid
    _, k2 = g.wavenumbers
    L = -1j * k2 / g.bracket
    z = L * dt
    Q, f1, f2, f3 = etd_weights(z, dt, M)
    E = np.exp(z)
    E2 = np.exp(z / 2)
    native = tuple(to_native(a) for a in (E, E2, Q, f1, f2, f3))
    return EtdCoefficients(dt=float(dt), N=g.N, E=E, E2=E2, Q=Q, f1=f1, f2=f2, f3=f3,
                           contour_points=M, native=native)


def _etdrk4_native(sysm: _System, t, u, dt, coeffs: EtdCoefficients):
    E, E2, Q, f1, f2, f3 = coeffs.native
    Nu = sysm.g(t, u)
    a = E2 * u + Q * Nu
    Na = sysm.g(t + dt / 2, a)
    b = E2 * u + Q * Na
    Nb = sysm.g(t + dt / 2, b)
    c = E2 * a + Q * (2 * Nb - Nu)
    Nc = sysm.g(t + dt, c)
    return E * u + f1 * Nu + 2 * f2 * (Na + Nb) + f3 * Nc


def _check_coeffs(coeffs: EtdCoefficients, dt: float, N: int):
    if coeffs.N != N or not math.isclose(coeffs.dt, dt, rel_tol=1e-14, abs_tol=0.0):
        raise StaleCoefficients(f"coefficients built for dt={coeffs.dt}, N={coeffs.N}; "
                                f"step requested dt={dt}, N={N}")


def step_etdrk4(t: float, u: SpectralField, dt: float, coeffs: EtdCoefficients,
                cfg: EvolutionConfig) -> SpectralField:
    _check_grid(cfg, u)
    _check_coeffs(coeffs, dt, u.grid.N)
    out = _etdrk4_native(_System(cfg), t, to_native(u.coeffs), dt, coeffs)
    return SpectralField(u.grid, from_native(out))


def linear_fit(t, y) -> Tuple[float, float, float]:
    """OLS line through ``(t, y)``; returns ``(slope, intercept, R^2)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        return (float("nan"), float("nan"), float("nan"))
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return float(slope), float(intercept), r2


def step_schedule(dt: float, T: float) -> List[float]:
    """Step sizes covering ``[0, T]``: full ``dt`` steps plus a shorter last one if needed."""
    n_full = int(math.floor(T / dt + 1e-9))
    steps = [dt] * n_full
    rest = T - n_full * dt
    if rest > 1e-9 * max(T, 1.0):
        steps.append(rest)
    return steps


def run(cfg: EvolutionConfig, record_energy: bool = True) -> EvolutionOutput:
    """Integrate from ``u = 0`` at ``t = 0`` to ``T``."""
    sysm = _System(cfg)
    g = cfg.spec.grid
    u = np.zeros((g.N, g.N), dtype=complex)
    steps = step_schedule(cfg.dt, cfg.T)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    snap_at: Dict[int, List[float]] = {}
    for ts in cfg.snapshot_times:
        if ts < 0 or ts > cfg.T + 1e-12:
            raise ValueError(f"snapshot time {ts} outside [0, T]")
        idx = int(np.argmin(np.abs(times - ts)))
        snap_at.setdefault(idx, []).append(float(ts))

    coeffs = {}

    def coeffs_for(h):
        key = round(h, 15)
        if key not in coeffs:
            coeffs[key] = precompute_etdrk4(cfg, h)
        return coeffs[key]

    snapshots: List[Tuple[float, SpectralField]] = []
    energy: List[Tuple[float, float]] = []

    def record(i, state):
        if record_energy:
            energy.append((float(times[i]), sobolev_norm_array(state, g, 0.0) ** 2))
        if i in snap_at:
            field_ = SpectralField(g, from_native(state))
            for _ in snap_at[i]:
                snapshots.append((float(times[i]), field_))

    record(0, u)
    t = 0.0
    # overflow is reported as NonFinite below rather than as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i, h in enumerate(steps, start=1):
            if cfg.scheme == "rk4":
                u = _rk4_native(sysm, t, u, h)
            else:
                u = _etdrk4_native(sysm, t, u, h, coeffs_for(h))
            t = float(times[i])
            finite = bool(np.all(np.isfinite(u)))
            if finite:
                record(i, u)
            if not finite or (energy and not np.isfinite(energy[-1][1])):
                raise NonFinite(f"non-finite solution at t = {t:g} "
                                f"(scheme {cfg.scheme}, dt {h:g})")

    red_series: Dict[float, List[Tuple[float, REDCurve]]] = {}
    for s in cfg.diagnostics:
        red_series[float(s)] = [(ts, red(f, s, cfg.red_fit_window)) for ts, f in snapshots]

    if energy:
        et = np.array([e[0] for e in energy])
        ev = np.array([e[1] for e in energy])
        late = et >= cfg.T / 2 - 1e-12
        growth = linear_fit(et[late], ev[late])
    else:
        growth = (float("nan"),) * 3
    return EvolutionOutput(snapshots=snapshots, energy_series=energy, red_series=red_series,
                           growth_fit=growth, final=SpectralField(g, from_native(u)))
