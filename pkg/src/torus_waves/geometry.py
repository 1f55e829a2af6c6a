"""Energy-manifold sheets, torus coverage and phase-space flows of ``P``.

The energy manifold at frequency 0 is ``{(x, eta) : r beta(x) = sin(eta)}``
in ``T^3``. Above each ``x`` with ``|r beta(x)| <= 1`` it has the two sheets
``eta = arcsin(r beta)`` and ``pi - arcsin(r beta)``.

Two vector fields on ``T^2 x (R^2 minus 0)`` are provided, for
``pbar = xi2/|xi| - r beta(x)``:

``printed_system``
    ``dx = r |xi| grad beta``, ``dxi = (xi1 xi2, -xi1^2) / |xi|^2``.
    For ``beta = cos x1`` this reads ``dx1 = -r |xi| sin x1``.
``hamiltonian``
    ``|xi|`` times the Hamiltonian field of ``pbar``:
    ``dx = (-xi1 xi2, xi1^2) / |xi|^2``, ``dxi = r |xi| grad beta``.

Only the second one conserves ``pbar``. ``grad beta`` is obtained from the
Fourier coefficients of the sampled potential, so it is exact for
trigonometric polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import NonRealBeta, ZeroXi
from .expr import Expression, as_expression, evaluate_array
from .spectral_grid import Grid, dft_array

VARIANTS = ("printed_system", "hamiltonian")
XI_MIN = 1e-8
BETA_IMAG_TOL = 1e-12


def wrap_angle(a):
    """Wrap into ``[-pi, pi)``."""
    out = (np.asarray(a, dtype=float) + np.pi) % (2 * np.pi) - np.pi
    # the modulo can round up to exactly 2 pi
    return np.where(out >= np.pi, out - 2 * np.pi, out)


def wrap_eta(a):
    """Wrap into ``(-pi, pi]``."""
    out = np.pi - (np.pi - np.asarray(a, dtype=float)) % (2 * np.pi)
    return np.where(out <= -np.pi, out + 2 * np.pi, out)


def _real_samples(beta: Expression, x1, x2) -> np.ndarray:
    vals = evaluate_array(beta, x1, x2)
    if np.max(np.abs(vals.imag), initial=0.0) > BETA_IMAG_TOL:
        raise NonRealBeta(f"beta = {beta.text!r} takes complex values")
    return vals.real


@dataclass(frozen=True, eq=False)
class ManifoldSample:
    """Sheets of ``r beta(x) = sin(eta)`` over a ``resolution x resolution`` node grid.

    ``sheet1``/``sheet2`` hold NaN where the node is not covered. Where
    ``|r beta| = 1`` both sheets coincide.
    """

    beta: Expression
    r: float
    nodes: np.ndarray
    sheet1: np.ndarray
    sheet2: np.ndarray
    covered: np.ndarray
    rbeta: np.ndarray = field(repr=False)

    @property
    def sheet_count(self) -> np.ndarray:
        two = self.covered & (self.sheet1 != self.sheet2)
        return self.covered.astype(int) + two.astype(int)


def manifold_sheets(beta, r: float, resolution: int) -> ManifoldSample:
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    beta = as_expression(beta)
    nodes = np.linspace(-np.pi, np.pi, int(resolution), endpoint=False)
    X1, X2 = np.meshgrid(nodes, nodes, indexing="ij")
    rb = r * _real_samples(beta, X1, X2)
    covered = np.abs(rb) <= 1.0
    eta1 = np.full(rb.shape, np.nan)
    eta1[covered] = np.arcsin(rb[covered])
    eta2 = np.where(covered, wrap_eta(np.pi - eta1), np.nan)
    return ManifoldSample(beta=beta, r=float(r), nodes=nodes, sheet1=eta1, sheet2=eta2,
                          covered=covered, rbeta=rb)


def coverage(beta, r: float, resolution: int) -> Tuple[float, np.ndarray]:
    """Fraction of nodes over which the manifold has a sheet, and the hole mask."""
    ms = manifold_sheets(beta, r, resolution)
    return float(np.mean(ms.covered)), ~ms.covered


# --- phase space -------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    x: Tuple[float, float]
    xi: Tuple[float, float]

    def __post_init__(self):
        x = tuple(float(v) for v in wrap_angle(np.asarray(self.x, dtype=float)))
        xi = tuple(float(v) for v in self.xi)
        if np.hypot(*xi) < XI_MIN:
            raise ZeroXi(f"|xi| = {np.hypot(*xi):.3e} below {XI_MIN}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    def as_array(self) -> np.ndarray:
        return np.array([*self.x, *self.xi])


class FourierPotential:
    """Trigonometric interpolant of ``beta`` and its gradient at arbitrary points.

    Built from the coefficients of the samples on an ``N x N`` grid; only
    modes above ``cutoff`` (relative) are kept.
    """

    def __init__(self, beta, N: int = 64, cutoff: float = 1e-14):
        self.beta = as_expression(beta)
        g = Grid(N)
        X1, X2 = g.mesh
        vals = _real_samples(self.beta, X1, X2)
        coeffs = dft_array(vals) / N ** 2
        K1, K2 = g.wavenumbers
        keep = np.abs(coeffs) > cutoff * max(np.abs(coeffs).max(), 1e-300)
        # the Nyquist row/column is ambiguous for derivatives; drop it
        keep &= (np.abs(K1) < N // 2) & (np.abs(K2) < N // 2)
        self.k1 = K1[keep].astype(float)
        self.k2 = K2[keep].astype(float)
        self.c = coeffs[keep]

    def _phases(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)[..., None]
        x2 = np.asarray(x2, dtype=float)[..., None]
        return self.c * np.exp(1j * (self.k1 * x1 + self.k2 * x2))

    def value(self, x1, x2):
        return self._phases(x1, x2).sum(-1).real

    def gradient(self, x1, x2):
        e = self._phases(x1, x2)
        return (1j * self.k1 * e).sum(-1).real, (1j * self.k2 * e).sum(-1).real


@dataclass(eq=False)
class FlowField:
    variant: str
    r: float
    beta: Expression
    potential: FourierPotential = field(repr=False, default=None)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.beta = as_expression(self.beta)
        if self.potential is None:
            self.potential = FourierPotential(self.beta)

    def __call__(self, state: np.ndarray) -> np.ndarray:
        """Derivative of ``state[..., (x1, x2, xi1, xi2)]``."""
        x1, x2, a, b = np.moveaxis(np.asarray(state, dtype=float), -1, 0)
        rho2 = a * a + b * b
        if np.any(rho2 < XI_MIN ** 2):
            raise ZeroXi(f"|xi| fell below {XI_MIN}")
        rho = np.sqrt(rho2)
        g1, g2 = self.potential.gradient(x1, x2)
        push = self.r * rho
        if self.variant == "printed_system":
            d = (push * g1, push * g2, a * b / rho2, -a * a / rho2)
        else:
            d = (-a * b / rho2, a * a / rho2, push * g1, push * g2)
        return np.stack(d, axis=-1)

    def pbar(self, state: np.ndarray) -> np.ndarray:
        """Principal symbol ``xi2/|xi| - r beta(x)``."""
        x1, x2, a, b = np.moveaxis(np.asarray(state, dtype=float), -1, 0)
        return b / np.hypot(a, b) - self.r * self.potential.value(x1, x2)


@dataclass(frozen=True)
class FlowDerivative:
    dx: Tuple[float, float]
    dxi: Tuple[float, float]


def flow_field(variant: str, p: PhasePoint, r: float, beta) -> FlowDerivative:
    """Vector field of ``variant`` at a single phase point."""
    d = FlowField(variant, r, beta)(p.as_array())
    return FlowDerivative(dx=(float(d[0]), float(d[1])), dxi=(float(d[2]), float(d[3])))


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Samples ``t[k]`` and ``states[k, ..., 4]`` (x wrapped to ``[-pi, pi)``)."""

    t: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate_states(field_: FlowField, y0: np.ndarray, dt: float, T: float,
                     record_every: int = 1) -> FlowTrajectory:
    """Classical RK4 on a batch of states ``y0[..., 4]``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive multiple of dt")
    y = np.array(y0, dtype=float)
    ts = [0.0]
    out = [y.copy()]
    for i in range(1, n + 1):
        k1 = field_(y)
        k2 = field_(y + 0.5 * dt * k1)
        k3 = field_(y + 0.5 * dt * k2)
        k4 = field_(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        y[..., :2] = wrap_angle(y[..., :2])
        if i % record_every == 0 or i == n:
            ts.append(i * dt)
            out.append(y.copy())
    return FlowTrajectory(np.array(ts), np.array(out))


def integrate_flow(p0: PhasePoint, variant: str, r: float, beta, dt: float, T: float,
                   record_every: int = 1) -> FlowTrajectory:
    return integrate_states(FlowField(variant, r, beta), p0.as_array(), dt, T, record_every)


def sample_on_sigma0(n: int, r: float, beta, rng: np.random.Generator, xi_sign: float = -1.0,
                     x1_range: Tuple[float, float] = (0.0, np.pi), xi_scale: float = 1.0,
                     max_tries: int = 100) -> np.ndarray:
    """Random states with ``pbar = 0``, i.e. ``xi2/|xi| = r beta(x)``, and ``sign(xi1) = xi_sign``.

    ``x1`` is uniform in ``x1_range`` and ``x2`` uniform on the circle; points
    above holes of the manifold are redrawn.
    """
    pot = FourierPotential(beta)
    lo, hi = x1_range
    x = np.empty((0, 2))
    for _ in range(max_tries):
        x1 = rng.uniform(lo, hi, n)
        x2 = rng.uniform(-np.pi, np.pi, n)
        ok = np.abs(r * pot.value(x1, x2)) <= 1.0
        x = np.vstack([x, np.stack([x1[ok], x2[ok]], axis=-1)])
        if len(x) >= n:
            break
    else:
        raise ValueError("could not place enough points on the energy manifold")
    x = x[:n]
    c = r * pot.value(x[:, 0], x[:, 1])
    xi2 = xi_scale * c
    xi1 = np.sign(xi_sign) * xi_scale * np.sqrt(np.clip(1 - c * c, 0.0, None))
    return np.stack([x[:, 0], x[:, 1], xi1, xi2], axis=-1)
