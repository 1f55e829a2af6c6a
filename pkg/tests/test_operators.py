import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_waves.errors import CapExceeded, GridMismatch, NonRealBeta
from torus_waves.operators import (OperatorSpec, apply, assemble_dense, essential_band,
                                   multiplier)
from torus_waves.spectral_grid import Grid, GridField, SpectralField, dft, sobolev_norm


def dft_matrix(n):
    """Dense 2-D DFT matrix acting on row-major flattened centered samples."""
    lab = np.arange(-n // 2, n // 2)
    F1 = np.exp(-2j * np.pi * np.outer(lab, lab) / n)
    return np.kron(F1, F1)


def random_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_multiplier_examples():
    spec = OperatorSpec(Grid(8), 0.5, "cos(x1)")
    assert multiplier((0, 0), spec) == 0
    assert multiplier((0, 1), spec) == pytest.approx(1 / np.sqrt(2), abs=1e-16)
    visc = spec.with_params(nu=0.01)
    assert multiplier((1, 0), visc) == pytest.approx(-0.01j, abs=1e-16)
    shifted = spec.with_params(omega0=0.3, nu=0.1)
    assert multiplier((2, -1), shifted) == pytest.approx(-1 / np.sqrt(6) - 0.3 - 0.5j)


def test_spec_validation():
    with pytest.raises(NonRealBeta):
        OperatorSpec(Grid(8), 0.5, "cos(x1) + i")
    with pytest.raises(ValueError):
        OperatorSpec(Grid(8), -1, "cos(x1)")
    with pytest.raises(ValueError):
        OperatorSpec(Grid(8), 1, "cos(x1)", nu=-1e-3)
    spec = OperatorSpec(Grid(8), 0.5, "cos(x1)")
    assert np.all(spec.beta_samples.values.imag == 0)


def test_apply_constant_gives_minus_r_beta():
    g = Grid(16)
    spec = OperatorSpec(g, 0.7, "cos(x1 - 2*x2) + sin(2*x2)")
    one = dft(GridField(g, np.ones((16, 16))))
    out = apply(spec, one)
    expected = dft(GridField(g, -0.7 * spec.beta_samples.values))
    assert np.max(np.abs(out.coeffs - expected.coeffs)) <= 1e-10


def test_apply_pure_mode_without_potential():
    g = Grid(8)
    spec = OperatorSpec(g, 1.0, "0")
    _, X2 = g.mesh
    u = dft(GridField(g, np.exp(1j * X2)))
    assert np.allclose(apply(spec, u).coeffs, u.coeffs / np.sqrt(2), atol=1e-12)


def test_apply_grid_mismatch():
    spec = OperatorSpec(Grid(8), 1.0, "cos(x1)")
    with pytest.raises(GridMismatch):
        apply(spec, SpectralField(Grid(16), np.zeros((16, 16))))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([4, 8, 12, 16]), st.integers(0, 2 ** 32 - 1),
       st.floats(0, 3), st.floats(-1, 1), st.floats(0, 0.1),
       st.sampled_from(["cos(x1)", "cos(x1) + sin(x2)", "cos(x1 - 2*x2) + sin(2*x2)",
                        "exp(cos(x1))*sin(x2)"]))
def test_matrix_free_equals_dense(n, seed, r, omega0, nu, beta):
    spec = OperatorSpec(Grid(n), r, beta, omega0=omega0, nu=nu)
    u = random_spectrum(n, seed)
    dense = (assemble_dense(spec) @ u.ravel()).reshape(n, n)
    free = apply(spec, SpectralField(spec.grid, u)).coeffs
    assert np.max(np.abs(free - dense)) <= 1e-10 * max(1.0, np.abs(u).max())


def test_dense_diagonal_when_beta_zero():
    spec = OperatorSpec(Grid(8), 1.0, "0", nu=0.02)
    A = assemble_dense(spec)
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0
    assert np.allclose(np.diag(A), spec.multiplier_values.ravel())


def test_dense_cosine_coupling_entries():
    n = 8
    g = Grid(n)
    spec = OperatorSpec(g, 0.5, "cos(x1)")
    A = assemble_dense(spec)
    off = A - np.diag(np.diag(A))
    K1, K2 = [k.ravel() for k in g.wavenumbers]
    d1 = (K1[:, None] - K1[None, :] + n // 2) % n - n // 2
    d2 = K2[:, None] - K2[None, :]
    neighbours = (np.abs(d1) == 1) & (d2 == 0)
    assert np.allclose(off[neighbours], -0.25, atol=1e-14)
    assert np.max(np.abs(off[~neighbours])) <= 1e-14


@pytest.mark.parametrize("n", [4, 8, 12])
def test_dense_equals_explicit_triple_product(n):
    spec = OperatorSpec(Grid(n), 0.8, "cos(x1) + sin(x2) + 0.3*cos(2*x1 + x2)", nu=0.01)
    F = dft_matrix(n)
    Finv = F.conj().T / n ** 2
    M = F @ np.diag(spec.beta_samples.values.ravel()) @ Finv
    expected = np.diag(spec.multiplier_values.ravel()) - spec.r * M
    assert np.max(np.abs(assemble_dense(spec) - expected)) <= 1e-10


@pytest.mark.parametrize("omega0", [0.0, 0.4])
def test_hermitian_when_inviscid(omega0):
    spec = OperatorSpec(Grid(12), 0.45, "cos(x1 - 2*x2) + sin(2*x2)", omega0=omega0)
    A = assemble_dense(spec) + omega0 * np.eye(144)
    assert np.max(np.abs(A - A.conj().T)) <= 1e-10


def test_dense_cap():
    with pytest.raises(CapExceeded):
        assemble_dense(OperatorSpec(Grid(98), 0.5, "cos(x1)"))
    with pytest.raises(CapExceeded):
        assemble_dense(OperatorSpec(Grid(16), 0.5, "cos(x1)"), cap=8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 0.05))
def test_operator_norm_bound(seed, r, nu):
    g = Grid(16)
    spec = OperatorSpec(g, r, "cos(x1) + sin(x2)", nu=nu)
    u = SpectralField(g, random_spectrum(16, seed))
    bound = 1 + r * np.abs(spec.beta_samples.values).max() + nu * g.k_squared.max()
    assert sobolev_norm(apply(spec, u)) <= bound * sobolev_norm(u) * (1 + 1e-12)


def test_essential_band_examples():
    assert essential_band(OperatorSpec(Grid(16), 0.5, "cos(x1)")) == pytest.approx((-1.5, 1.5))
    assert essential_band(OperatorSpec(Grid(16), 0.0, "cos(x1)")) == pytest.approx((-1.0, 1.0))
    # the maximum 2 of the oblique potential sits on a node at N = 16
    lo, hi = essential_band(OperatorSpec(Grid(16), 0.45, "cos(x1 - 2*x2) + sin(2*x2)"))
    assert lo == pytest.approx(-1.9, abs=1e-12) and hi == pytest.approx(1.9, abs=1e-12)
    with pytest.raises(ValueError):
        essential_band(OperatorSpec(Grid(16), 0.5, "cos(x1)", nu=0.1))


def test_oblique_potential_extrema_by_dense_sampling():
    x = np.linspace(-np.pi, np.pi, 2001)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    b = np.cos(X1 - 2 * X2) + np.sin(2 * X2)
    assert b.max() == pytest.approx(2, abs=1e-5) and b.min() == pytest.approx(-2, abs=1e-5)
