"""Eigenvalues of ``P - omega0 + i nu Laplacian`` closest to zero.

Two routes are provided:

* :func:`eig_dense` -- full LAPACK eigendecomposition of the assembled matrix
  (small grids only, used as an oracle).
* :func:`eig_arnoldi` -- shift-invert block Arnoldi on ``(A - sigma I)^-1``
  with a dense LU factorization and Krylov-Schur thick restarts. The block
  form recovers repeated eigenvalues, which single-vector
  Krylov methods miss in exact arithmetic.

Residuals are always re-measured with the matrix-free operator.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from .errors import CapExceeded, NotConverged
from .operators import DENSE_CAP_N, OperatorSpec, apply_native, assemble_dense
from .spectral_grid import SpectralField, from_native, to_native

log = logging.getLogger(__name__)

DENSE_EIG_CAP_N = 32
CLUSTER_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: complex
    vector: SpectralField
    residual: float


@dataclass(eq=False)
class EigenSet:
    spec: OperatorSpec
    pairs: List[EigenPair]
    target: complex = 0.0
    method: str = "dense"
    clusters: List[List[int]] = field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs], dtype=complex)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([p.residual for p in self.pairs])


def _norm0_scale(grid) -> float:
    # discrete L2 norm of a coefficient vector is sqrt(h^2/N^2) * euclidean norm
    return grid.h / grid.N


def _normalize(vec: np.ndarray, grid) -> np.ndarray:
    return vec / (np.linalg.norm(vec) * _norm0_scale(grid))


def residual_array(spec: OperatorSpec, lam: complex, coeffs: np.ndarray) -> float:
    """``|||A v - lam v|||_0`` with ``A`` applied matrix-free (centered storage)."""
    v = to_native(coeffs)
    r = apply_native(spec, v) - lam * v
    return float(np.linalg.norm(r) * _norm0_scale(spec.grid))


def residual(pair: EigenPair, spec: OperatorSpec) -> float:
    return residual_array(spec, pair.lam, pair.vector.coeffs)


def _closest(lams: np.ndarray, target: complex, m: int) -> np.ndarray:
    dist = np.abs(lams - target)
    phase = np.angle(lams - target)
    return np.lexsort((phase, np.round(dist, 12)))[:m]


def find_clusters(lams, tol: float = CLUSTER_TOL) -> List[List[int]]:
    """Groups of indices whose eigenvalues coincide within ``tol``."""
    lams = np.asarray(lams)
    seen = set()
    groups = []
    for i in range(len(lams)):
        if i in seen:
            continue
        grp = [j for j in range(i, len(lams)) if abs(lams[j] - lams[i]) < tol]
        if len(grp) > 1:
            groups.append(grp)
        seen.update(grp)
    return groups


def _build_set(spec, lams, vecs, target, method) -> EigenSet:
    g = spec.grid
    n = g.N
    pairs = []
    for lam, v in zip(lams, vecs.T):
        v = _normalize(v, g)
        coeffs = v.reshape(n, n)
        pairs.append(EigenPair(complex(lam), SpectralField(g, coeffs),
                               residual_array(spec, lam, coeffs)))
    return EigenSet(spec=spec, pairs=pairs, target=complex(target), method=method,
                    clusters=find_clusters(lams))


def eig_dense(spec: OperatorSpec, m: int) -> EigenSet:
    """All eigenpairs by dense decomposition, keeping the ``m`` closest to zero."""
    if spec.grid.N > DENSE_EIG_CAP_N:
        raise CapExceeded(f"dense eigendecomposition needs N <= {DENSE_EIG_CAP_N}")
    A = assemble_dense(spec)
    lams, vecs = sla.eig(A, overwrite_a=True, check_finite=False)
    keep = _closest(lams, 0.0, m)
    return _build_set(spec, lams[keep], vecs[:, keep], 0.0, "dense")


def _factor_shifted(A: np.ndarray, sigma: complex):
    """LU of ``A - sigma I`` in place; nudges ``sigma`` off an exact eigenvalue."""
    n = A.shape[0]
    diag = np.diag_indices(n)
    scale = max(1.0, float(np.max(np.abs(A[diag]))))
    A[diag] -= sigma
    for attempt in range(4):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, overwrite_a=False, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() > 1e-12 * scale:
            return (lu, piv), sigma
        nudge = (1e-8 * 10 ** attempt) * scale * (1 + 1j) / np.sqrt(2)
        log.debug("shift %s is (nearly) an eigenvalue; nudging by %s", sigma, nudge)
        A[diag] -= nudge
        sigma = sigma + nudge
    raise NotConverged("could not find a nonsingular shift", 0)


def _orthonormalize(block: np.ndarray, basis: Optional[np.ndarray]):
    """Orthonormalize ``block`` against ``basis`` (two passes); returns ``(Q, coeffs, R)``."""
    coeffs = None
    if basis is not None and basis.shape[1]:
        coeffs = basis.conj().T @ block
        block = block - basis @ coeffs
        extra = basis.conj().T @ block
        block = block - basis @ extra
        coeffs = coeffs + extra
    Q, R = np.linalg.qr(block)
    return Q, coeffs, R


def eig_arnoldi(spec: OperatorSpec, m: int, tol: float = 1e-10, max_restarts: int = 100,
                krylov_dim: Optional[int] = None, block_size: int = 2,
                sigma: complex = 0.0, seed: int = 0, cap: int = DENSE_CAP_N) -> EigenSet:
    """Shift-invert block Arnoldi (Krylov-Schur restarts) for the ``m`` eigenvalues nearest ``sigma``.

    The Krylov space has dimension ``max(2m + 8, 40)`` by default. A Krylov
    decomposition ``OP V = V H + F C`` is expanded block by block; at each
    restart the Schur vectors of the wanted Ritz values are kept. Raises
    ``NotConverged`` (carrying the number of converged pairs) when
    ``max_restarts`` is exhausted.
    """
    g = spec.grid
    n = g.N
    dim = n * n
    if m < 1 or m >= dim:
        raise ValueError(f"need 1 <= m < N^2, got m = {m}")
    A = assemble_dense(spec, cap)
    (lu, sigma_used) = _factor_shifted(A, complex(sigma))
    del A

    def op(block):
        return sla.lu_solve(lu, block, check_finite=False)

    b = max(1, int(block_size))
    ncv = max(2 * m + 8, 40) if krylov_dim is None else int(krylov_dim)
    ncv = min(max(ncv, m + 2 * b), dim - b)
    keep_target = min(ncv - b, max(m + b, (m + ncv) // 2))

    rng = np.random.default_rng(seed)
    start = rng.standard_normal((dim, b)) + 1j * rng.standard_normal((dim, b))
    F, _, _ = _orthonormalize(start, None)
    V = np.zeros((dim, 0), dtype=complex)
    H = np.zeros((0, 0), dtype=complex)
    C = np.zeros((b, 0), dtype=complex)

    converged = 0
    for restart in range(max_restarts + 1):
        while V.shape[1] + b <= ncv:
            W = op(F)
            basis = np.hstack([V, F])
            F_new, h, R = _orthonormalize(W, basis)
            k = V.shape[1]
            H_ext = np.zeros((k + b, k + b), dtype=complex)
            H_ext[:k, :k] = H
            H_ext[k:, :k] = C
            H_ext[:, k:] = h
            H = H_ext
            C = np.zeros((b, k + b), dtype=complex)
            C[:, k:] = R
            V = basis
            F = F_new

        T, Z, _ = _sorted_schur(H, keep_target)
        theta_all = np.diag(T)
        # Ritz pairs for the kept block
        theta, Y = np.linalg.eig(T[:keep_target, :keep_target])
        ritz = V @ (Z[:, :keep_target] @ Y)
        lams = sigma_used + 1.0 / theta
        wanted = _closest(lams, sigma, m)
        res = np.array([residual_array(spec, lams[j], _normalize(ritz[:, j], g).reshape(n, n))
                        for j in wanted])
        converged = int(np.count_nonzero(res <= tol))
        log.debug("restart %d: %d/%d converged, max residual %.3e", restart, converged, m, res.max())
        if converged == m:
            return _build_set(spec, lams[wanted], ritz[:, wanted], sigma, "shift-invert-arnoldi")
        # thick restart on the leading Schur vectors
        V = V @ Z[:, :keep_target]
        H = T[:keep_target, :keep_target]
        C = C @ Z[:, :keep_target]
    raise NotConverged(f"{converged} of {m} eigenpairs converged after {max_restarts} restarts",
                       converged)


def _sorted_schur(H: np.ndarray, keep: int):
    """Complex Schur form with the ``keep`` largest-modulus eigenvalues leading."""
    mods = np.sort(np.abs(np.linalg.eigvals(H)))[::-1]
    thr = mods[keep - 1]
    # split between the kept and discarded moduli; ties fall on the kept side
    cut = 0.5 * (thr + mods[keep]) if keep < len(mods) and mods[keep] < thr else thr * (1 - 1e-12)
    T, Z, sdim = sla.schur(H, output="complex", sort=lambda x: abs(x) >= cut)
    return T, Z, sdim
