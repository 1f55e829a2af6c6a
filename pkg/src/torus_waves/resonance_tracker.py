"""Ordering of viscous eigenvalues, sweeps in ``nu`` and trajectory diagnostics.

Two ordering rules are available. ``magnitude_phase`` sorts by ``|lambda|``,
breaks magnitude ties by phase in ``(-pi, pi]`` and then moves the entries with
nonnegative real part to the front. ``realpart_threshold`` keeps the first
step but replaces the second with a three-way split around ``|Re| <= tau``,
which is insensitive to the sign of round-off in near-zero real parts.

Sweeps solve one eigenproblem per viscosity (in decreasing order) and either
label trajectories by sorted position or, with ``continuity``, match each new
eigenvalue to the closest previous one. A candidate match whose distance exceeds ``jump_factor`` times the
median accepted distance so far is refused: the old trajectory closes and the
new value opens a fresh one. This keeps a branch that leaves the ``m`` eigenvalues nearest the shift from being
stitched onto the branch that enters it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .eigensolver import EigenSet, eig_arnoldi, eig_dense
from .errors import NotConverged, SweepBroken
from .operators import OperatorSpec
from .spectral_grid import REDCurve, SpectralField, red

log = logging.getLogger(__name__)

MAGNITUDE_TIE = 1e-12
ZERO_REAL = 1e-12
DEFAULT_TAU = 5e-4
JUMP_FLOOR = 1e-10
ORDERINGS = ("magnitude_phase", "realpart_threshold", "continuity")


# --- ordering ----------------------------------------------------------------

def _phase(lams: np.ndarray) -> np.ndarray:
    ph = np.angle(lams)
    # np.angle gives -pi for negative reals with a -0.0 imaginary part
    ph[ph <= -np.pi] = np.pi
    return ph


def magnitude_phase_order(lams, tie: float = MAGNITUDE_TIE) -> np.ndarray:
    """Indices sorting by magnitude, magnitude ties (within ``tie``) broken by phase."""
    lams = np.asarray(lams, dtype=complex)
    mags = np.abs(lams)
    order = np.argsort(mags, kind="stable")
    phase = _phase(lams)
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        # chain of consecutive magnitudes within the tie tolerance
        while j < len(order) and mags[order[j]] - mags[order[j - 1]] <= tie:
            j += 1
        group = order[i:j]
        out.extend(group[np.argsort(phase[group], kind="stable")])
        i = j
    return np.array(out, dtype=int)


def nonneg_real_first(lams, order, zero: float = ZERO_REAL) -> np.ndarray:
    """Stable partition of ``order`` putting ``Re >= 0`` (``|Re| < zero`` counts as 0) first."""
    re = np.asarray(lams, dtype=complex).real[order]
    front = (re >= 0) | (np.abs(re) < zero)
    return np.concatenate([order[front], order[~front]])


def threshold_partition(lams, order, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Stable split of ``order`` into ``|Re| <= tau``, ``Re > tau``, ``Re < -tau``."""
    re = np.asarray(lams, dtype=complex).real[order]
    near = np.abs(re) <= tau
    right = re > tau
    left = re < -tau
    return np.concatenate([order[near], order[right], order[left]])


def _reordered(eset: EigenSet, order) -> EigenSet:
    pairs = [eset.pairs[i] for i in order]
    remap = {old: new for new, old in enumerate(order)}
    clusters = [sorted(remap[i] for i in grp) for grp in eset.clusters]
    return EigenSet(spec=eset.spec, pairs=pairs, target=eset.target, method=eset.method,
                    clusters=clusters)


def sort_magnitude_phase(eset: EigenSet) -> EigenSet:
    lams = eset.eigenvalues
    return _reordered(eset, nonneg_real_first(lams, magnitude_phase_order(lams)))


def sort_realpart_threshold(eset: EigenSet, tau: float = DEFAULT_TAU) -> EigenSet:
    if not tau > 0:
        raise ValueError("tau must be positive")
    lams = eset.eigenvalues
    return _reordered(eset, threshold_partition(lams, magnitude_phase_order(lams), tau))


def order_values(lams, ordering: str = "magnitude_phase", tau: float = DEFAULT_TAU) -> np.ndarray:
    """Sorting permutation for a bare array of eigenvalues."""
    base = magnitude_phase_order(lams)
    if ordering == "realpart_threshold":
        return threshold_partition(lams, base, tau)
    return nonneg_real_first(lams, base)


# --- sweeps ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepPlan:
    """Viscosity sweep. ``spec.nu`` is ignored; each entry of ``nu_values`` replaces it."""

    spec: OperatorSpec
    nu_values: Sequence[float]
    m: int
    ordering: str = "magnitude_phase"
    tau: float = DEFAULT_TAU
    tol: float = 1e-10
    method: str = "arnoldi"
    keep_vectors: bool = True
    jump_factor: float = 10.0

    def __post_init__(self):
        nus = tuple(float(v) for v in self.nu_values)
        object.__setattr__(self, "nu_values", nus)
        if not nus:
            raise ValueError("nu_values is empty")
        if any(v <= 0 for v in nus):
            raise ValueError("all viscosities must be positive")
        if any(b >= a for a, b in zip(nus, nus[1:])):
            raise ValueError("nu_values must be strictly decreasing")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        if self.method not in ("arnoldi", "dense"):
            raise ValueError("method must be 'arnoldi' or 'dense'")
        if not self.jump_factor > 1:
            raise ValueError("jump_factor must be > 1")


@dataclass(frozen=True, eq=False)
class TrackPoint:
    nu: float
    lam: complex
    residual: float
    vector: Optional[SpectralField] = None

    @property
    def is_gap(self) -> bool:
        return not np.isfinite(self.lam)


@dataclass(eq=False)
class Trajectory:
    id: int
    points: List[TrackPoint] = field(default_factory=list)

    @property
    def nus(self) -> np.ndarray:
        return np.array([p.nu for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.lam for p in self.points], dtype=complex)

    def solved(self) -> List[TrackPoint]:
        return [p for p in self.points if not p.is_gap]

    def last_value(self) -> complex:
        for p in reversed(self.points):
            if not p.is_gap:
                return p.lam
        return complex(np.nan, np.nan)

    @property
    def smoothness(self) -> float:
        """Largest second difference of ``lambda`` along the path (gaps skipped)."""
        lam = np.array([p.lam for p in self.solved()])
        if lam.size < 3:
            return 0.0
        return float(np.max(np.abs(lam[2:] - 2 * lam[1:-1] + lam[:-2])))

    @property
    def jump_ratio(self) -> float:
        """Largest step divided by the median step."""
        lam = np.array([p.lam for p in self.solved()])
        if lam.size < 3:
            return 1.0
        steps = np.abs(np.diff(lam))
        med = float(np.median(steps))
        return float(steps.max() / med) if med > 0 else (1.0 if steps.max() == 0 else np.inf)


@dataclass(eq=False)
class TrajectorySet:
    plan: SweepPlan
    trajectories: List[Trajectory]
    method: str
    failed_nus: List[float] = field(default_factory=list)

    @property
    def smoothness(self) -> List[float]:
        return [t.smoothness for t in self.trajectories]

    def rows(self):
        """``(traj_id, nu, lambda, residual)`` for every solved point."""
        for t in self.trajectories:
            for p in t.points:
                yield t.id, p.nu, p.lam, p.residual


def _solve(plan: SweepPlan, nu: float) -> EigenSet:
    spec = plan.spec.with_params(nu=nu)
    if plan.method == "dense":
        return eig_dense(spec, plan.m)
    return eig_arnoldi(spec, plan.m, tol=plan.tol)


def match_greedy(previous: Sequence[complex], current: Sequence[complex],
                 jump_factor: Optional[float] = None, history: Sequence[float] = ()
                 ) -> List[Tuple[int, int]]:
    """Greedy nearest-neighbour matching; returns ``(prev_index, cur_index)`` pairs.

    The globally closest pair is taken first; equal costs go to the lower
    previous index, then the lower current index. With ``jump_factor`` set,
    pairs costing more than that multiple of the median cost are dropped; the
    median runs over this step's pairs together with ``history`` (accepted
    costs from earlier steps).
    """
    prev = np.asarray(previous, dtype=complex)
    cur = np.asarray(current, dtype=complex)
    if prev.size == 0 or cur.size == 0:
        return []
    cost = np.abs(prev[:, None] - cur[None, :])
    cost[~np.isfinite(cost)] = np.inf
    ii, jj = np.meshgrid(np.arange(prev.size), np.arange(cur.size), indexing="ij")
    order = np.lexsort((jj.ravel(), ii.ravel(), cost.ravel()))
    used_p, used_c = set(), set()
    pairs = []
    for flat in order:
        i, j = int(ii.flat[flat]), int(jj.flat[flat])
        if not np.isfinite(cost[i, j]):
            break
        if i in used_p or j in used_c:
            continue
        pairs.append((i, j))
        used_p.add(i)
        used_c.add(j)
    costs = np.array([cost[i, j] for i, j in pairs])
    if jump_factor is not None and len(pairs) + len(history) > 1:
        limit = jump_factor * float(np.median(np.concatenate([np.asarray(history, float), costs])))
        pairs = [pq for pq, c in zip(pairs, costs) if c <= limit or c <= JUMP_FLOOR]
    return pairs


def sweep(plan: SweepPlan, solver: Optional[Callable[[SweepPlan, float], EigenSet]] = None
          ) -> TrajectorySet:
    """Solve for each viscosity and assemble trajectories.

    A viscosity whose eigensolve fails leaves a gap (NaN entry) in every open
    trajectory; a second failure raises ``SweepBroken``.
    """
    solve = solver or _solve
    trajs: List[Trajectory] = []
    failed: List[float] = []
    closed = set()
    history: List[float] = []
    for nu in plan.nu_values:
        try:
            eset = solve(plan, nu)
        except NotConverged as exc:
            failed.append(nu)
            log.warning("eigensolve failed at nu = %g: %s", nu, exc)
            if len(failed) > 1:
                raise SweepBroken(f"eigensolves failed at nu = {failed}") from exc
            for t in trajs:
                if t.id not in closed:
                    t.points.append(TrackPoint(nu, complex(np.nan, np.nan), float("nan")))
            continue
        if plan.ordering == "realpart_threshold":
            eset = sort_realpart_threshold(eset, plan.tau)
        else:
            eset = sort_magnitude_phase(eset)
        pts = [TrackPoint(nu, p.lam, p.residual, p.vector if plan.keep_vectors else None)
               for p in eset.pairs]

        if plan.ordering != "continuity" or not trajs:
            for j, pt in enumerate(pts):
                if j == len(trajs):
                    trajs.append(Trajectory(j))
                trajs[j].points.append(pt)
            continue

        open_ids = [t.id for t in trajs if t.id not in closed]
        last = [trajs[i].last_value() for i in open_ids]
        pairs = match_greedy(last, [p.lam for p in pts], plan.jump_factor, history)
        taken = set()
        for i, j in pairs:
            history.append(abs(pts[j].lam - last[i]))
            trajs[open_ids[i]].points.append(pts[j])
            taken.add(j)
        matched = {open_ids[i] for i, _ in pairs}
        closed.update(i for i in open_ids if i not in matched)
        for j, pt in enumerate(pts):
            if j not in taken:
                trajs.append(Trajectory(len(trajs), [pt]))
    return TrajectorySet(plan=plan, trajectories=trajs, method=plan.ordering, failed_nus=failed)


# --- diagnostics -----------------------------------------------------------

@dataclass(frozen=True)
class SymmetryEntry:
    lam: complex
    partner: complex
    distance: float
    kind: str  # "pair", "self" or "unmatched"


def symmetry_pairs(values, tol: float = 1e-6) -> List[SymmetryEntry]:
    """Pair each eigenvalue with its best partner under ``lambda -> -conj(lambda)``.

    ``values`` may be an EigenSet or an array of eigenvalues.
    """
    lams = values.eigenvalues if isinstance(values, EigenSet) else np.asarray(values, complex)
    out = []
    for i, lam in enumerate(lams):
        mirror = -np.conj(lam)
        if abs(lam.real) <= tol:
            out.append(SymmetryEntry(complex(lam), complex(mirror), float(abs(mirror - lam)), "self"))
            continue
        others = np.delete(lams, i)
        if others.size == 0:
            out.append(SymmetryEntry(complex(lam), complex(np.nan), float("inf"), "unmatched"))
            continue
        d = np.abs(others - mirror)
        j = int(np.argmin(d))
        kind = "pair" if d[j] <= tol else "unmatched"
        out.append(SymmetryEntry(complex(lam), complex(others[j]), float(d[j]), kind))
    return out


@dataclass(frozen=True)
class ModeRED:
    nu: float
    traj_id: int
    curve: REDCurve


def mode_red_report(traj: TrajectorySet, s: float = 0.0,
                    fit_window: Optional[Tuple[float, float]] = None) -> List[ModeRED]:
    """RED of every retained eigenvector, per trajectory and viscosity."""
    rows = []
    for t in traj.trajectories:
        for p in t.solved():
            if p.vector is None:
                raise ValueError("sweep was run without keeping eigenvectors")
            rows.append(ModeRED(p.nu, t.id, red(p.vector, s, fit_window)))
    return rows
