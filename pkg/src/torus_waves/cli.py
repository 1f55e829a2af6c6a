"""Command line: ``torus-waves <command> --config <path> [--out <dir>] [--threads <n>]``.

Exit status: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import scipy.fft as sfft
from threadpoolctl import threadpool_limits

from . import config as cfgmod
from .convergence import eig_convergence, space_convergence, time_convergence
from .eigensolver import eig_arnoldi, eig_dense
from .errors import CapExceeded, ConfigError, NumericalFailure
from .evolution import EvolutionConfig, run
from .expr import EvalError, ParseError
from .geometry import FlowField, integrate_states, manifold_sheets, sample_on_sigma0
from .operators import OperatorSpec
from .outputs import PLOT_TEMPLATES, OutputDir, nu_label
from .presets import named_forcing
from .resonance_tracker import (SweepPlan, mode_red_report, sort_magnitude_phase,
                                sort_realpart_threshold, sweep, symmetry_pairs)
from .spectral_grid import Grid, idft, sobolev_norm

log = logging.getLogger("torus_waves")

COMMANDS = ("evolve", "eig", "sweep", "manifold", "flow", "convergence")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _spec(cfg: cfgmod.RunConfig, **changes) -> OperatorSpec:
    op = cfg.operator
    spec = OperatorSpec(Grid(cfg.grid.N), op.r, op.beta, omega0=op.omega0, nu=op.nu)
    return spec.with_params(**changes) if changes else spec


def _require(cfg, key):
    sec, name = key.split(".")
    value = getattr(getattr(cfg, sec), name)
    if value in ("", [], 0) and not isinstance(value, bool):
        raise ConfigError(key, "required for this command")
    return value


def cmd_evolve(cfg: cfgmod.RunConfig, out: OutputDir):
    ev = cfg.evolution
    forcing = _require(cfg, "evolution.forcing")
    window = tuple(ev.red_fit_window) if ev.red_fit_window else None
    snaps = tuple(ev.snapshot_times) or (ev.T,)
    ecfg = EvolutionConfig(_spec(cfg, nu=0.0), forcing, dt=ev.dt, T=ev.T, scheme=ev.scheme,
                           snapshot_times=snaps, diagnostics=tuple(ev.red_s_list),
                           red_fit_window=window)
    res = run(ecfg)
    out.write_csv("energy.csv", ["t", "energy"], res.energy_series)
    slope, intercept, r2 = res.growth_fit
    out.write_csv("growth_fit.csv", ["slope", "intercept", "r_squared"], [(slope, intercept, r2)])
    for k, (t, f) in enumerate(res.snapshots):
        out.write_dump(f"snapshot_{k}.bin", idft(f))
    out.write_csv("snapshots.csv", ["index", "t", "l2_norm"],
                  [(k, t, sobolev_norm(f)) for k, (t, f) in enumerate(res.snapshots)])
    rows, slopes = [], []
    for s, curves in res.red_series.items():
        for t, c in curves:
            rows.extend((t, s, int(R), v) for R, v in zip(c.radii, c.values))
            slopes.append((t, s, c.fitted_slope))
    if rows:
        out.write_csv("red.csv", ["t", "s", "R", "E"], rows)
        out.write_csv("red_slopes.csv", ["t", "s", "fitted_slope"], slopes)
    # location of the peak of |u| at the final time
    vals = np.abs(idft(res.final).values)
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    nodes = ecfg.spec.grid.nodes
    out.write_csv("peak.csv", ["x1", "x2", "abs_u"], [(nodes[i], nodes[j], vals[i, j])])


def _nu_values(cfg) -> List[float]:
    return list(cfg.eig.nu_list) or [cfg.operator.nu]


def _ordered(cfg, eset):
    if cfg.eig.ordering == "realpart_threshold":
        return sort_realpart_threshold(eset, cfg.eig.tau)
    return sort_magnitude_phase(eset)


def cmd_eig(cfg: cfgmod.RunConfig, out: OutputDir):
    rows = []
    for nu in _nu_values(cfg):
        spec = _spec(cfg, nu=nu)
        if cfg.eig.method == "dense":
            eset = eig_dense(spec, cfg.eig.m)
        else:
            eset = eig_arnoldi(spec, cfg.eig.m, tol=cfg.eig.tol, max_restarts=cfg.eig.max_restarts)
        eset = _ordered(cfg, eset)
        for j, p in enumerate(eset.pairs):
            rows.append((nu, j, p.lam.real, p.lam.imag, p.residual))
            out.write_dump(f"mode_{nu_label(nu)}_{j}.bin", p.vector)
    out.write_csv("eigenvalues.csv", ["nu", "j", "re_lambda", "im_lambda", "residual"], rows)


def cmd_sweep(cfg: cfgmod.RunConfig, out: OutputDir):
    nus = _require(cfg, "eig.nu_list")
    plan = SweepPlan(spec=_spec(cfg), nu_values=nus, m=cfg.eig.m, ordering=cfg.eig.ordering,
                     tau=cfg.eig.tau, tol=cfg.eig.tol, method=cfg.eig.method)
    traj = sweep(plan)
    out.write_csv("trajectories.csv", ["traj_id", "nu", "re_lambda", "im_lambda", "residual"],
                  [(tid, nu, lam.real, lam.imag, res) for tid, nu, lam, res in traj.rows()])
    out.write_csv("smoothness.csv", ["traj_id", "max_second_difference", "jump_ratio"],
                  [(t.id, t.smoothness, t.jump_ratio) for t in traj.trajectories])
    last = min(nus)
    final = [p.lam for t in traj.trajectories for p in t.solved() if p.nu == last]
    report = symmetry_pairs(np.array(final, dtype=complex), tol=1e-6)
    out.write_csv("symmetry.csv",
                  ["lambda_re", "lambda_im", "partner_re", "partner_im", "distance", "kind"],
                  [(e.lam.real, e.lam.imag, e.partner.real, e.partner.imag, e.distance, e.kind)
                   for e in report])
    rows = []
    for entry in mode_red_report(traj, cfg.eig.red_s):
        for R, v in zip(entry.curve.radii, entry.curve.values):
            rows.append((entry.traj_id, entry.nu, int(R), v))
    out.write_csv("mode_red.csv", ["traj_id", "nu", "R", "energy"], rows)


def cmd_manifold(cfg: cfgmod.RunConfig, out: OutputDir):
    ms = manifold_sheets(cfg.operator.beta, cfg.operator.r, cfg.manifold.resolution)
    n = len(ms.nodes)
    rows = []
    for i in range(n):
        for j in range(n):
            rows.append((ms.nodes[i], ms.nodes[j], ms.sheet1[i, j], ms.sheet2[i, j],
                         bool(ms.covered[i, j])))
    out.write_csv("manifold.csv", ["x1", "x2", "eta_sheet1", "eta_sheet2", "covered"], rows)
    out.write_csv("coverage.csv", ["resolution", "fraction"],
                  [(n, float(np.mean(ms.covered)))])


def cmd_flow(cfg: cfgmod.RunConfig, out: OutputDir):
    fl = cfg.flow
    op = cfg.operator
    states = [np.array(p, dtype=float) for p in fl.points]
    if fl.random_points:
        rng = np.random.default_rng(fl.seed)
        states.extend(sample_on_sigma0(fl.random_points, op.r, op.beta, rng, xi_sign=fl.xi_sign,
                                       x1_range=tuple(fl.x1_range)))
    if not states:
        raise ConfigError("flow.points", "no initial conditions (set points or random_points)")
    field_ = FlowField(fl.variant, op.r, op.beta)
    traj = integrate_states(field_, np.array(states), fl.dt, fl.T, fl.record_every)
    for k in range(len(states)):
        rows = [(t, *traj.states[i, k]) for i, t in enumerate(traj.t)]
        out.write_csv(f"flow_{k}.csv", ["t", "x1", "x2", "xi1", "xi2"], rows)


def cmd_convergence(cfg: cfgmod.RunConfig, out: OutputDir):
    cv = cfg.convergence
    if cv.kind == "time":
        forcing = _require(cfg, "evolution.forcing")
        study = time_convergence(_spec(cfg, nu=0.0), forcing, T=cv.T, dts=cv.dt_list,
                                 reference_dt=cv.reference_dt)
        out.write_csv("convergence_time.csv", ["scheme", "dt", "error"], study.rows())
        out.write_csv("orders_time.csv", ["scheme", "fitted_order"], study.orders.items())
    elif cv.kind == "space":
        names = cv.forcings or [cfg.evolution.forcing]
        forcings = {name: named_forcing(name) for name in names if name}
        if not forcings:
            raise ConfigError("convergence.forcings", "no forcing given")
        study = space_convergence(_spec(cfg, nu=0.0), forcings,
                                  Ns=cv.N_list or (8, 16, 32, 64, 128),
                                  reference_N=cv.reference_N or 1024, dt=cfg.evolution.dt, T=cv.T)
        out.write_csv("convergence_space.csv", ["forcing", "N", "error"], study.rows())
    else:
        study = eig_convergence(_spec(cfg), Ns=cv.N_list or tuple(range(12, 65, 4)),
                                reference_N=cv.reference_N or 80,
                                nus=cv.nu_list or (1e-2, 1e-3), m=cv.m, tol=cfg.eig.tol)
        out.write_csv("convergence_eig.csv", ["nu", "N", "j", "error"], study.rows())


HANDLERS = {
    "evolve": cmd_evolve,
    "eig": cmd_eig,
    "sweep": cmd_sweep,
    "manifold": cmd_manifold,
    "flow": cmd_flow,
    "convergence": cmd_convergence,
}


def resolve_output_dir(cli_out: Optional[str], cfg: cfgmod.RunConfig) -> str:
    """``--out`` wins over ``TORUS_WAVES_OUT``, which wins over ``[output].directory``."""
    return cli_out or os.environ.get("TORUS_WAVES_OUT") or cfg.output.directory


@contextlib.contextmanager
def _thread_cap(n: Optional[int]):
    if n is None:
        yield
        return
    with threadpool_limits(limits=n), sfft.set_workers(n):
        yield


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torus-waves",
                                description="Forced evolution and viscous spectra of a "
                                            "zeroth-order operator on the 2-torus.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="cap on worker threads (1 = deterministic)")
    p.add_argument("--kind", choices=("time", "space", "eig"),
                   help="convergence study (overrides [convergence].kind)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load_config(args.config)
        if args.kind:
            cfg.convergence.kind = args.kind
        out = OutputDir(resolve_output_dir(args.out, cfg))
        with _thread_cap(args.threads):
            HANDLERS[args.command](cfg, out)
        out.write_text("resolved_config.toml", cfgmod.dumps(cfg))
        plot = PLOT_TEMPLATES.get(args.command)
        if cfg.output.emit_plots_script and plot:
            out.write_text("plot.py", plot)
        out.write_manifest()
    except (ConfigError, ParseError, EvalError, CapExceeded, ValueError) as exc:
        print(f"{args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"{args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"{args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
