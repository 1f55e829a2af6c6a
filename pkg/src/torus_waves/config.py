"""Run configuration: ``[section]`` headers and ``key = value`` lines.

Values are JSON-style literals: numbers, ``true``/``false``, double-quoted
strings and (possibly nested) arrays. ``#`` starts a comment outside strings.
Errors carry the dotted key path and the line number.

``nu_list`` additionally accepts the range shorthand ``"a:b:n"`` (linearly
spaced) or ``"a:b:n@log"`` (logarithmically spaced), endpoints included.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .expr import ParseError, parse
from .presets import named_forcing


@dataclass
class GridSection:
    N: int = 0


@dataclass
class OperatorSection:
    r: float = 0.0
    beta: str = ""
    omega0: float = 0.0
    nu: float = 0.0


@dataclass
class EvolutionSection:
    dt: float = 0.1
    T: float = 1.0
    scheme: str = "etdrk4"
    forcing: str = ""
    snapshot_times: List[float] = field(default_factory=list)
    red_s_list: List[float] = field(default_factory=list)
    red_fit_window: List[float] = field(default_factory=list)


@dataclass
class EigSection:
    m: int = 8
    nu_list: List[float] = field(default_factory=list)
    ordering: str = "magnitude_phase"
    tau: float = 5e-4
    tol: float = 1e-10
    max_restarts: int = 100
    method: str = "arnoldi"
    red_s: float = 0.0


@dataclass
class FlowSection:
    variant: str = "printed_system"
    points: List[List[float]] = field(default_factory=list)
    random_points: int = 0
    seed: int = 0
    x1_range: List[float] = field(default_factory=lambda: [0.0, math.pi])
    xi_sign: float = -1.0
    dt: float = 1e-3
    T: float = 10.0
    record_every: int = 100


@dataclass
class ManifoldSection:
    resolution: int = 256


@dataclass
class ConvergenceSection:
    kind: str = "time"
    dt_list: List[float] = field(default_factory=lambda: [2.0 ** -j for j in range(9)])
    reference_dt: float = 2.0 ** -10 * 1e-2
    N_list: List[int] = field(default_factory=list)
    reference_N: int = 0
    T: float = 1.0
    forcings: List[str] = field(default_factory=list)
    nu_list: List[float] = field(default_factory=list)
    m: int = 12


@dataclass
class OutputSection:
    directory: str = "out"
    emit_plots_script: bool = False


SECTIONS = {
    "grid": GridSection,
    "operator": OperatorSection,
    "evolution": EvolutionSection,
    "eig": EigSection,
    "flow": FlowSection,
    "manifold": ManifoldSection,
    "convergence": ConvergenceSection,
    "output": OutputSection,
}
REQUIRED = ("grid.N", "operator.r", "operator.beta")
EXPRESSION_KEYS = ("operator.beta", "evolution.forcing")
CHOICES = {
    "evolution.scheme": ("rk4", "etdrk4"),
    "eig.ordering": ("magnitude_phase", "realpart_threshold", "continuity"),
    "eig.method": ("arnoldi", "dense"),
    "flow.variant": ("printed_system", "hamiltonian"),
    "convergence.kind": ("time", "space", "eig"),
}


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    operator: OperatorSection = field(default_factory=OperatorSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    eig: EigSection = field(default_factory=EigSection)
    flow: FlowSection = field(default_factory=FlowSection)
    manifold: ManifoldSection = field(default_factory=ManifoldSection)
    convergence: ConvergenceSection = field(default_factory=ConvergenceSection)
    output: OutputSection = field(default_factory=OutputSection)
    path: Optional[str] = None


# --- value parsing ---------------------------------------------------------

def _strip_comment(line: str) -> str:
    in_str = False
    escaped = False
    for i, ch in enumerate(line):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return line[:i]
    return line


def parse_nu_range(text: str) -> List[float]:
    """``"a:b:n"`` or ``"a:b:n@log"`` -> ``n`` values from ``a`` to ``b``."""
    spec, _, mode = text.partition("@")
    parts = spec.split(":")
    if len(parts) != 3 or mode not in ("", "log", "lin"):
        raise ValueError(f"bad range {text!r}; expected 'a:b:n' or 'a:b:n@log'")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("range needs at least one point")
    if mode == "log":
        if a <= 0 or b <= 0:
            raise ValueError("log range needs positive endpoints")
        return [float(v) for v in np.logspace(math.log10(a), math.log10(b), n)]
    return [float(v) for v in np.linspace(a, b, n)]


def _coerce(key: str, value: Any, default: Any, line: int):
    def fail(msg):
        raise ConfigError(key, msg, line)

    if key.endswith("nu_list") and isinstance(value, str):
        try:
            return parse_nu_range(value)
        except ValueError as exc:
            fail(str(exc))
    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail("expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            fail("expected an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            fail("expected a quoted string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            fail("expected an array")
        if key.endswith("forcings"):
            if not all(isinstance(v, str) for v in value):
                fail("expected an array of strings")
            return list(value)
        if key.endswith("points"):
            if not all(isinstance(p, list) and len(p) == 4 for p in value):
                fail("expected an array of [x1, x2, xi1, xi2] arrays")
            return [[float(v) for v in p] for p in value]
        if key.endswith("N_list"):
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
                fail("expected an array of integers")
            return list(value)
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            fail("expected an array of numbers")
        return [float(v) for v in value]
    fail("unsupported value")


def _validate(cfg: RunConfig, lines: Dict[str, int]):
    def err(key, msg):
        raise ConfigError(key, msg, lines.get(key))

    for key in EXPRESSION_KEYS:
        sec, name = key.split(".")
        text = getattr(getattr(cfg, sec), name)
        if key == "evolution.forcing":
            text = named_forcing(text)
            setattr(cfg.evolution, "forcing", text)
        if text:
            try:
                parse(text)
            except ParseError as exc:
                err(key, f"invalid expression: {exc}")
    for key, allowed in CHOICES.items():
        sec, name = key.split(".")
        if getattr(getattr(cfg, sec), name) not in allowed:
            err(key, f"must be one of {allowed}")
    n = cfg.grid.N
    if n < 4 or n % 2:
        err("grid.N", "must be an even integer >= 4")
    if cfg.operator.r < 0:
        err("operator.r", "must be >= 0")
    if cfg.operator.nu < 0:
        err("operator.nu", "must be >= 0")
    if cfg.evolution.dt <= 0:
        err("evolution.dt", "must be positive")
    if cfg.evolution.T <= 0:
        err("evolution.T", "must be positive")
    if cfg.evolution.red_fit_window and len(cfg.evolution.red_fit_window) != 2:
        err("evolution.red_fit_window", "expected [Rmin, Rmax]")
    if cfg.eig.m < 1:
        err("eig.m", "must be >= 1")
    if cfg.eig.tau <= 0:
        err("eig.tau", "must be positive")
    if cfg.eig.tol <= 0:
        err("eig.tol", "must be positive")
    if any(v <= 0 for v in cfg.eig.nu_list):
        err("eig.nu_list", "viscosities must be positive")
    if cfg.manifold.resolution < 8:
        err("manifold.resolution", "must be >= 8")
    if len(cfg.flow.x1_range) != 2:
        err("flow.x1_range", "expected [lo, hi]")
    if cfg.flow.dt <= 0:
        err("flow.dt", "must be positive")
    if cfg.flow.record_every < 1:
        err("flow.record_every", "must be >= 1")


def loads(text: str, path: Optional[str] = None) -> RunConfig:
    cfg = RunConfig(path=path)
    seen: Dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(line, "unterminated section header", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(section, "unknown section", lineno)
            continue
        key, eq, value_text = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(key or line, "expected 'key = value'", lineno)
        if section is None:
            raise ConfigError(key, "key outside of any section", lineno)
        dotted = f"{section}.{key}"
        sec_obj = getattr(cfg, section)
        names = {f.name: f for f in fields(sec_obj)}
        if key not in names:
            raise ConfigError(dotted, "unknown key", lineno)
        if dotted in seen:
            raise ConfigError(dotted, f"duplicate key (first set on line {seen[dotted]})", lineno)
        try:
            value = json.loads(value_text.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(dotted, f"cannot parse value: {exc.msg}", lineno) from None
        default = getattr(SECTIONS[section](), key)
        setattr(sec_obj, key, _coerce(dotted, value, default, lineno))
        seen[dotted] = lineno
    for key in REQUIRED:
        if key not in seen:
            raise ConfigError(key, "required key is missing")
    _validate(cfg, seen)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def _dump_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    return "[" + ", ".join(_dump_value(x) for x in v) + "]"


def format_float(v: float) -> str:
    """17 significant digits, valid as a JSON number."""
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    s = f"{v:.17g}"
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(cfg: RunConfig) -> str:
    """Resolved configuration (defaults filled in); ``loads(dumps(c))`` reproduces ``c``."""
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        for key, value in asdict(getattr(cfg, name)).items():
            out.append(f"{key} = {_dump_value(value)}")
        out.append("")
    return "\n".join(out)
