"""Deterministic file emission: CSV tables, binary dumps and the SHA-256 manifest."""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path
from typing import Iterable, List, Sequence

from .spectral_grid import write_grid_dump

MANIFEST = "MANIFEST.sha256"


def format_value(v) -> str:
    """17 significant digits for floats (round-trips exactly); blank for None/NaN cells."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        if math.isnan(v):
            return ""
        return f"{v:.17g}"
    return str(v)


def nu_label(nu: float) -> str:
    """Filename-safe, exact label for a viscosity."""
    return f"{nu:.17g}".replace("+", "")


class OutputDir:
    """Collects artifacts written into one directory and emits the manifest."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: List[Path] = []

    def _track(self, p: Path) -> Path:
        if p not in self.files:
            self.files.append(p)
        return p

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        p = self.path / name
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_value(v) for v in row])
        return self._track(p)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path / name
        p.write_text(text, encoding="utf-8")
        return self._track(p)

    def write_dump(self, name: str, field) -> Path:
        return self._track(write_grid_dump(self.path / name, field))

    def write_manifest(self) -> Path:
        lines = []
        for p in sorted(self.files, key=lambda q: q.name):
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            lines.append(f"{digest}  {p.name}")
        p = self.path / MANIFEST
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return p


def read_csv(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def verify_manifest(directory) -> bool:
    d = Path(directory)
    for line in (d / MANIFEST).read_text(encoding="utf-8").splitlines():
        digest, name = line.split("  ", 1)
        if hashlib.sha256((d / name).read_bytes()).hexdigest() != digest:
            return False
    return True


PLOT_TEMPLATES = {
    "evolve": """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("energy.csv")))
plt.plot([float(r["t"]) for r in rows], [float(r["energy"]) for r in rows])
plt.xlabel("t")
plt.ylabel("squared L2 norm")
plt.savefig("energy.png")
""",
    "eig": """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("eigenvalues.csv")))
plt.plot([float(r["re_lambda"]) for r in rows], [float(r["im_lambda"]) for r in rows], "o")
plt.xlabel("Re")
plt.ylabel("Im")
plt.savefig("eigenvalues.png")
""",
    "sweep": """\
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

paths = defaultdict(list)
for r in csv.DictReader(open("trajectories.csv")):
    if r["re_lambda"]:
        paths[r["traj_id"]].append((float(r["re_lambda"]), float(r["im_lambda"])))
for tid, pts in paths.items():
    plt.plot(*zip(*pts), "o-", ms=3, label=tid)
plt.legend()
plt.savefig("trajectories.png")
""",
    "manifold": """\
import csv
import numpy as np
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("manifold.csv")))
x1 = np.array([float(r["x1"]) for r in rows])
x2 = np.array([float(r["x2"]) for r in rows])
cov = np.array([r["covered"] == "1" for r in rows])
plt.scatter(x1[~cov], x2[~cov], s=1)
plt.title("holes of the energy manifold")
plt.savefig("holes.png")
""",
    "flow": """\
import csv
import glob
import matplotlib.pyplot as plt

for path in sorted(glob.glob("flow_*.csv")):
    rows = list(csv.DictReader(open(path)))
    plt.plot([float(r["x1"]) for r in rows], [float(r["x2"]) for r in rows], ".", ms=1)
plt.savefig("flow.png")
""",
    "convergence": """\
import csv
import glob
import matplotlib.pyplot as plt

for path in sorted(glob.glob("convergence_*.csv")):
    rows = list(csv.DictReader(open(path)))
    x = [float(r[list(r)[1]]) for r in rows]
    y = [float(r["error"]) for r in rows]
    plt.loglog(x, y, "o")
plt.savefig("convergence.png")
""",
}
