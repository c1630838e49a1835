"""Configuration, provenance hashing and file output."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import UnitCellGeometry, geometry_from_dict, load_geometry
from .materials import CubicModuli

FORMAT_VERSION = 1


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def canonical_json(obj) -> str:
    """Key-sorted compact JSON; floats use the shortest round-trip repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def provenance_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=_default) + "\n")
    return path


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


SWEEP_COLUMNS = ("model", "mode", "n", "energy_kN_mm")


def write_sweep_csv(path: str | Path, rows, provenance: str) -> Path:
    """Tidy CSV of ``(model, mode, n, energy_kN_mm)``; the first line is a provenance comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# provenance {provenance}\n")
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r["model"], r["mode"], repr(float(r["n"])), repr(float(r["energy"]))])
    return path


def read_sweep_csv(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        out.append({"model": r["model"], "mode": r["mode"], "n": float(r["n"]),
                    "energy": float(r["energy_kN_mm"])})
    return out


@dataclass
class RunConfig:
    """Flat run configuration; keys in files carry their units."""

    geometry: UnitCellGeometry
    macro: CubicModuli = field(default_factory=lambda: CubicModuli(5.9, 0.627, 1.748))
    model: str = "rmm"
    bc: str = "quadratic"
    seed: int = 2024
    modes: int | str = 12
    sizes: tuple = (1, 2, 3)
    refine: int = 1
    constrained: bool = False
    tol: float = 1e-6
    kappa: float | None = None
    threads: int = 1
    out: str = "out"
    extra: dict = field(default_factory=dict)


_KEYS = {
    "macro_mu_kN_per_mm2", "macro_mu_star_kN_per_mm2", "macro_lambda_kN_per_mm2", "model", "bc",
    "seed", "modes", "sizes", "refine", "constrained", "tol", "kappa_kN_per_mm3", "threads", "out",
    "geometry_file",
}
_GEOM_KEYS = {
    "l_mm", "l1_factor", "l2_factor", "matrix_lambda_kN_per_mm2", "matrix_mu_kN_per_mm2",
    "inclusion_lambda_kN_per_mm2", "inclusion_mu_kN_per_mm2",
}


def config_from_dict(cfg: dict, base: Path | None = None) -> RunConfig:
    """Run configuration from a flat dict; relative file paths resolve against ``base``."""
    unknown = set(cfg) - _KEYS - _GEOM_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "geometry_file" in cfg:
        path = Path(base or ".") / cfg["geometry_file"]
        if not path.exists():
            raise FileNotFoundError(f"geometry file not found: {path}")
        geom = load_geometry(path)
    else:
        geom = geometry_from_dict(cfg)
    rc = RunConfig(geom)
    if "macro_mu_kN_per_mm2" in cfg:
        rc.macro = CubicModuli(float(cfg["macro_mu_kN_per_mm2"]), float(cfg["macro_mu_star_kN_per_mm2"]),
                               float(cfg["macro_lambda_kN_per_mm2"]))
    for k in ("model", "bc", "out"):
        if k in cfg:
            setattr(rc, k, str(cfg[k]))
    if "modes" in cfg:
        rc.modes = cfg["modes"] if isinstance(cfg["modes"], str) else int(cfg["modes"])
        if isinstance(rc.modes, str) and rc.modes not in ("canonical",) and not rc.modes.isdigit():
            rc.modes = str(Path(base or ".") / rc.modes)
    for k in ("seed", "refine", "threads"):
        if k in cfg:
            setattr(rc, k, int(cfg[k]))
    if "sizes" in cfg:
        rc.sizes = tuple(cfg["sizes"])
    if "constrained" in cfg:
        rc.constrained = bool(cfg["constrained"])
    if "tol" in cfg:
        rc.tol = float(cfg["tol"])
    if "kappa_kN_per_mm3" in cfg:
        rc.kappa = float(cfg["kappa_kN_per_mm3"])
    return rc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return config_from_dict(json.loads(path.read_text()), path.parent)


DEFAULT_GEOMETRY = {
    "l_mm": 1.0,
    "l1_factor": 0.9,
    "l2_factor": 0.3,
    "matrix_lambda_kN_per_mm2": 51.08,
    "matrix_mu_kN_per_mm2": 26.32,
    "inclusion_lambda_kN_per_mm2": 51.08e-4,
    "inclusion_mu_kN_per_mm2": 26.32e-4,
}
