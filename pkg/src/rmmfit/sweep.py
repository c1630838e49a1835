"""Size-effect sweeps: total energy against the number of cells ``n``.

Continuum models are evaluated on a real-valued ``n`` grid. The two
linear-elastic bounds (``C_macro`` and ``C_micro``) have no size effect and
are reported on the same grid. Heterogeneous energies exist only at integer
``n``.
"""
from __future__ import annotations

import numpy as np

from .bvp import ModeSolver, continuum_discretization
from .fit import build_reference
from .geometry import UnitCellGeometry
from .models import LinearElasticParams, get_model


def continuum_curve(model: str, params, modes, n_values, refine: int = 1, bc: str = "quadratic",
                    coupling: str = "strong", kappa: float | None = None) -> list[dict]:
    m = get_model(model)
    disc = continuum_discretization(m, refine)
    rows = []
    for n in n_values:
        if not n > 0:
            raise ValueError(f"sizes must be positive, got {n}")
        ms = ModeSolver(disc, m, params, float(n), bc, coupling, kappa)
        for i, mode in enumerate(modes):
            rows.append({"model": model, "mode": mode.label or str(i), "n": float(n), "energy": ms.energy(mode)})
    return rows


def bound_curves(params, modes, n_values, refine: int = 1, bc: str = "quadratic") -> list[dict]:
    """``C_macro`` and (if the parameters carry one) ``C_micro`` linear-elastic curves."""
    tensors = [("le-macro", params.macro)]
    if hasattr(params, "micro"):
        tensors.append(("le-micro", params.micro))
    le = get_model("le")
    disc = continuum_discretization(le, refine)
    rows = []
    for name, c in tensors:
        ms = ModeSolver(disc, le, LinearElasticParams(c), 1.0, bc)
        energies = [ms.energy(mode) for mode in modes]
        for n in n_values:
            for i, mode in enumerate(modes):
                rows.append({"model": name, "mode": mode.label or str(i), "n": float(n), "energy": energies[i]})
    return rows


def heterogeneous_points(geom: UnitCellGeometry, modes, sizes, refine: int = 1, bc: str = "quadratic",
                         cache_dir=None) -> list[dict]:
    sizes = [int(n) for n in sizes]
    ref = build_reference(geom, modes, sizes, bc, refine, cache_dir=cache_dir)
    return [{"model": "het", "mode": m.label or str(i), "n": float(n), "energy": float(e)}
            for i, m, n, e in ref.entries()]


def sweep(fitted, modes, n_values, geom: UnitCellGeometry | None = None, het_sizes=(), refine: int = 1,
          het_refine: int = 1, bc: str = "quadratic", cache_dir=None) -> list[dict]:
    """Tidy rows ``(model, mode, n, energy)`` for every ``(model, params)`` in ``fitted``.

    The bounding curves come from the first parameter set that has a macro
    tensor.
    """
    modes = list(modes)
    n_values = np.asarray(n_values, dtype=float)
    rows = []
    bounds_done = False
    for model, params in fitted:
        rows += continuum_curve(model, params, modes, n_values, refine, bc)
        if not bounds_done and hasattr(params, "macro"):
            rows += bound_curves(params, modes, n_values, refine, bc)
            bounds_done = True
    if geom is not None and len(het_sizes):
        rows += heterogeneous_points(geom, modes, het_sizes, het_refine, bc, cache_dir)
    return rows


__all__ = ["bound_curves", "continuum_curve", "heterogeneous_points", "sweep"]
