"""Size effect: total energy of an n x n array against n.

Linear elasticity has no length scale, so the energy of a fixed quadratic
boundary mode does not depend on n. The heterogeneous arrays do depend on
it: small arrays are stiffer, and the energy decays towards the homogenized
(``C_macro``) value as n grows. A fitted relaxed micromorphic model reproduces
this with a single parameter set, bounded above by the ``C_micro`` curve and
below by the ``C_macro`` curve.

Uses the constrained report from ``demos/rmm_fit.py`` if it exists and
otherwise runs that fit first.
"""
from pathlib import Path

import numpy as np

from rmmfit.geometry import UnitCellGeometry
from rmmfit.io import read_json, write_sweep_csv
from rmmfit.loading import random_modes
from rmmfit.models import params_from_dict
from rmmfit.sweep import sweep

OUT = Path(__file__).resolve().parent / "out"
report = OUT / "rmm-constrained.json"
if not report.exists():
    import rmm_fit

    rmm_fit.run()
fitted = params_from_dict(read_json(report)["final_params"])

modes = random_modes(12, 2024)[:2]
n_grid = np.array([1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 10.0])
rows = sweep([fitted], modes, n_grid, UnitCellGeometry.swiss_cross(1), het_sizes=[1, 2, 3, 4],
             cache_dir=OUT / "cache")
path = write_sweep_csv(OUT / "size_effect.csv", rows, "demo")

for mode in sorted({r["mode"] for r in rows}):
    table = {}
    for r in rows:
        if r["mode"] == mode:
            table.setdefault(r["n"], {})[r["model"]] = r["energy"]
    cols = ["het", "rmm", "le-macro", "le-micro"]
    print(f"mode {mode}: energy [kN mm]")
    print(f"{'n':>6}" + "".join(f"{c:>12}" for c in cols))
    for n in sorted(table):
        print(f"{n:>6.1f}" + "".join(f"{table[n][c]:>12.5f}" if c in table[n] else f"{'':>12}" for c in cols))
    print()
print(f"wrote {path}")
