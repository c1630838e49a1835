"""Command-line front end.

Subcommands ``homogenize``, ``reference``, ``fit``, ``sweep`` and ``validate``.
Flags override values from ``--config`` (a JSON file with unit-suffixed keys).
Every output file carries the provenance hash of its inputs.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .fit import (ContinuumEnergies, FitOptions, ReferenceDataset, build_reference, converged_homogenization,
                  default_init, fit_iterative, fit_linear, homogenize)
from .geometry import GeometryError
from .io import (DEFAULT_GEOMETRY, RunConfig, config_from_dict, load_config, provenance_hash, write_json,
                 write_sweep_csv)
from .loading import affine_canonical, canonical_modes, load_modes, random_modes
from .materials import ConstraintError, CubicModuli
from .models import params_from_dict
from .sweep import sweep

MODEL_CHOICES = ("le", "rmm", "cosserat", "mm-simple", "mm-iso")
BC_CHOICES = ("affine", "periodic", "quadratic")


def _sizes(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return vals


def _n_grid(text: str) -> np.ndarray:
    """``start:stop:count`` (linear) or a comma list."""
    if ":" in text:
        a, b, k = text.split(":")
        return np.linspace(float(a), float(b), int(k))
    return np.array(_sizes(text))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (geometry, macro moduli, defaults)")
    common.add_argument("--model", choices=MODEL_CHOICES)
    common.add_argument("--bc", choices=BC_CHOICES)
    common.add_argument("--seed", type=int)
    common.add_argument("--modes", help="count of random modes, 'canonical', or a modes JSON file")
    common.add_argument("--sizes", type=_sizes, help="comma-separated unit-cell counts n")
    common.add_argument("--refine", type=int)
    common.add_argument("--constrained", action="store_true", default=None)
    common.add_argument("--tol", type=float)
    common.add_argument("--kappa", type=float, help="penalty coupling factor [kN/mm^3]; default strong coupling")
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rmmfit", description="Homogenize the unit cell, build heterogeneous reference "
                                "energies and fit generalized continua to them.")
    sub = p.add_subparsers(dest="command", required=True)
    h = sub.add_parser("homogenize", parents=[common], help="affine or periodic cubic moduli of one cell")
    h.add_argument("--converge", action="store_true", help="double refine until moduli change < 0.2%%")
    sub.add_parser("reference", parents=[common], help="heterogeneous reference energies")
    f = sub.add_parser("fit", parents=[common], help="fit a continuum model to a reference dataset")
    f.add_argument("--reference", help="reference dataset JSON (built from the config if omitted)")
    f.add_argument("--max-iter", type=int, default=100)
    s = sub.add_parser("sweep", parents=[common], help="energy against size n for fitted parameters")
    s.add_argument("--params", nargs="+", required=True, help="fit reports or parameter JSON files")
    s.add_argument("--n-grid", type=_n_grid, default=np.linspace(1, 10, 37), help="start:stop:count or list")
    v = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    v.add_argument("--only", type=lambda t: [int(k) for k in t.split(",")], help="criterion numbers")
    return p


def resolve_config(args) -> RunConfig:
    if args.config:
        rc = load_config(args.config)
    else:
        rc = config_from_dict(dict(DEFAULT_GEOMETRY))
    for name in ("model", "bc", "seed", "refine", "tol", "threads", "out", "constrained"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(rc, name, v)
    if args.sizes is not None:
        rc.sizes = tuple(args.sizes)
    if args.kappa is not None:
        rc.kappa = args.kappa
    if args.modes is not None:
        rc.extra["modes"] = args.modes
    return rc


def resolve_modes(rc: RunConfig, affine_only: bool = False):
    src = rc.extra.get("modes", str(rc.modes))
    if src == "canonical":
        return affine_canonical() if affine_only else list(canonical_modes().values())
    if src.isdigit():
        return random_modes(int(src), rc.seed, affine_only=affine_only)
    path = Path(src)
    if not path.exists():
        raise FileNotFoundError(f"modes file not found: {path}")
    return load_modes(path)


def _integer_sizes(sizes) -> list[int]:
    if any(float(n) != int(n) for n in sizes):
        raise ValueError("heterogeneous sizes must be integers")
    return [int(n) for n in sizes]


def _cache(rc: RunConfig) -> Path:
    return Path(rc.out) / "cache"


def cmd_homogenize(args, rc: RunConfig) -> int:
    bc = rc.bc if rc.bc in ("affine", "periodic") else "periodic"
    out = Path(rc.out)
    if args.converge:
        study = converged_homogenization(rc.geometry, bc, start=rc.refine, cache_dir=_cache(rc))
        print(study.table())
        c, report = study.moduli, study.levels[-1]["report"]
    else:
        modes = affine_canonical() if args.modes is None else resolve_modes(rc, affine_only=True)
        c, report = homogenize(rc.geometry, bc, rc.refine, modes, cache_dir=_cache(rc))
    print(report.table())
    print(f"{bc}: mu={c.mu:.6g} mu_star={c.mu_star:.6g} lam={c.lam:.6g} kN/mm^2")
    path = report.save(out / f"homogenize-{bc}.json")
    print(f"wrote {path}")
    return 0


def cmd_reference(args, rc: RunConfig) -> int:
    modes = resolve_modes(rc)
    ref = build_reference(rc.geometry, modes, _integer_sizes(rc.sizes), rc.bc, rc.refine,
                          cache_dir=_cache(rc), threads=rc.threads)
    path = ref.save(Path(rc.out) / f"reference-{ref.hash[:12]}.json")
    print(f"{len(ref.energies)} records, provenance {ref.hash}")
    print(f"wrote {path}")
    return 0


def cmd_fit(args, rc: RunConfig) -> int:
    if args.reference:
        ref = ReferenceDataset.load(args.reference)
    else:
        ref = build_reference(rc.geometry, resolve_modes(rc), _integer_sizes(rc.sizes), rc.bc, rc.refine,
                              cache_dir=_cache(rc), threads=rc.threads)
    out = Path(rc.out)
    if rc.model == "le":
        _, report = fit_linear(ref, refine=rc.refine)
    else:
        coupling = "strong" if rc.kappa is None else "penalty"
        E = ContinuumEnergies(rc.model, ref.modes, ref.sizes, refine=rc.refine, bc=ref.bc, coupling=coupling,
                              kappa=rc.kappa, threads=rc.threads)
        opts = FitOptions(constrained=bool(rc.constrained), matrix=rc.geometry.matrix, tol=rc.tol,
                          max_iter=args.max_iter)
        report = fit_iterative(E, ref, default_init(rc.model, rc.macro), opts)
    print(report.table())
    tag = f"{rc.model}{'-constrained' if rc.constrained else ''}"
    path = report.save(out / f"fit-{tag}-{ref.hash[:12]}.json")
    print(f"wrote {path}")
    return 0


def _load_params(path):
    from .io import read_json

    d = read_json(path)
    if "final_params" in d:
        d = d["final_params"]
    if d is None:
        raise ValueError(f"{path} holds no parameter set")
    return params_from_dict(d)


def cmd_sweep(args, rc: RunConfig) -> int:
    fitted = [_load_params(p) for p in args.params]
    modes = resolve_modes(rc)
    het = _integer_sizes([n for n in rc.sizes if float(n).is_integer()])
    rows = sweep(fitted, modes, args.n_grid, rc.geometry, het, refine=rc.refine, het_refine=rc.refine,
                 bc=rc.bc, cache_dir=_cache(rc))
    prov = provenance_hash({"params": [p for p in args.params], "modes": [m.to_dict() for m in modes],
                            "n": list(map(float, args.n_grid)), "sizes": het, "refine": rc.refine, "bc": rc.bc})
    path = write_sweep_csv(Path(rc.out) / "sweep.csv", rows, prov)
    print(f"{len(rows)} rows, wrote {path}")
    return 0


def cmd_validate(args, rc: RunConfig) -> int:
    ctx = acceptance.Context(rc.geometry)
    results = acceptance.run(args.only, ctx, echo=print)
    summary = {"passed": sum(r.passed for r in results), "total": len(results),
               "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail,
                             "seconds": r.seconds} for r in results]}
    path = write_json(Path(rc.out) / "validate.json", summary)
    print(f"{summary['passed']}/{summary['total']} passed, wrote {path}")
    return 0 if summary["passed"] == summary["total"] else 1


COMMANDS = {"homogenize": cmd_homogenize, "reference": cmd_reference, "fit": cmd_fit, "sweep": cmd_sweep,
            "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        rc = resolve_config(args)
        return COMMANDS[args.command](args, rc)
    except FileNotFoundError as exc:
        parser.error(str(exc))
    except (ValueError, ConstraintError, GeometryError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
