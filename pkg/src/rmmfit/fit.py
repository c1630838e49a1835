"""Least-squares identification of continuum parameters from reference energies.

The objective is ``r^2 = sum_j (a_j - b_j(theta))^2`` over all (mode, size)
pairs ``j``, where ``a`` are reference energies and ``b`` the energies of the
continuum model. Entries are ordered mode-major, size-minor.

* :func:`fit_linear` identifies a cubic linear-elastic tensor. The energy is
  linear in the moduli at fixed fields, so one update is exact for affine
  and periodic data.
* :func:`fit_iterative` is the constrained Gauss-Newton loop for the
  generalized continua: finite-difference partials with re-solve, a
  least-squares direction, a step bound that keeps the iterate admissible,
  and a fixed grid line search.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bvp import (HET_GRADING, ModeSolver, continuum_discretization, heterogeneous_discretization, integrate_density,
                  state_at_quadrature)
from .fem.solver import SolverError
from .geometry import UnitCellGeometry
from .io import FORMAT_VERSION, provenance_hash, read_json, write_json
from .loading import DeformationMode, affine_canonical
from .materials import (ConstraintError, CubicModuli, IsotropicLame, equivalent_shear, matrix_bound_violations,
                        reuss_ce_derivatives)
from .models import (PARAMS, CosseratParams, HeterogeneousParams, LinearElasticParams,
                     MicromorphicIsoParams, MicromorphicSimpleParams, ModelEnergy, RMMParams, get_model,
                     le_energy_terms, params_to_dict)

log = logging.getLogger(__name__)

BETA_GRID = np.array([1 / 512, 1 / 256, 1 / 128, 1 / 64, 1 / 32, 1 / 8, 1 / 4, 1 / 2, 1.0])
BETA_SAFETY = 0.99
COND_LIMIT = 1e12
DEFAULT_INIT_MICRO = CubicModuli(26.32, 26.32, 51.08)


class DegeneracyError(ValueError):
    """The derivative matrix is rank deficient."""


# ---------------------------------------------------------------------------
# reference data


@dataclass
class ReferenceDataset:
    """Energies ``a_j`` for every (mode, size) pair with their provenance."""

    modes: list
    sizes: list
    energies: np.ndarray
    bc: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        if self.energies.shape != (len(self.modes) * len(self.sizes),):
            raise ValueError("need one energy per (mode, size) pair")
        if np.any(self.energies < 0):
            raise ValueError("reference energies must be nonnegative")

    @property
    def hash(self) -> str:
        return self.provenance.get("hash", "")

    def entries(self):
        for i, m in enumerate(self.modes):
            for k, n in enumerate(self.sizes):
                yield i, m, n, self.energies[i * len(self.sizes) + k]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "bc": self.bc,
            "sizes": list(self.sizes),
            "modes": [m.to_dict() for m in self.modes],
            "entries": [{"mode": i, "n": n, "energy_kN_mm": float(e)} for i, _, n, e in self.entries()],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceDataset":
        modes = [DeformationMode.from_dict(m) for m in d["modes"]]
        e = np.array([r["energy_kN_mm"] for r in d["entries"]])
        return cls(modes, list(d["sizes"]), e, d["bc"], d.get("provenance", {}))

    def save(self, path) -> Path:
        return write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "ReferenceDataset":
        return cls.from_dict(read_json(path))


def reference_provenance(geom: UnitCellGeometry, modes, sizes, bc: str, refine: int,
                         grading: str = HET_GRADING) -> dict:
    body = {
        "kind": "heterogeneous",
        "geometry": geom.provenance(),
        "modes": [m.to_dict() for m in modes],
        "sizes": list(sizes),
        "bc": bc,
        "refine": int(refine),
        "grading": grading,
        "element": "T2, 6-point degree-4 rule",
        "format": FORMAT_VERSION,
    }
    return {**body, "hash": provenance_hash(body)}


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def build_reference(geom: UnitCellGeometry, modes, sizes, bc: str = "quadratic", refine: int = 1,
                    cache_dir=None, threads: int = 1, grading: str = HET_GRADING) -> ReferenceDataset:
    """Heterogeneous energies for every (mode, size) pair, cached by provenance hash."""
    modes = list(modes)
    sizes = [int(n) for n in sizes]
    if any(n < 1 for n in sizes):
        raise ValueError("heterogeneous sizes must be positive integers")
    prov = reference_provenance(geom, modes, sizes, bc, refine, grading)
    cache = Path(cache_dir) / f"reference-{prov['hash'][:20]}.json" if cache_dir else None
    if cache is not None and cache.exists():
        ref = ReferenceDataset.load(cache)
        if ref.provenance.get("hash") == prov["hash"]:
            log.info("reference cache hit %s", cache)
            return ref
    model = get_model("het")
    params = HeterogeneousParams(geom)

    def one_size(n):
        disc = heterogeneous_discretization(geom, n, refine, grading)
        ms = ModeSolver(disc, model, params, n, bc=bc)
        out = []
        for i, m in enumerate(modes):
            try:
                out.append(ms.energy(m))
            except SolverError as exc:
                raise SolverError(f"reference solve failed for mode {i} at n={n}: {exc}",
                                  exc.pivot) from exc
        return out

    per_size = _map(one_size, sizes, threads)
    energies = np.array([[per_size[k][i] for k in range(len(sizes))] for i in range(len(modes))]).ravel()
    ref = ReferenceDataset(modes, sizes, energies, bc, prov)
    if cache is not None:
        ref.save(cache)
    return ref


# ---------------------------------------------------------------------------
# continuum energies


class ContinuumEnergies:
    """Energies ``b(theta)`` of a continuum model for a fixed set of modes and sizes."""

    def __init__(self, model: ModelEnergy | str, modes, sizes, refine: int = 1, cells: int | None = None,
                 p_kind: str | None = None, bc: str = "quadratic", coupling: str = "strong",
                 kappa: float | None = None, threads: int = 1):
        self.model = get_model(model) if isinstance(model, str) else model
        self.modes = list(modes)
        self.sizes = list(sizes)
        kw = {} if cells is None else {"cells": cells}
        self.disc = continuum_discretization(self.model, refine, p_kind=p_kind, **kw)
        self.bc = "quadratic" if bc == "affine" else bc
        self.coupling = coupling
        self.kappa = kappa
        self.threads = threads
        self.n_solves = 0

    def solver(self, params, n) -> ModeSolver:
        return ModeSolver(self.disc, self.model, params, n, self.bc, self.coupling, self.kappa)

    def __call__(self, params) -> np.ndarray:
        out = np.empty((len(self.modes), len(self.sizes)))
        for k, n in enumerate(self.sizes):
            ms = self.solver(params, n)
            for i, m in enumerate(self.modes):
                out[i, k] = ms.energy(m)
        self.n_solves += out.size
        return out.ravel()

    def many(self, param_list) -> list[np.ndarray]:
        return _map(self, list(param_list), self.threads)

    def solutions(self, params):
        """Solution vectors per entry (mode-major, size-minor)."""
        sols = [[None] * len(self.sizes) for _ in self.modes]
        for k, n in enumerate(self.sizes):
            ms = self.solver(params, n)
            for i, m in enumerate(self.modes):
                sols[i][k] = ms.solve(m)
        return [s for row in sols for s in row]


def residual_sq(a, b) -> float:
    return float(np.sum((np.asarray(a) - np.asarray(b)) ** 2))


# ---------------------------------------------------------------------------
# fit report


@dataclass
class FitReport:
    model: str
    unknowns: tuple
    rows: list = field(default_factory=list)
    final: object = None
    converged: bool = False
    reason: str = ""
    reference_hash: str = ""

    def add(self, iteration, params, r2, beta=None, beta_max=None, active=(), note=""):
        row = {"iteration": iteration,
               "params": dict(zip(self.unknowns, params.vector().tolist())),
               "r2": float(r2), "beta": beta, "beta_max": beta_max,
               "active": sorted(active), "note": note}
        if hasattr(params, "length_scale"):
            row["L_c_mm"] = params.length_scale()
        self.rows.append(row)
        self.final = params

    @property
    def r2(self) -> np.ndarray:
        return np.array([r["r2"] for r in self.rows])

    def to_dict(self) -> dict:
        return {"format": FORMAT_VERSION, "model": self.model, "unknowns": list(self.unknowns),
                "rows": self.rows, "converged": self.converged, "reason": self.reason,
                "final": self.rows[-1]["params"] if self.rows else None,
                "final_params": (params_to_dict(self.model, self.final)
                                 if self.final is not None and self.model in PARAMS else None),
                "reference_hash": self.reference_hash}

    def save(self, path) -> Path:
        payload = self.to_dict()
        payload["provenance"] = provenance_hash({k: v for k, v in payload.items()})
        return write_json(path, payload)

    def table(self) -> str:
        """Plain-text iteration table (iteration, parameters, L_c, r^2)."""
        cols = list(self.unknowns)
        has_lc = any("L_c_mm" in r for r in self.rows)
        head = ["iter"] + cols + (["L_c[mm]"] if has_lc else []) + ["r2[(kN mm)^2]", "beta"]
        lines = ["  ".join(f"{h:>14}" for h in head)]
        for r in self.rows:
            vals = [f"{r['iteration']:>14d}"] + [f"{r['params'][c]:>14.6g}" for c in cols]
            if has_lc:
                vals.append(f"{r.get('L_c_mm', float('nan')):>14.6g}")
            vals.append(f"{r['r2']:>14.6e}")
            vals.append(f"{r['beta']:>14.6g}" if r["beta"] is not None else f"{'-':>14}")
            lines.append("  ".join(vals))
        lines.append(f"# {self.reason}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Algorithm 1: linear elasticity


def _check_rank(D: np.ndarray, labels) -> float:
    s = np.linalg.svd(D, compute_uv=False)
    cond = np.inf if s[-1] == 0 else s[0] / s[-1]
    if cond > COND_LIMIT:
        unit = D / np.maximum(np.linalg.norm(D, axis=1, keepdims=True), 1e-300)
        groups = []
        for i in range(len(unit)):
            for j in range(i + 1, len(unit)):
                if abs(abs(unit[i] @ unit[j]) - 1.0) < 1e-9:
                    groups.append(f"{labels[i]} ~ {labels[j]}")
        detail = ", ".join(groups) if groups else ", ".join(map(str, labels))
        raise DegeneracyError(f"derivative matrix is rank deficient (condition {cond:.3e}); "
                              f"dependent modes: {detail}")
    return cond


def linear_partials(ref: ReferenceDataset, c: CubicModuli, bc: str, refine: int = 1,
                    cells: int = 10) -> np.ndarray:
    """Rows ``[int eps11^2 + eps22^2, int 2 eps12^2, int (eps11 + eps22)^2 / 2]`` of the homogeneous solution."""
    model = get_model("le")
    disc = continuum_discretization(model, refine, cells=cells, grading="uniform")
    ms = ModeSolver(disc, model, LinearElasticParams(c), 1, bc=bc)
    rows = []
    for m in ref.modes:
        state = state_at_quadrature(disc, ms.solve(m))
        rows.append([float(np.sum(t * disc.op.wdet)) for t in le_energy_terms(state.grad_u)])
    # elasticity has no size effect; repeat per size
    return np.repeat(np.array(rows), len(ref.sizes), axis=0)


def fit_linear(ref: ReferenceDataset, bc: str | None = None, init: CubicModuli = DEFAULT_INIT_MICRO,
               max_iter: int = 5, tol: float = 1e-12, refine: int = 1) -> tuple[CubicModuli, FitReport]:
    """Cubic linear-elastic tensor minimizing ``r^2``; the energy is linear in the moduli."""
    bc = ref.bc if bc is None else bc
    if len(ref.modes) < 3:
        raise DegeneracyError("need at least three modes for three moduli")
    a = ref.energies
    params = LinearElasticParams(init)
    report = FitReport("le", params.unknowns, reference_hash=ref.hash)
    labels = [f"mode {i} (n={n})" for i, _, n, _ in ref.entries()]
    D = linear_partials(ref, params.c, bc, refine)
    _check_rank(D, labels)
    b = D @ params.vector()
    r2 = residual_sq(a, b)
    report.add(0, params, r2)
    for it in range(1, max_iter + 1):
        delta = np.linalg.lstsq(D, a - b, rcond=None)[0]
        params = params.with_vector(params.vector() + delta)
        if not params.c.is_positive_definite():
            raise ConstraintError(f"fitted tensor is not positive definite: {params.c}")
        D = linear_partials(ref, params.c, bc, refine)
        b = D @ params.vector()
        r2_new = residual_sq(a, b)
        report.add(it, params, r2_new, beta=1.0)
        step = np.linalg.norm(delta) / np.linalg.norm(params.vector())
        if r2_new <= tol * max(r2, 1e-300) or step <= 1e-14 or r2_new >= r2:
            report.converged = True
            report.reason = f"converged after {it} iteration(s)"
            break
        r2 = r2_new
    else:
        report.reason = "maximum iterations reached"
    return params.c, report


def homogenize(geom: UnitCellGeometry, bc: str, refine: int = 1, modes=None,
               cache_dir=None) -> tuple[CubicModuli, FitReport]:
    """Cubic moduli of one unit cell under affine or periodic boundary conditions."""
    if bc not in ("affine", "periodic"):
        raise ValueError("homogenization needs affine or periodic boundary conditions")
    modes = affine_canonical() if modes is None else list(modes)
    ref = build_reference(geom, modes, [1], bc, refine, cache_dir=cache_dir)
    return fit_linear(ref, bc)


@dataclass
class ConvergenceStudy:
    bc: str
    levels: list = field(default_factory=list)
    converged: bool = False

    @property
    def moduli(self) -> CubicModuli:
        return self.levels[-1]["moduli"]

    @property
    def refine(self) -> int:
        return self.levels[-1]["refine"]

    def table(self) -> str:
        lines = [f"{'refine':>6}  {'mu':>10}  {'mu_star':>10}  {'lam':>10}  {'change':>9}  {'time[s]':>8}"]
        for lv in self.levels:
            c = lv["moduli"]
            ch = "-" if lv["change"] is None else f"{lv['change']:.3%}"
            lines.append(f"{lv['refine']:>6}  {c.mu:>10.5f}  {c.mu_star:>10.5f}  {c.lam:>10.5f}  {ch:>9}  "
                         f"{lv['seconds']:>8.2f}")
        return "\n".join(lines)


def converged_homogenization(geom: UnitCellGeometry, bc: str, start: int = 1, rel_change: float = 2e-3,
                             max_refine: int = 16, cache_dir=None) -> ConvergenceStudy:
    """Double ``refine`` until no modulus changes by more than ``rel_change``."""
    study = ConvergenceStudy(bc)
    refine, prev = start, None
    while refine <= max_refine:
        t0 = time.perf_counter()
        c, report = homogenize(geom, bc, refine, cache_dir=cache_dir)
        v = np.array([c.mu, c.mu_star, c.lam])
        change = None if prev is None else float(np.max(np.abs(v - prev) / np.abs(v)))
        study.levels.append({"refine": refine, "moduli": c, "change": change, "report": report,
                             "seconds": time.perf_counter() - t0})
        log.info("%s refine %d: %s (change %s)", bc, refine, c, change)
        if change is not None and change < rel_change:
            study.converged = True
            break
        prev, refine = v, 2 * refine
    return study


# ---------------------------------------------------------------------------
# Algorithm 2: generalized continua


def fd_step(theta: float, scale: float = 1.0, rel: float = 1e-6) -> float:
    return rel * max(abs(theta), scale)


def energy_partials(energies: ContinuumEnergies, params, exclude=(), rel: float = 1e-6,
                    b0: np.ndarray | None = None, max_shrink: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference partials ``d b / d theta_k`` with a full re-solve per perturbation.

    Returns ``(D, b0)``; excluded unknowns get zero columns. The step shrinks
    by halving while the perturbed point is inadmissible.
    """
    b0 = energies(params) if b0 is None else b0
    theta = params.vector()
    names = params.unknowns
    active = [k for k, name in enumerate(names) if name not in exclude]
    steps, perturbed = [], []
    for k in active:
        eps = fd_step(theta[k], rel=rel)
        for _ in range(max_shrink):
            th = theta.copy()
            th[k] += eps
            p = params.with_vector(th)
            if p.is_admissible():
                break
            eps *= 0.5
        else:
            raise ConstraintError(f"no admissible perturbation for {names[k]} at {theta[k]!r}")
        steps.append(eps)
        perturbed.append(p)
    D = np.zeros((len(b0), len(names)))
    for k, eps, bk in zip(active, steps, energies.many(perturbed)):
        D[:, k] = (bk - b0) / eps
    return D, b0


def envelope_partials_rmm(energies: ContinuumEnergies, params: RMMParams) -> np.ndarray:
    """Fixed-field partials ``int dW/dtheta dV`` at the minimizers for the RMM unknowns.

    ``dW/dC_e`` and ``dW/dC_micro`` are the linear-elastic terms of ``grad u - P``
    and ``P``; the chain rule through the Reuss relation uses
    :func:`~rmmfit.materials.reuss_ce_derivatives`.
    """
    J = reuss_ce_derivatives(params.micro, params.macro)
    disc = energies.disc
    sols = energies.solutions(params)
    D = np.zeros((len(sols), 4))
    for j, d in enumerate(sols):
        n = energies.sizes[j % len(energies.sizes)]
        s = state_at_quadrature(disc, d)
        w = disc.op.wdet
        te = np.array([np.sum(t * w) for t in le_energy_terms(s.grad_u - s.P)])
        tm = np.array([np.sum(t * w) for t in le_energy_terms(s.P)])
        D[j, :3] = te @ J + tm
        D[j, 3] = 0.5 * np.sum(np.sum(s.curl_P ** 2, axis=-1) * w) / n ** 2
    return D


def fixed_field_partials(energies: ContinuumEnergies, params, h_rel: float = 1e-5) -> np.ndarray:
    """Central differences of the density integral with the fields held at the minimizer."""
    sols = energies.solutions(params)
    theta = params.vector()
    D = np.zeros((len(sols), len(theta)))
    for k in range(len(theta)):
        h = fd_step(theta[k], rel=h_rel)
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        pp, pm = params.with_vector(tp), params.with_vector(tm)
        for j, d in enumerate(sols):
            n = energies.sizes[j % len(energies.sizes)]
            ep = integrate_density(energies.disc, energies.model, pp, n, d)
            em = integrate_density(energies.disc, energies.model, pm, n, d)
            D[j, k] = (ep - em) / (2 * h)
    return D


def solve_direction(D: np.ndarray, a, b) -> np.ndarray:
    """Least-squares direction ``(D^T D)^-1 D^T (a - b)`` via an orthogonal factorization."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    r = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    live = np.flatnonzero(np.any(D != 0, axis=0))
    out = np.zeros(D.shape[1])
    if not len(live) or not np.any(r):
        return out
    Dl = D[:, live]
    s = np.linalg.svd(Dl, compute_uv=False)
    cond = np.inf if s[-1] == 0 else s[0] / s[-1]
    if cond > COND_LIMIT:
        raise DegeneracyError(f"derivative matrix is rank deficient (condition {cond:.3e})")
    Q, R = np.linalg.qr(Dl)
    out[live] = np.linalg.solve(R, Q.T @ r)
    return out


def beta_max(params, direction, safety: float = BETA_SAFETY) -> float:
    """Largest step fraction (at most 1) keeping every strict linear bound satisfied."""
    theta = params.vector()
    crossings = []
    for _, a, b in params.linear_constraints():
        rate = a @ direction
        if rate < 0:
            crossings.append((a @ theta - b) / -rate)
    if not crossings:
        return 1.0
    return min(1.0, safety * min(crossings))


def line_search(objective, beta_max_value: float, r2_zero: float | None = None,
                grid=BETA_GRID, many=None) -> tuple[float, float]:
    """Grid search over ``beta in grid * beta_max`` plus ``beta = 0``.

    ``objective(beta) -> r^2``; ``many`` may evaluate a list of betas at once.
    Ties keep the smaller step.
    """
    betas = [b * beta_max_value for b in grid]
    r0 = objective(0.0) if r2_zero is None else r2_zero
    vals = many(betas) if many is not None else [objective(b) for b in betas]
    best_b, best_r = 0.0, r0
    for b, r in zip(betas, vals):
        if r < best_r:
            best_b, best_r = b, r
    return best_b, best_r


def project_matrix_bound(params, matrix: IsotropicLame) -> tuple[object, set]:
    """Clamp parameters that exceed the stiffest-response bounds.

    ``mu_star`` and ``mu`` clamp to ``mu_matrix``; the sum bound clamps
    ``lam_micro`` to ``mu_matrix + lam_matrix - mu_micro``.
    """
    excluded = set()
    viol = matrix_bound_violations(params.micro, matrix)
    if "mu_star" in viol:
        params = params._set("mu_star_micro", matrix.mu)
        excluded.add("mu_star_micro")
    if "mu" in viol:
        params = params._set("mu_micro", matrix.mu)
        excluded.add("mu_micro")
    if "lam+mu" in matrix_bound_violations(params.micro, matrix):
        params = params._set("lam_micro", matrix.mu + matrix.lam - params.micro.mu)
        excluded.add("lam_micro")
    return params, excluded


@dataclass
class FitOptions:
    constrained: bool = False
    matrix: IsotropicLame | None = None
    tol: float = 1e-6
    max_iter: int = 100
    fd_rel: float = 1e-6
    floor_rel: float = 1e-14


def _clamp(params, names, matrix: IsotropicLame):
    """Set the named micro moduli to their stiffest-response bounds."""
    if "mu_star_micro" in names:
        params = params._set("mu_star_micro", matrix.mu)
    if "mu_micro" in names:
        params = params._set("mu_micro", matrix.mu)
    if "lam_micro" in names:
        params = params._set("lam_micro", matrix.mu + matrix.lam - params.micro.mu)
    return params


def fit_iterative(energies: ContinuumEnergies, ref: ReferenceDataset, init,
                  options: FitOptions | None = None) -> FitReport:
    """Constrained Gauss-Newton fit of ``init``'s unknowns to ``ref``.

    Each iteration computes the partials, the least-squares direction, the
    admissible step bound and the grid line search. In constrained mode a
    step that breaks a stiffest-response bound is discarded: the offending
    moduli are clamped at the start point, excluded from the partials, and
    the iteration is repeated. The current point is always a candidate, so
    ``r^2`` never increases.
    """
    opt = FitOptions() if options is None else options
    if opt.constrained and (opt.matrix is None or not hasattr(init, "micro")):
        raise ValueError("constrained fit needs micro moduli and the matrix moduli")
    a = ref.energies
    if len(a) != len(energies.modes) * len(energies.sizes):
        raise ValueError("reference and model entries differ in number")

    def bounded(p):
        return not opt.constrained or not matrix_bound_violations(p.micro, opt.matrix)

    params = init.check()
    if not bounded(params):
        params, _ = project_matrix_bound(params, opt.matrix)
        params.check()
    floor = opt.floor_rel * float(a @ a)
    report = FitReport(energies.model.name, init.unknowns, reference_hash=ref.hash)
    b = energies(params)
    r2 = residual_sq(a, b)
    report.add(0, params, r2)

    for it in range(1, opt.max_iter + 1):
        best = (0.0, r2, params, b, None)
        start, b_start = params, b
        excluded: set = set()
        bmax = None
        for _ in range(4):
            D, _ = energy_partials(energies, start, exclude=excluded, rel=opt.fd_rel, b0=b_start)
            direction = solve_direction(D, a, b_start)
            bmax = beta_max(start, direction)
            theta = start.vector()
            cands = [start.with_vector(theta + s * bmax * direction) for s in BETA_GRID]
            broke = set()
            trial = [(s * bmax, residual_sq(a, bp), p, bp) for s, p, bp in
                     zip(BETA_GRID, cands, energies.many(cands))]
            if start is not params:
                trial.append((0.0, residual_sq(a, b_start), start, b_start))
            step = min(trial, key=lambda t: t[1])
            for t in trial:
                if bounded(t[2]) and t[1] < best[1]:
                    best = (*t, sorted(excluded))
            if not opt.constrained or bounded(step[2]):
                break
            _, broke = project_matrix_bound(step[2], opt.matrix)
            if not broke - excluded:
                break
            excluded |= broke
            start = _clamp(start, excluded, opt.matrix)
            if not start.is_admissible():
                break
            b_start = energies(start)
        beta, r2_new, params_new, b_new, active = best
        report.add(it, params_new, r2_new, beta=beta, beta_max=bmax, active=active or ())
        log.info("iteration %d: r2=%.6e beta=%.4g excluded=%s", it, r2_new, beta, active)
        if params_new is params:
            report.converged = r2_new <= floor
            report.reason = ("converged at the residual floor" if report.converged
                             else "stalled: no step along the search direction lowers r2")
            break
        decrease = (r2 - r2_new) / r2
        params, b, r2 = params_new, b_new, r2_new
        if r2 <= floor:
            report.converged = True
            report.reason = "converged at the residual floor"
            break
        if decrease < opt.tol:
            report.converged = True
            report.reason = f"converged: relative decrease {decrease:.3e} below tol"
            break
    else:
        report.reason = "maximum iterations reached"
    report.final = params
    return report


def default_init(model: str, macro: CubicModuli, micro: CubicModuli = DEFAULT_INIT_MICRO,
                 mu_c: float = 1.0):
    """Starting point of a fit: matrix-like micro moduli and ``L_c = 1 mm``."""
    mu_lc_sq = equivalent_shear(macro)
    if model == "rmm":
        return RMMParams(micro, macro, mu_lc_sq)
    if model == "cosserat":
        return CosseratParams(macro, mu_c, mu_lc_sq)
    if model == "mm-simple":
        return MicromorphicSimpleParams(micro, macro, mu_c, mu_lc_sq)
    if model == "mm-iso":
        return MicromorphicIsoParams(micro, macro, mu_c, 1.0, 1.0, 1.0)
    raise ValueError(f"no iterative fit for model {model!r}")


def grid_initializer(energies: ContinuumEnergies, ref: ReferenceDataset, template, lower, upper,
                     divisions: int = 4):
    """Best point of a tensor grid strictly inside ``(lower, upper]`` per unknown."""
    axes = [np.linspace(lo, hi, divisions + 1)[1:] for lo, hi in zip(lower, upper)]
    best = (np.inf, None)
    for theta in np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes)):
        p = template.with_vector(theta)
        if not p.is_admissible():
            continue
        r2 = residual_sq(ref.energies, energies(p))
        if r2 < best[0]:
            best = (r2, p)
    if best[1] is None:
        raise ConstraintError("no admissible grid point")
    return best[1]


def synthetic_reference(energies: ContinuumEnergies, params, bc: str = "quadratic") -> ReferenceDataset:
    """Reference data produced by the continuum model itself (self-consistency oracle)."""
    body = {"kind": "synthetic", "model": energies.model.name,
            "params": dict(zip(params.unknowns, params.vector().tolist())),
            "modes": [m.to_dict() for m in energies.modes], "sizes": list(energies.sizes)}
    return ReferenceDataset(energies.modes, energies.sizes, energies(params), bc,
                            {**body, "hash": provenance_hash(body)})


__all__ = [
    "BETA_GRID", "DEFAULT_INIT_MICRO", "beta_max", "build_reference", "ContinuumEnergies",
    "converged_homogenization", "ConvergenceStudy", "default_init", "DegeneracyError", "energy_partials",
    "envelope_partials_rmm", "fit_iterative", "fit_linear", "FitOptions", "FitReport", "fixed_field_partials",
    "grid_initializer", "homogenize", "line_search", "project_matrix_bound", "ReferenceDataset",
    "solve_direction", "synthetic_reference",
]
