"""Acceptance suite: twelve end-to-end checks with fixed tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult`. :func:`run` executes a
selection and shares expensive intermediate results (the homogenization
convergence studies) between criteria through :class:`Context`.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bvp import ModeSolver, continuum_discretization, state_at_quadrature
from .fem.assembly import interpolate
from .fit import (DEFAULT_INIT_MICRO, ContinuumEnergies, FitOptions, build_reference, converged_homogenization,
                  default_init, energy_partials, envelope_partials_rmm, fit_iterative,
                  synthetic_reference)
from .geometry import UnitCellGeometry
from .loading import canonical_modes, random_modes
from .materials import CubicModuli, equivalent_shear, matrix_bound_violations
from .models import CosseratParams, LinearElasticParams, RMMParams, get_model

AFFINE_MODULI = CubicModuli(6.251, 8.337, 4.379)
PERIODIC_MODULI = CubicModuli(5.9, 0.627, 1.748)
EQUIVALENT_SHEAR = 1.537
SET_1 = {"mu_micro": 10.19, "mu_star_micro": 354.87, "lam_micro": 11.3, "L_c_mm": 0.882}
SET_2 = {"mu_micro": 10.55, "mu_star_micro": 26.32, "lam_micro": 8.22, "L_c_mm": 1.123}
COSSERAT_SET = {"mu_c": 452.6, "L_c_mm": 0.616}
SHIPPED_SEED = 2024
LIMIT_REFINE = 2


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2}. {self.title}: {self.detail} ({self.seconds:.1f} s)"


def rmm_truth(macro: CubicModuli = PERIODIC_MODULI) -> RMMParams:
    """Constrained-fit parameter set 2 as an RMM parameter object."""
    micro = CubicModuli(SET_2["mu_micro"], SET_2["mu_star_micro"], SET_2["lam_micro"])
    return RMMParams(micro, macro, equivalent_shear(macro) * SET_2["L_c_mm"] ** 2)


def _rel(a, b) -> float:
    return abs(a - b) / abs(b)


class Context:
    """Lazily computed results shared by several criteria."""

    def __init__(self, geom: UnitCellGeometry | None = None, cache_dir=None):
        self.geom = UnitCellGeometry.swiss_cross(1) if geom is None else geom
        self.cache_dir = cache_dir
        self.timings = {}

    def _study(self, bc):
        t0 = time.perf_counter()
        st = converged_homogenization(self.geom, bc, cache_dir=self.cache_dir)
        self.timings[bc] = time.perf_counter() - t0
        return st

    @cached_property
    def affine(self):
        return self._study("affine")

    @cached_property
    def periodic(self):
        return self._study("periodic")

    @cached_property
    def lc_energies(self):
        return _lc_energies()


def _homogenization(ctx: Context, number: int, bc: str, target: CubicModuli) -> CriterionResult:
    study = getattr(ctx, bc)
    c = study.moduli
    errs = [_rel(c.mu, target.mu), _rel(c.mu_star, target.mu_star), _rel(c.lam, target.lam)]
    seconds = ctx.timings[bc]
    ok = study.converged and max(errs) <= 0.02 and seconds < 60.0
    detail = (f"refine {study.refine} (converged={study.converged}): mu={c.mu:.4f} mu*={c.mu_star:.4f} "
              f"lam={c.lam:.4f}, max rel. error {max(errs):.2%} (tol 2%), study time {seconds:.1f} s (< 60 s)")
    return CriterionResult(number, f"{bc} homogenization", ok, detail, seconds, {"table": study.table()})


def criterion_1(ctx: Context) -> CriterionResult:
    return _homogenization(ctx, 1, "affine", AFFINE_MODULI)


def criterion_2(ctx: Context) -> CriterionResult:
    return _homogenization(ctx, 2, "periodic", PERIODIC_MODULI)


def criterion_3(ctx: Context) -> CriterionResult:
    ratios = {}
    for bc in ("affine", "periodic"):
        r2 = getattr(ctx, bc).levels[-1]["report"].r2
        ratios[bc] = (r2[0], r2[1], r2[1] / r2[0])
    ok = all(v[2] <= 1e-18 for v in ratios.values())
    detail = ", ".join(f"{bc}: r2 {v[0]:.5g} -> {v[1]:.3g} (ratio {v[2]:.2e})" for bc, v in ratios.items())
    return CriterionResult(3, "one-iteration exactness", ok, detail + " (tol 1e-18)")


def criterion_4(ctx: Context) -> CriterionResult:
    a, p = ctx.affine.moduli, ctx.periodic.moduli
    va = np.array([a.mu, a.mu_star, a.lam + a.mu])
    vp = np.array([p.mu, p.mu_star, p.lam + p.mu])
    ok = bool(np.all(va >= vp) and np.any(va > vp))
    detail = f"affine (mu, mu*, lam+mu) = {np.round(va, 4).tolist()} vs periodic {np.round(vp, 4).tolist()}"
    return CriterionResult(4, "affine >= periodic", ok, detail)


def criterion_5(ctx: Context) -> CriterionResult:
    mu_eq = equivalent_shear(ctx.periodic.moduli)
    ok = abs(mu_eq - EQUIVALENT_SHEAR) <= 1e-3
    detail = f"mu_eq = {mu_eq:.5f} from the converged periodic moduli, target {EQUIVALENT_SHEAR} +- 0.001"
    return CriterionResult(5, "equivalent shear modulus", ok, detail)


LIMIT_MODES = ("eps1", "bend_xy", "bend_xx")
LC_DECADES = 10.0 ** np.arange(-3, 4)


def _lc_energies(refine: int = LIMIT_REFINE):
    modes = [canonical_modes()[k] for k in LIMIT_MODES]
    truth = rmm_truth()
    rmm = get_model("rmm")
    disc = continuum_discretization(rmm, refine)
    mu_eq = equivalent_shear(truth.macro)
    E = np.array([[ModeSolver(disc, rmm, RMMParams(truth.micro, truth.macro, mu_eq * lc ** 2), 1.0).energy(m)
                   for m in modes] for lc in LC_DECADES])
    le = get_model("le")
    dle = continuum_discretization(le, refine)
    bounds = {name: np.array([ModeSolver(dle, le, LinearElasticParams(c), 1.0).energy(m) for m in modes])
              for name, c in (("macro", truth.macro), ("micro", truth.micro))}
    return E, bounds


def criterion_6(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    E, bounds = ctx.lc_energies
    lo = np.abs(E[0] / bounds["macro"] - 1)
    hi = np.abs(E[-1] / bounds["micro"] - 1)
    ok = bool(np.all(lo <= 0.01) and np.all(hi <= 0.01))
    detail = (f"modes {', '.join(LIMIT_MODES)}: |E(1e-3)/E_macro - 1| max {lo.max():.2e}, "
              f"|E(1e3)/E_micro - 1| max {hi.max():.2e} (tol 1%)")
    return CriterionResult(6, "two-scale limits", ok, detail, time.perf_counter() - t0)


def criterion_7(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    E, _ = ctx.lc_energies
    steps = np.diff(E, axis=0)
    ok = bool(np.all(steps >= 0))
    detail = f"L_c = 1e-3 ... 1e3 mm, smallest step {steps.min():.3e} kN mm (must be >= 0)"
    return CriterionResult(7, "L_c monotonicity", ok, detail, time.perf_counter() - t0)


def criterion_8(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    truth = rmm_truth()
    modes = random_modes(12, 11)
    E = ContinuumEnergies("rmm", modes, [1, 2], refine=1)
    ref = synthetic_reference(E, truth)
    rep = fit_iterative(E, ref, default_init("rmm", truth.macro), FitOptions())
    th, t = rep.final.vector(), truth.vector()
    errs = np.abs(th - t) / np.abs(t)
    seconds = time.perf_counter() - t0
    ok = bool(np.all(errs[:3] <= 5e-3) and errs[3] <= 1e-2 and rep.r2[-1] <= 1e-10 and seconds < 600)
    detail = (f"{len(rep.rows) - 1} iterations, rel. errors {np.array2string(errs, precision=2)} "
              f"(tol 0.5%, 1% for mu L_c^2), final r2 {rep.r2[-1]:.2e} (tol 1e-10), {seconds:.0f} s (< 600 s)")
    return CriterionResult(8, "oracle recovery", ok, detail, seconds, {"table": rep.table()})


def _admissible_rows(rep, template) -> bool:
    return all(template.with_vector(list(r["params"].values())).is_admissible() for r in rep.rows)


def criterion_9(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    geom = ctx.geom
    modes = random_modes(12, SHIPPED_SEED)
    sizes = [1, 2, 3]
    ref = build_reference(geom, modes, sizes, refine=1, cache_dir=ctx.cache_dir)
    E = ContinuumEnergies("rmm", modes, sizes, refine=1)
    init = default_init("rmm", PERIODIC_MODULI)
    free = fit_iterative(E, ref, init, FitOptions())
    cons = fit_iterative(E, ref, init, FitOptions(constrained=True, matrix=geom.matrix))
    checks = {}
    for name, rep in (("unconstrained", free), ("constrained", cons)):
        checks[name] = {"nonincreasing": bool(np.all(np.diff(rep.r2) <= 0)),
                        "admissible": _admissible_rows(rep, init)}
    # the 90% drop is required of the free fit; the bounded fit is reported
    checks["unconstrained"]["reduction"] = bool(free.r2[-1] <= 0.1 * free.r2[0])
    checks["constrained"]["bounds"] = all(
        not matrix_bound_violations(init.with_vector(list(r["params"].values())).micro, geom.matrix)
        for r in cons.rows)
    exceeded = free.final.micro.mu_star > geom.matrix.mu
    at_bound = abs(cons.final.micro.mu_star - geom.matrix.mu) <= 1e-9 * geom.matrix.mu
    checks["constrained"]["mu_star_at_bound"] = at_bound or not exceeded
    ok = all(all(v.values()) for v in checks.values())
    fin = {name: dict(rep.rows[-1]["params"], L_c_mm=rep.rows[-1]["L_c_mm"]) for name, rep in
           (("unconstrained", free), ("constrained", cons))}
    failed = [f"{name}.{k}" for name, v in checks.items() for k, ok_k in v.items() if not ok_k]
    detail = (f"free r2 {free.r2[0]:.3e} -> {free.r2[-1]:.3e} ({free.r2[-1] / free.r2[0]:.1%}, tol 10%), "
              f"constrained {cons.r2[0]:.3e} -> {cons.r2[-1]:.3e} ({cons.r2[-1] / cons.r2[0]:.1%}), "
              f"mu*_micro {free.final.micro.mu_star:.4g} free / {cons.final.micro.mu_star:.4g} constrained; "
              f"{'all checks hold' if not failed else 'failed: ' + ', '.join(failed)}")
    data = {"final": fin, "reference_set_1": SET_1, "reference_set_2": SET_2,
            "tables": {"unconstrained": free.table(), "constrained": cons.table()}}
    return CriterionResult(9, "heterogeneous fit behaviour", ok, detail, time.perf_counter() - t0, data)


def criterion_10(ctx: Context) -> CriterionResult:
    rmm = get_model("rmm")
    disc = continuum_discretization(rmm, 1)
    rng = np.random.default_rng(5)
    coef = rng.uniform(-0.05, 0.05, (2, 6))

    def grad(x):
        x1, x2 = x[:, 0], x[:, 1]
        # u_i = c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2
        g = np.empty((len(x), 2, 2))
        for i in range(2):
            c = coef[i]
            g[:, i, 0] = c[1] + 2 * c[3] * x1 + c[4] * x2
            g[:, i, 1] = c[2] + c[4] * x1 + 2 * c[5] * x2
        return g

    d = interpolate(disc.dofmap, P=grad)
    p = RMMParams(DEFAULT_INIT_MICRO, PERIODIC_MODULI, equivalent_shear(PERIODIC_MODULI))
    curl = state_at_quadrature(disc, d).curl_P
    energy = 0.5 * p.mu_lc_sq * float(np.sum(np.sum(curl ** 2, axis=-1) * disc.op.wdet))
    ok = energy <= 1e-12
    return CriterionResult(10, "curl-free patch", ok, f"curvature energy {energy:.3e} kN mm (tol 1e-12)")


def criterion_11(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    modes = random_modes(12, SHIPPED_SEED)
    E = ContinuumEnergies("rmm", modes, [1, 2, 3], refine=1)
    init = default_init("rmm", PERIODIC_MODULI)
    D_fd, _ = energy_partials(E, init)
    D_env = envelope_partials_rmm(E, init)
    rel = np.linalg.norm(D_fd - D_env, axis=0) / np.linalg.norm(D_env, axis=0)
    ok = bool(np.all(rel <= 1e-4))
    detail = f"column-wise relative difference {np.array2string(rel, precision=2)} for {list(init.unknowns)} (tol 1e-4)"
    return CriterionResult(11, "envelope cross-check", ok, detail, time.perf_counter() - t0)


def criterion_12(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    mode = canonical_modes()["stretch_x"]
    macro = PERIODIC_MODULI
    cos = CosseratParams(macro, COSSERAT_SET["mu_c"], equivalent_shear(macro) * COSSERAT_SET["L_c_mm"] ** 2)
    out = {}
    for name, params in (("cosserat", cos), ("rmm", rmm_truth(macro))):
        m = get_model(name)
        disc = continuum_discretization(m, 1)
        out[name] = [ModeSolver(disc, m, params, n).energy(mode) for n in (1, 4)]
    dc = _rel(out["cosserat"][1], out["cosserat"][0])
    dr = _rel(out["rmm"][1], out["rmm"][0])
    ok = dc <= 1e-3 and dr > 1e-2
    detail = (f"Cosserat n=1 vs 4 differ {dc:.2e} (tol 0.1%), RMM {out['rmm'][0]:.6f} vs {out['rmm'][1]:.6f} "
              f"differ {dr:.2%} (> 1%)")
    return CriterionResult(12, "Cosserat axial insensitivity", ok, detail, time.perf_counter() - t0)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


def run(numbers=None, ctx: Context | None = None, echo=None) -> list[CriterionResult]:
    ctx = Context() if ctx is None else ctx
    out = []
    for k in sorted(CRITERIA) if numbers is None else numbers:
        t0 = time.perf_counter()
        res = CRITERIA[k](ctx)
        if not res.seconds:
            res.seconds = time.perf_counter() - t0
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out


__all__ = ["CRITERIA", "Context", "CriterionResult", "rmm_truth", "run"]
