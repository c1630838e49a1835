"""Boundary value problems: discretize, assemble, constrain, solve, integrate.

A :class:`Discretization` bundles a mesh with its DOF map and element
operators; it depends only on the mesh and the micro-field kind, so one
instance serves every parameter set, size ``n`` and loading mode.
:class:`ModeSolver` factors the stiffness once per (parameters, ``n``) and
reuses the factorization for every mode with the same constraint pattern.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fem.assembly import (AssembledSystem, ElementOperator, assemble_matrix, build_boundary_operator,
                           assemble_boundary_penalty, build_operator)
from .fem.constraints import (apply_consistent_coupling, apply_dirichlet, apply_periodic)
from .fem.dofs import DofMap, build_dofmap
from .fem.solver import ConstrainedSolver, SolverError
from .geometry import Mesh, UnitCellGeometry, build_heterogeneous_mesh, build_homogeneous_mesh, periodic_pairs
from .loading import DeformationMode
from .models import FieldState, ModelEnergy, get_model

BCS = ("affine", "periodic", "quadratic")
COUPLINGS = ("strong", "penalty", "none")
DEFAULT_CELLS = 10
DEFAULT_GRADING = "cosine"
HET_GRADING = "interface"
PENALTY_FACTOR = 1e4


@dataclass(eq=False)
class Discretization:
    mesh: Mesh
    dofmap: DofMap
    op: ElementOperator
    _penalty_shape: object = field(default=None, repr=False)

    @property
    def layout(self) -> str:
        return self.op.layout

    def boundary_operator(self):
        if self._penalty_shape is None:
            self._penalty_shape = build_boundary_operator(self.dofmap)
        return self._penalty_shape


@lru_cache(maxsize=32)
def _cached_discretization(kind: str, key: tuple, layout: str, p_kind) -> Discretization:
    if kind == "het":
        geom, n, refine, grading = key
        mesh = build_heterogeneous_mesh(geom, n, refine, grading)
    else:
        cells, family, refine, grading = key
        mesh = build_homogeneous_mesh(cells, family, refine, grading)
    dm = build_dofmap(mesh, p_kind)
    return Discretization(mesh, dm, build_operator(dm, layout))


def heterogeneous_discretization(geom: UnitCellGeometry, n: int, refine: int = 1,
                                 grading: str = HET_GRADING) -> Discretization:
    return _cached_discretization("het", (geom, int(n), int(refine), grading), "grad_u", None)


def continuum_discretization(model: ModelEnergy | str, refine: int = 1, cells: int = DEFAULT_CELLS,
                             p_kind: str | None = None, grading: str = DEFAULT_GRADING) -> Discretization:
    """Homogeneous quad discretization for ``model`` (default micro field first in ``p_kinds``)."""
    model = get_model(model) if isinstance(model, str) else model
    p_kind = model.p_kinds[0] if p_kind is None else p_kind
    if p_kind not in model.p_kinds:
        raise ValueError(f"model {model.name} cannot use micro field {p_kind!r}")
    family = "Q2" if p_kind is None else "Q2NQ2"
    return _cached_discretization("hom", (int(cells), family, int(refine), grading), model.layout, p_kind)


def default_kappa(mu_matrix: float, l: float = 1.0) -> float:
    return PENALTY_FACTOR * mu_matrix / l


def assemble_system(disc: Discretization, model: ModelEnergy, params, n_cells: float) -> AssembledSystem:
    model.validate(params)
    H = model.element_hessians(params, n_cells, disc.mesh)
    K = assemble_matrix(disc.op, H)
    return AssembledSystem(K, np.zeros(disc.dofmap.ndofs), disc.dofmap)


def assemble(mesh: Mesh, model: ModelEnergy | str, params, n_cells: float,
             p_kind: str | None = None) -> AssembledSystem:
    """Stiffness of ``model`` on ``mesh`` with curvature scaled by ``1 / n_cells^2``."""
    model = get_model(model) if isinstance(model, str) else model
    p_kind = model.p_kinds[0] if p_kind is None else p_kind
    dm = build_dofmap(mesh, p_kind)
    disc = Discretization(mesh, dm, build_operator(dm, model.layout))
    return assemble_system(disc, model, params, n_cells)


def state_at_quadrature(disc: Discretization, d: np.ndarray) -> FieldState:
    return FieldState.from_vector(disc.layout, disc.op.states(d))


def integrate_density(disc: Discretization, model: ModelEnergy, params, n_cells: float,
                      d: np.ndarray) -> float:
    """Energy of the fields ``d`` by quadrature of the explicit density."""
    W = model.element_density(params, state_at_quadrature(disc, d), n_cells, disc.mesh)
    return float(np.sum(W * disc.op.wdet))


def total_energy(mesh: Mesh, model: ModelEnergy | str, params, n_cells: float, solution: np.ndarray,
                 p_kind: str | None = None) -> float:
    model = get_model(model) if isinstance(model, str) else model
    p_kind = model.p_kinds[0] if p_kind is None else p_kind
    dm = build_dofmap(mesh, p_kind)
    disc = Discretization(mesh, dm, build_operator(dm, model.layout))
    return integrate_density(disc, model, params, n_cells, solution)


def constrain(system: AssembledSystem, mode: DeformationMode, bc: str, coupling: str = "strong",
              kappa: float | None = None, pairs=None) -> AssembledSystem:
    """Apply the boundary data of ``mode`` for boundary-condition kind ``bc``."""
    if bc not in BCS:
        raise ValueError(f"unknown bc {bc!r}")
    if bc == "affine" and not mode.is_affine:
        raise ValueError("affine bc requires a mode with C = 0")
    if bc == "periodic":
        if not mode.is_affine:
            raise ValueError("periodic bc requires a mode with C = 0")
        pairs = periodic_pairs(system.dofmap.mesh) if pairs is None else pairs
        apply_periodic(system, pairs, mode.B)
    else:
        apply_dirichlet(system, mode)
    if system.dofmap.p_kind is not None:
        if coupling == "strong":
            apply_consistent_coupling(system, mode)
        elif coupling == "penalty" and system.penalty is None:
            raise ValueError("penalty coupling requires a penalty matrix on the system")
        elif coupling not in COUPLINGS:
            raise ValueError(f"unknown coupling {coupling!r}")
    return system


class ModeSolver:
    """Solve many loading modes for one (model, parameters, ``n``)."""

    def __init__(self, disc: Discretization, model: ModelEnergy, params, n_cells: float,
                 bc: str = "quadratic", coupling: str = "strong", kappa: float | None = None):
        self.disc, self.model, self.params, self.n_cells = disc, model, params, n_cells
        self.bc, self.coupling = bc, coupling
        self.base = assemble_system(disc, model, params, n_cells)
        if coupling == "penalty" and disc.dofmap.p_kind is not None:
            if kappa is None:
                raise ValueError("penalty coupling needs kappa")
            self.base.penalty = assemble_boundary_penalty(disc.boundary_operator(), kappa)
        self._pairs = periodic_pairs(disc.mesh) if bc == "periodic" else None
        self._solver = None

    def system_for(self, mode: DeformationMode) -> AssembledSystem:
        s = AssembledSystem(self.base.K, self.base.f, self.base.dofmap, penalty=self.base.penalty)
        return constrain(s, mode, self.bc, self.coupling, pairs=self._pairs)

    def solve(self, mode: DeformationMode) -> np.ndarray:
        system = self.system_for(mode)
        if self._solver is None or not self._solver.matches(system):
            self._solver = ConstrainedSolver(system)
        return self._solver.solve(system)

    def energy(self, mode: DeformationMode, d: np.ndarray | None = None) -> float:
        d = self.solve(mode) if d is None else d
        return integrate_density(self.disc, self.model, self.params, self.n_cells, d)

    def energies(self, modes) -> np.ndarray:
        return np.array([self.energy(m) for m in modes])


def solve_mode(disc: Discretization, model: ModelEnergy, params, n_cells: float, mode: DeformationMode,
               bc: str = "quadratic", coupling: str = "strong",
               kappa: float | None = None) -> tuple[np.ndarray, float]:
    ms = ModeSolver(disc, model, params, n_cells, bc, coupling, kappa)
    d = ms.solve(mode)
    return d, ms.energy(mode, d)


__all__ = [
    "BCS", "COUPLINGS", "Discretization", "ModeSolver", "SolverError", "assemble", "assemble_system",
    "constrain", "continuum_discretization", "default_kappa", "heterogeneous_discretization",
    "integrate_density", "solve_mode", "state_at_quadrature", "total_energy",
]
