"""Dirichlet, periodic and consistent-coupling constraints.

Constraints are recorded on an :class:`~rmmfit.fem.assembly.AssembledSystem`
as fixed values and master/slave offsets, and eliminated by the affine map
``d = T r + g`` (see :class:`Reduction`). Every DOF is free, fixed or slaved,
and a master is never itself a slave.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..geometry import periodic_pairs
from ..loading import DeformationMode, eval_mode, eval_mode_grad
from ..materials import ConstraintError
from .assembly import AssembledSystem, build_boundary_operator, assemble_boundary_penalty, nedelec_interpolate_edges

_VALUE_TOL = 1e-14


def fix(system: AssembledSystem, dofs, values) -> None:
    dofs = np.atleast_1d(np.asarray(dofs, dtype=np.int64)).ravel()
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape).ravel()
    for k, v in zip(dofs.tolist(), values.tolist()):
        if k in system.slaves:
            raise ConstraintError(f"DOF {k} is slaved and cannot also be fixed")
        old = system.fixed.get(k)
        if old is not None and abs(old - v) > _VALUE_TOL * max(1.0, abs(v)):
            raise ConstraintError(f"DOF {k} fixed to both {old:.6g} and {v:.6g}")
        system.fixed[k] = v


def slave(system: AssembledSystem, master: int, slave_dof: int, offset: float) -> None:
    if slave_dof in system.fixed:
        raise ConstraintError(f"DOF {slave_dof} is fixed and cannot also be slaved")
    if slave_dof in system.slaves:
        raise ConstraintError(f"DOF {slave_dof} slaved twice")
    if master in system.slaves or any(m == slave_dof for m, _ in system.slaves.values()):
        raise ConstraintError(f"slaving {slave_dof} -> {master} would chain constraints")
    system.slaves[slave_dof] = (master, offset)


def apply_dirichlet(system: AssembledSystem, mode: DeformationMode) -> AssembledSystem:
    """Fix ``u`` on every boundary node to the mode value."""
    mesh, dm = system.dofmap.mesh, system.dofmap
    nodes = mesh.boundary_nodes()
    ub = eval_mode(mode, mesh.nodes[nodes])
    for c in range(2):
        fix(system, dm.u_dofs(nodes, c), ub[:, c])
    return system


def apply_periodic(system: AssembledSystem, pairs, mean_strain) -> AssembledSystem:
    """Periodic fluctuations on top of ``u = B x`` with ``B = mean_strain``.

    Each slave node gets ``u_s = u_m + B (x_s - x_m)``; the master corner is
    pinned at ``B x`` to remove the rigid translation.
    """
    dm = system.dofmap
    if dm.p_kind is not None:
        raise ConstraintError("periodic constraints are implemented for displacement-only fields")
    B = np.asarray(mean_strain, dtype=float).reshape(2, 2)
    X = dm.mesh.nodes
    for m, s in pairs:
        jump = B @ (X[s] - X[m])
        for c in range(2):
            slave(system, int(dm.u_dofs(m, c)), int(dm.u_dofs(s, c)), float(jump[c]))
    pin = dm.mesh.boundary["corners"]["bottom_left"]
    fix(system, dm.u_dofs([pin]), B @ X[pin])
    return system


def apply_periodic_mesh(system: AssembledSystem, mean_strain) -> AssembledSystem:
    return apply_periodic(system, periodic_pairs(system.dofmap.mesh), mean_strain)


def apply_consistent_coupling(system: AssembledSystem, mode: DeformationMode) -> AssembledSystem:
    """Strong consistent coupling: tangential trace of ``P`` equals that of ``grad u``.

    Nedelec fields fix both tangential moments of every boundary edge to the
    moments of ``d u_i / ds``; Lagrange fields fix the tangential components at
    boundary nodes; the Cosserat rotation is fixed to ``skew(grad u)_12``.
    """
    dm = system.dofmap
    mesh = dm.mesh
    grad = lambda x: eval_mode_grad(mode, x)  # noqa: E731
    if dm.p_kind == "nedelec":
        edges = np.concatenate(list(mesh.boundary_edges().values()))
        vals = nedelec_interpolate_edges(mesh, edges, grad)       # (nb, 2 rows, 2)
        for r in range(2):
            fix(system, dm.nedelec_edge_dofs(edges, r).ravel(), vals[:, r, :].ravel())
    elif dm.p_kind == "lagrange":
        b = mesh.boundary
        for faces, col in ((("left", "right"), 1), (("bottom", "top"), 0)):
            nodes = np.concatenate([b[f] for f in faces])
            G = grad(mesh.nodes[nodes])
            for r in range(2):
                fix(system, dm.lagrange_p_dofs(nodes, 2 * r + col), G[:, r, col])
    elif dm.p_kind == "scalar":
        nodes = mesh.boundary_nodes()
        G = grad(mesh.nodes[nodes])
        fix(system, dm.scalar_dofs(nodes), 0.5 * (G[:, 0, 1] - G[:, 1, 0]))
    else:
        raise ConstraintError("consistent coupling needs a micro-distortion field")
    return system


def apply_consistent_coupling_penalty(system: AssembledSystem, kappa: float) -> AssembledSystem:
    """Add ``kappa/2 sum_i int ((P^i - grad u^i) . t)^2 ds`` over the boundary."""
    if system.dofmap.p_kind not in ("nedelec", "lagrange"):
        raise ConstraintError("penalty coupling needs a full micro-distortion field")
    if kappa <= 0:
        raise ConstraintError("penalty parameter must be positive")
    pen = assemble_boundary_penalty(build_boundary_operator(system.dofmap), kappa)
    system.penalty = pen if system.penalty is None else system.penalty + pen
    return system


@dataclass(eq=False)
class Reduction:
    """Affine elimination ``d = T r + g`` of fixed and slaved DOFs."""

    T: sp.csr_matrix
    free: np.ndarray
    signature: tuple

    @classmethod
    def from_system(cls, system: AssembledSystem) -> "Reduction":
        n = system.ndofs
        fixed = np.fromiter(system.fixed.keys(), dtype=np.int64, count=len(system.fixed))
        sl = np.fromiter(system.slaves.keys(), dtype=np.int64, count=len(system.slaves))
        ms = np.array([m for m, _ in system.slaves.values()], dtype=np.int64)
        status = np.zeros(n, dtype=np.int8)
        status[fixed] = 1
        status[sl] = 2
        free = np.flatnonzero(status == 0)
        col = np.full(n, -1, dtype=np.int64)
        col[free] = np.arange(len(free))
        rows = [free]
        cols = [col[free]]
        live = status[ms] == 0
        rows.append(sl[live])
        cols.append(col[ms[live]])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        T = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, len(free)))
        return cls(T, free, cls.signature_of(system))

    @staticmethod
    def signature_of(system: AssembledSystem) -> tuple:
        sl = np.fromiter(system.slaves.keys(), dtype=np.int64, count=len(system.slaves))
        ms = np.array([m for m, _ in system.slaves.values()], dtype=np.int64)
        order = np.argsort(sl)
        fixed = np.sort(np.fromiter(system.fixed.keys(), dtype=np.int64, count=len(system.fixed)))
        return (system.ndofs, tuple(fixed.tolist()), tuple(sl[order].tolist()), tuple(ms[order].tolist()))

    def lift(self, system: AssembledSystem) -> np.ndarray:
        g = np.zeros(system.ndofs)
        for k, v in system.fixed.items():
            g[k] = v
        for s, (m, off) in system.slaves.items():
            g[s] = g[m] + off if m in system.fixed else off
        return g
