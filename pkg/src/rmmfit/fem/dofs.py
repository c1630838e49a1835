"""Global DOF layout for displacement and micro-distortion fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Mesh


@dataclass(eq=False)
class DofMap:
    """Element-to-global DOF tables per field.

    ``u`` is always present (2 components per Lagrange node, local index
    ``2 k + c``). The micro field ``p_kind`` is one of

    * ``None`` : displacement only,
    * ``"nedelec"`` : two Nedelec rows, 12 local DOFs each (row 0 first),
    * ``"lagrange"`` : P11, P12, P21, P22 per Q2 node (local ``4 k + comp``),
    * ``"scalar"`` : one Q2 scalar per node (the Cosserat rotation ``A12``).
    """

    mesh: Mesh
    p_kind: str | None
    ndofs: int
    u: np.ndarray
    p: np.ndarray | None = None
    p_offset: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def element_dofs(self) -> np.ndarray:
        if self.p is None:
            return self.u
        return np.hstack([self.u, self.p])

    def u_dofs(self, nodes, comp=None) -> np.ndarray:
        nodes = np.asarray(nodes)
        if comp is None:
            return np.column_stack([2 * nodes, 2 * nodes + 1]).ravel()
        return 2 * nodes + comp

    def nedelec_edge_dofs(self, edge, row: int) -> np.ndarray:
        """Global DOFs ``(.., 2)`` of edges for micro-distortion row ``row``."""
        edge = np.asarray(edge)
        base = self.p_offset + row * self.extra["row_size"] + 2 * edge
        return np.stack([base, base + 1], axis=-1)

    def lagrange_p_dofs(self, nodes, comp: int) -> np.ndarray:
        return self.p_offset + 4 * np.asarray(nodes) + comp

    def scalar_dofs(self, nodes) -> np.ndarray:
        return self.p_offset + np.asarray(nodes)


def build_dofmap(mesh: Mesh, p_kind: str | None = None) -> DofMap:
    nn = mesh.n_nodes
    u = np.empty((mesh.n_elements, 2 * mesh.elements.shape[1]), dtype=np.int64)
    u[:, 0::2] = 2 * mesh.elements
    u[:, 1::2] = 2 * mesh.elements + 1
    off = 2 * nn
    if p_kind is None:
        return DofMap(mesh, None, off, u)
    if p_kind == "nedelec":
        if mesh.edges is None:
            raise ValueError("Nedelec DOFs need an edge list (quad mesh)")
        ne, nedge = mesh.n_elements, len(mesh.edges)
        row_size = 2 * nedge + 4 * ne
        rows = []
        for r in range(2):
            base = off + r * row_size
            ed = base + 2 * mesh.elem_edges[:, :, None] + np.arange(2)[None, None, :]
            interior = base + 2 * nedge + 4 * np.arange(ne)[:, None] + np.arange(4)[None, :]
            rows.append(np.hstack([ed.reshape(ne, 8), interior]))
        p = np.hstack(rows)
        return DofMap(mesh, p_kind, off + 2 * row_size, u, p, off, {"row_size": row_size})
    if p_kind == "lagrange":
        p = off + 4 * mesh.elements[:, :, None] + np.arange(4)[None, None, :]
        return DofMap(mesh, p_kind, off + 4 * nn, u, p.reshape(mesh.n_elements, -1), off)
    if p_kind == "scalar":
        return DofMap(mesh, p_kind, off + nn, u, off + mesh.elements, off)
    raise ValueError(f"unknown micro-field kind {p_kind!r}")
