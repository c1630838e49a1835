"""Element kinematics and assembly of quadratic energy forms.

Every model energy is a quadratic form ``W = 1/2 s^T H s`` of a pointwise
state vector ``s``. An :class:`ElementOperator` stores ``B`` with
``s = B d_e`` at every quadrature point, so that
``K = sum_e sum_q w_q |J| B^T H B``. State layouts:

========== ==================================================== ===
layout     components                                           ns
========== ==================================================== ===
grad_u     u1,1 u1,2 u2,1 u2,2                                  4
rmm        grad_u, P11 P12 P21 P22, (Curl P)_13, (Curl P)_23     10
cosserat   grad_u, A12, A12,1, A12,2                             7
mm         grad_u, P, P11,1 P11,2 P12,1 ... P22,2                16
========== ==================================================== ===
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..geometry import Mesh
from .basis import edge_points, gauss_1d, gauss_quad, lagrange_basis, nedelec_basis, triangle_rule_deg4
from .dofs import DofMap

LAYOUT_SIZE = {"grad_u": 4, "rmm": 10, "cosserat": 7, "mm": 16}
LAYOUT_P_KIND = {
    "grad_u": (None,),
    "rmm": ("nedelec", "lagrange"),
    "cosserat": ("scalar",),
    "mm": ("lagrange",),
}


@dataclass(eq=False)
class ElementOperator:
    B: np.ndarray        # (ne, nq, ns, nloc)
    wdet: np.ndarray     # (ne, nq)
    edofs: np.ndarray    # (ne, nloc)
    points: np.ndarray   # (ne, nq, 2) physical quadrature points
    layout: str
    ndofs: int

    def states(self, d: np.ndarray) -> np.ndarray:
        return np.einsum("eqsi,ei->eqs", self.B, d[self.edofs])


def _geometry(mesh: Mesh, ref_pts: np.ndarray):
    fam = "T2" if mesh.family == "T2" else "Q2"
    N, dN = lagrange_basis(fam, ref_pts)
    X = mesh.nodes[mesh.elements]                       # (ne, nn, 2)
    J = np.einsum("eki,qkj->eqij", X, dN)               # dx_i/dxi_j
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0):
        raise ValueError("non-positive element Jacobian")
    invJ = np.empty_like(J)
    invJ[..., 0, 0] = J[..., 1, 1] / det
    invJ[..., 1, 1] = J[..., 0, 0] / det
    invJ[..., 0, 1] = -J[..., 0, 1] / det
    invJ[..., 1, 0] = -J[..., 1, 0] / det
    grad = np.einsum("eqji,qkj->eqki", invJ, dN)        # physical gradients
    pts = np.einsum("qk,eki->eqi", N, X)
    return N, grad, J, invJ, det, pts


def _fill_grad_u(B, grad):
    nn = grad.shape[2]
    for a in range(2):
        for b in range(2):
            B[:, :, 2 * a + b, 2 * np.arange(nn) + a] = grad[:, :, :, b]


def _nedelec_physical(mesh: Mesh, ref_pts, invJ, det):
    v_ref, c_ref = nedelec_basis(ref_pts)
    sgn = np.repeat(mesh.elem_edge_signs.astype(float), 2, axis=1)
    sgn = np.hstack([sgn, np.ones((mesh.n_elements, 4))])          # (ne, 12)
    # covariant Piola: v = J^{-T} v_ref, curl = curl_ref / det J
    v = np.einsum("eqji,qkj->eqki", invJ, v_ref) * sgn[:, None, :, None]
    c = c_ref[None] / det[:, :, None] * sgn[:, None, :]
    return v, c


def build_operator(dofmap: DofMap, layout: str) -> ElementOperator:
    mesh = dofmap.mesh
    if dofmap.p_kind not in LAYOUT_P_KIND[layout]:
        raise ValueError(f"layout {layout!r} cannot use micro field {dofmap.p_kind!r}")
    if mesh.family == "T2":
        ref, w = triangle_rule_deg4()
    else:
        ref, w = gauss_quad(3)
    N, grad, J, invJ, det, pts = _geometry(mesh, ref)
    ne, nq, nn = grad.shape[0], grad.shape[1], grad.shape[2]
    edofs = dofmap.element_dofs
    nloc = edofs.shape[1]
    ns = LAYOUT_SIZE[layout]
    B = np.zeros((ne, nq, ns, nloc))
    _fill_grad_u(B, grad)
    off = 2 * nn
    if dofmap.p_kind == "nedelec":
        v, c = _nedelec_physical(mesh, ref, invJ, det)
        for r in range(2):
            cols = off + 12 * r + np.arange(12)
            for comp in range(2):
                B[:, :, 4 + 2 * r + comp, cols] = v[:, :, :, comp]
            B[:, :, 8 + r, cols] = c
    elif dofmap.p_kind == "lagrange":
        Nb = np.broadcast_to(N[None], (ne, nq, nn))
        for pc in range(4):
            cols = off + 4 * np.arange(nn) + pc
            B[:, :, 4 + pc, cols] = Nb
            if layout == "mm":
                for d in range(2):
                    B[:, :, 8 + 2 * pc + d, cols] = grad[:, :, :, d]
        if layout == "rmm":
            for r in range(2):
                # (Curl P)_r3 = P_r2,1 - P_r1,2
                B[:, :, 8 + r, off + 4 * np.arange(nn) + 2 * r + 1] += grad[:, :, :, 0]
                B[:, :, 8 + r, off + 4 * np.arange(nn) + 2 * r] -= grad[:, :, :, 1]
    elif dofmap.p_kind == "scalar":
        cols = off + np.arange(nn)
        B[:, :, 4, cols] = N[None]
        B[:, :, 5, cols] = grad[:, :, :, 0]
        B[:, :, 6, cols] = grad[:, :, :, 1]
    wdet = w[None, :] * det
    return ElementOperator(B, wdet, edofs, pts, layout, dofmap.ndofs)


def assemble_matrix(op: ElementOperator, H: np.ndarray) -> sp.csr_matrix:
    """Global ``K`` for a pointwise Hessian ``H`` (shared or per element)."""
    if H.ndim == 2:
        HB = np.einsum("st,eqti->eqsi", H, op.B)
    else:
        HB = np.einsum("est,eqti->eqsi", H, op.B)
    Ke = np.einsum("eqsi,eqsj,eq->eij", op.B, HB, op.wdet)
    Ke = 0.5 * (Ke + Ke.transpose(0, 2, 1))
    nloc = op.edofs.shape[1]
    rows = np.repeat(op.edofs, nloc, axis=1).ravel()
    cols = np.tile(op.edofs, (1, nloc)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(op.ndofs, op.ndofs)).tocsr()
    K.sum_duplicates()
    return K


def quadratic_energy(op: ElementOperator, H: np.ndarray, d: np.ndarray) -> float:
    """Quadrature of ``1/2 s^T H s`` over the solution ``d``."""
    s = op.states(d)
    if H.ndim == 2:
        w = 0.5 * np.einsum("eqs,st,eqt->eq", s, H, s)
    else:
        w = 0.5 * np.einsum("eqs,est,eqt->eq", s, H, s)
    return float(np.sum(w * op.wdet))


@dataclass(eq=False)
class BoundaryOperator:
    """Tangential mismatch ``r_i = (P^i - grad u^i) . t`` on boundary edges."""

    B: np.ndarray        # (nb, nq, 2, nloc)
    w: np.ndarray        # (nb, nq) quadrature weight times edge length jacobian
    edofs: np.ndarray
    ndofs: int


def build_boundary_operator(dofmap: DofMap, nquad: int = 3) -> BoundaryOperator:
    mesh = dofmap.mesh
    if dofmap.p_kind not in ("nedelec", "lagrange"):
        raise ValueError("consistent coupling needs a full micro-distortion field")
    bset = np.concatenate(list(mesh.boundary_edges().values()))
    hit = np.isin(mesh.elem_edges, bset)
    elems, locs = np.nonzero(hit)
    s, ws = gauss_1d(nquad)
    edofs_all = dofmap.element_dofs
    nloc = edofs_all.shape[1]
    nb = len(elems)
    B = np.zeros((nb, nquad, 2, nloc))
    W = np.zeros((nb, nquad))
    for k in range(4):
        sel = np.flatnonzero(locs == k)
        if not len(sel):
            continue
        e_ids = elems[sel]
        sub = Mesh(mesh.nodes, mesh.elements[e_ids], mesh.family, mesh.material[e_ids], mesh.grid,
                   mesh.edges, mesh.elem_edges[e_ids], mesh.elem_edge_signs[e_ids], mesh.boundary)
        ref = edge_points(k, s)
        N, grad, J, invJ, det, _ = _geometry(sub, ref)
        comp = 0 if k in (0, 2) else 1
        tan = J[:, :, :, comp]                            # dx/ds
        ds = np.linalg.norm(tan, axis=-1)
        t = tan / ds[..., None]
        nn = grad.shape[2]
        Bk = np.zeros((len(sel), nquad, 2, nloc))
        for i in range(2):
            # -(grad u^i) . t
            Bk[:, :, i, 2 * np.arange(nn) + i] -= np.einsum("eqkb,eqb->eqk", grad, t)
        off = 2 * nn
        if dofmap.p_kind == "nedelec":
            v, _ = _nedelec_physical(sub, ref, invJ, det)
            vt = np.einsum("eqkc,eqc->eqk", v, t)
            for i in range(2):
                Bk[:, :, i, off + 12 * i + np.arange(12)] += vt
        else:
            for i in range(2):
                for c in range(2):
                    Bk[:, :, i, off + 4 * np.arange(nn) + 2 * i + c] += N[None] * t[:, :, c, None]
        B[sel] = Bk
        W[sel] = ws[None, :] * ds
    return BoundaryOperator(B, W, edofs_all[elems], dofmap.ndofs)


def assemble_boundary_penalty(bop: BoundaryOperator, kappa: float) -> sp.csr_matrix:
    Ke = kappa * np.einsum("eqsi,eqsj,eq->eij", bop.B, bop.B, bop.w)
    nloc = bop.edofs.shape[1]
    rows = np.repeat(bop.edofs, nloc, axis=1).ravel()
    cols = np.tile(bop.edofs, (1, nloc)).ravel()
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(bop.ndofs, bop.ndofs)).tocsr()


@dataclass(eq=False)
class AssembledSystem:
    """Sparse ``K``, load ``f`` and the constraint records on top of them.

    ``fixed`` maps DOF -> prescribed value; ``slaves`` maps slave DOF ->
    ``(master, offset)`` meaning ``d[slave] = d[master] + offset``.
    """

    K: sp.csr_matrix
    f: np.ndarray
    dofmap: DofMap
    fixed: dict = field(default_factory=dict)
    slaves: dict = field(default_factory=dict)
    penalty: sp.csr_matrix | None = None

    @property
    def ndofs(self) -> int:
        return self.K.shape[0]

    def stiffness(self) -> sp.csr_matrix:
        return self.K if self.penalty is None else self.K + self.penalty

    def energy(self, d: np.ndarray) -> float:
        """``1/2 d^T K d - f^T d`` including any penalty contribution."""
        return float(0.5 * d @ (self.stiffness() @ d) - self.f @ d)

    def dump_coo(self, path) -> None:
        K = self.stiffness().tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {K.shape[0]} {K.shape[1]} {K.nnz}\n")
            for i, j, v in zip(K.row, K.col, K.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def nedelec_interpolate_edges(mesh: Mesh, edges, field, nquad: int = 4) -> np.ndarray:
    """Tangential moments ``(n_edges, 2 rows, 2)`` of a tensor field on global edges.

    ``field(x) -> (npts, 2, 2)``; row ``r`` is the vector field interpolated
    by micro-distortion row ``r``. Moments are taken against {1, s} with
    ``s`` in [-1, 1] running along the global edge orientation.
    """
    s, ws = gauss_1d(nquad)
    ends = mesh.nodes[mesh.edges[np.asarray(edges)]]            # (nb, 2, 2)
    mid = 0.5 * (ends[:, 0] + ends[:, 1])
    half = 0.5 * (ends[:, 1] - ends[:, 0])
    x = mid[:, None, :] + s[None, :, None] * half[:, None, :]
    vals = field(x.reshape(-1, 2)).reshape(len(ends), nquad, 2, 2)
    vt = np.einsum("eqrc,ec->eqr", vals, half)
    return np.stack([np.einsum("q,eqr->er", ws, vt), np.einsum("q,eqr->er", ws * s, vt)], axis=-1)


def interpolate(dofmap: DofMap, u=None, P=None, A=None) -> np.ndarray:
    """Global DOF vector interpolating the given fields.

    ``u(x) -> (npts, 2)``, ``P(x) -> (npts, 2, 2)`` (rows are the micro-distortion
    rows) and the scalar ``A(x) -> (npts,)``. Missing fields interpolate zero.
    """
    mesh = dofmap.mesh
    d = np.zeros(dofmap.ndofs)
    X = mesh.nodes
    if u is not None:
        uv = np.asarray(u(X))
        d[0:2 * mesh.n_nodes:2] = uv[:, 0]
        d[1:2 * mesh.n_nodes:2] = uv[:, 1]
    if P is not None and dofmap.p_kind == "lagrange":
        Pv = np.asarray(P(X)).reshape(-1, 4)
        for comp in range(4):
            d[dofmap.lagrange_p_dofs(np.arange(mesh.n_nodes), comp)] = Pv[:, comp]
    elif P is not None and dofmap.p_kind == "nedelec":
        edges = np.arange(len(mesh.edges))
        ev = nedelec_interpolate_edges(mesh, edges, P)
        for r in range(2):
            d[dofmap.nedelec_edge_dofs(edges, r).ravel()] = ev[:, r, :].ravel()
        ref, w = gauss_quad(4)
        _, _, J, _, _, pts = _geometry(mesh, ref)
        Pv = np.asarray(P(pts.reshape(-1, 2))).reshape(mesh.n_elements, len(w), 2, 2)
        vref = np.einsum("eqic,eqri->eqrc", J, Pv)             # J^T v per row
        mono = np.stack([np.ones(len(w)), ref[:, 0], np.ones(len(w)), ref[:, 1]])
        comp = np.array([0, 0, 1, 1])
        for r in range(2):
            interior = np.einsum("q,kq,eqk->ek", w, mono, vref[:, :, r, comp])
            idx = dofmap.p[:, 12 * r + 8:12 * r + 12]
            d[idx] = interior
    elif P is not None:
        raise ValueError(f"micro field {dofmap.p_kind!r} has no tensor interpolation")
    if A is not None:
        if dofmap.p_kind != "scalar":
            raise ValueError("scalar interpolation needs a scalar micro field")
        d[dofmap.scalar_dofs(np.arange(mesh.n_nodes))] = np.asarray(A(X))
    return d
