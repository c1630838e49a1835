"""Reference-element bases and quadrature rules.

Quad reference element is [-1, 1]^2, triangle reference element is the unit
simplex with vertices (0,0), (1,0), (0,1).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def gauss_1d(n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def gauss_quad(n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [-1, 1]^2 (points, weights)."""
    x, w = gauss_1d(n)
    X, Y = np.meshgrid(x, x)
    W = np.outer(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def triangle_rule_deg4() -> tuple[np.ndarray, np.ndarray]:
    """Six-point symmetric rule exact for degree 4 on the unit simplex."""
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = np.array([
        [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
    ])
    w = 0.5 * np.array([wa, wa, wa, wb, wb, wb])
    return pts, w


def _lag1d(t):
    t = np.asarray(t, dtype=float)
    v = np.stack([0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1)
    d = np.stack([t - 0.5, -2.0 * t, t + 0.5], axis=-1)
    return v, d


def lagrange_basis(family: str, ref_points) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic Lagrange values ``(nq, nb)`` and reference gradients ``(nq, nb, 2)``.

    Q2 nodes are ordered ``3 * jy + ix`` on the tensor lattice {-1, 0, 1}^2;
    T2 nodes are the three vertices followed by the midsides 01, 12, 20.
    """
    p = np.atleast_2d(np.asarray(ref_points, dtype=float))
    xi, eta = p[:, 0], p[:, 1]
    if family == "Q2":
        vx, dx = _lag1d(xi)
        vy, dy = _lag1d(eta)
        vals = np.einsum("qj,qi->qji", vy, vx).reshape(len(p), 9)
        gx = np.einsum("qj,qi->qji", vy, dx).reshape(len(p), 9)
        gy = np.einsum("qj,qi->qji", dy, vx).reshape(len(p), 9)
        return vals, np.stack([gx, gy], axis=-1)
    if family == "T2":
        L = np.stack([1.0 - xi - eta, xi, eta], axis=-1)
        dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        vals = np.empty((len(p), 6))
        grads = np.empty((len(p), 6, 2))
        for k in range(3):
            vals[:, k] = L[:, k] * (2 * L[:, k] - 1)
            grads[:, k] = (4 * L[:, k] - 1)[:, None] * dL[k]
        for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            vals[:, 3 + k] = 4 * L[:, a] * L[:, b]
            grads[:, 3 + k] = 4 * (L[:, a][:, None] * dL[b] + L[:, b][:, None] * dL[a])
        return vals, grads
    raise ValueError(f"unknown Lagrange family {family!r}")


# Nedelec first kind, order 2, on the quad: v1 in Q_{1,2}, v2 in Q_{2,1}.
# Monomial layout: first 6 act on v1 as xi^a eta^b with a<=1, b<=2,
# last 6 on v2 with a<=2, b<=1.
_V1_EXP = [(a, b) for b in range(3) for a in range(2)]
_V2_EXP = [(a, b) for b in range(2) for a in range(3)]

# local edges: bottom, right, top, left; tangent +xi or +eta
NED_EDGES = (
    {"fixed": ("eta", -1.0), "comp": 0},
    {"fixed": ("xi", 1.0), "comp": 1},
    {"fixed": ("eta", 1.0), "comp": 0},
    {"fixed": ("xi", -1.0), "comp": 1},
)


def _monomials(p):
    xi, eta = p[:, 0], p[:, 1]
    nq = len(p)
    vals = np.zeros((nq, 12, 2))
    curls = np.zeros((nq, 12))
    for k, (a, b) in enumerate(_V1_EXP):
        vals[:, k, 0] = xi ** a * eta ** b
        # curl = d v2/dxi - d v1/deta
        curls[:, k] = -(b * xi ** a * eta ** (b - 1) if b > 0 else 0.0)
    for k, (a, b) in enumerate(_V2_EXP):
        vals[:, 6 + k, 1] = xi ** a * eta ** b
        curls[:, 6 + k] = a * xi ** (a - 1) * eta ** b if a > 0 else 0.0
    return vals, curls


def edge_points(edge: int, s: np.ndarray) -> np.ndarray:
    """Reference coordinates of points with edge parameter ``s`` in [-1, 1]."""
    which, value = NED_EDGES[edge]["fixed"]
    if which == "eta":
        return np.column_stack([s, np.full_like(s, value)])
    return np.column_stack([np.full_like(s, value), s])


def nedelec_dofs(field, nquad: int = 4) -> np.ndarray:
    """Apply the 12 reference DOF functionals to a reference vector field.

    ``field(points) -> (npts, 2)``. Edge DOFs are tangential moments against
    {1, s} with s the reference coordinate along the edge; interior DOFs are
    moments of v1 against {1, xi} and of v2 against {1, eta}.
    """
    s, ws = gauss_1d(nquad)
    out = np.empty(12)
    for e, spec in enumerate(NED_EDGES):
        vt = field(edge_points(e, s))[:, spec["comp"]]
        out[2 * e] = np.sum(ws * vt)
        out[2 * e + 1] = np.sum(ws * vt * s)
    pq, wq = gauss_quad(nquad)
    v = field(pq)
    out[8] = np.sum(wq * v[:, 0])
    out[9] = np.sum(wq * v[:, 0] * pq[:, 0])
    out[10] = np.sum(wq * v[:, 1])
    out[11] = np.sum(wq * v[:, 1] * pq[:, 1])
    return out


@lru_cache(maxsize=1)
def _nedelec_coefficients() -> np.ndarray:
    V = np.empty((12, 12))
    for m in range(12):
        V[:, m] = nedelec_dofs(lambda p, m=m: _monomials(p)[0][:, m, :])
    return np.linalg.inv(V)


def nedelec_basis(ref_points, edge_signs=(1, 1, 1, 1)) -> tuple[np.ndarray, np.ndarray]:
    """Reference Nedelec values ``(nq, 12, 2)`` and scalar curls ``(nq, 12)``.

    Basis function ``j`` is dual to DOF ``j`` of :func:`nedelec_dofs`. A sign
    of -1 for edge ``e`` negates both basis functions of that edge.
    """
    p = np.atleast_2d(np.asarray(ref_points, dtype=float))
    C = _nedelec_coefficients()
    mv, mc = _monomials(p)
    vals = np.einsum("qmc,mj->qjc", mv, C)
    curls = mc @ C
    sgn = np.ones(12)
    for e, s in enumerate(edge_signs):
        sgn[2 * e:2 * e + 2] = s
    return vals * sgn[None, :, None], curls * sgn[None, :]
