"""Structured meshes of the fixed domain [-1/2, 1/2]^2 mm.

Two mesh kinds are produced:

* heterogeneous swiss-cross meshes made of 6-node triangles (``T2``),
  tagged matrix (0) / inclusion (1);
* homogeneous quad meshes (``Q2`` or ``Q2NQ2``) for the continuum models.

Both live on a lattice of ``(2N + 1)^2`` quadratic nodes numbered row-major
(x fastest), so vertex ``(i, j)`` of the N x N grid is lattice node
``(2i, 2j)``. Because numbering is lexicographic, every grid edge oriented by
ascending node index points in +x or +y.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .materials import IsotropicLame

MATRIX, INCLUSION = 0, 1
DOMAIN_HALF = 0.5
SEGMENT_MIN = 2


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class UnitCellGeometry:
    """Swiss-cross unit cell; lengths in mm, moduli in kN/mm^2."""

    l: float
    l1: float
    l2: float
    matrix: IsotropicLame
    inclusion: IsotropicLame

    def __post_init__(self):
        if not (0 < self.l2 < self.l1 < self.l):
            raise GeometryError(f"need 0 < l2 < l1 < l, got {self.l2}, {self.l1}, {self.l}")

    @classmethod
    def swiss_cross(cls, n: int = 1) -> "UnitCellGeometry":
        l = 1.0 / n
        return cls(l, 0.9 * l, 0.3 * l, IsotropicLame(51.08, 26.32), IsotropicLame(51.08e-4, 26.32e-4))

    @property
    def arm_span_factor(self) -> float:
        return self.l1 / self.l

    @property
    def arm_width_factor(self) -> float:
        return self.l2 / self.l

    def inclusion_fraction(self) -> float:
        a, b = self.arm_span_factor, self.arm_width_factor
        return 2 * a * b - b * b

    def with_inclusion(self, inclusion: IsotropicLame) -> "UnitCellGeometry":
        return UnitCellGeometry(self.l, self.l1, self.l2, self.matrix, inclusion)

    def provenance(self) -> dict:
        return {
            "l_mm": self.l, "l1_mm": self.l1, "l2_mm": self.l2,
            "matrix_lambda_kN_per_mm2": self.matrix.lam, "matrix_mu_kN_per_mm2": self.matrix.mu,
            "inclusion_lambda_kN_per_mm2": self.inclusion.lam,
            "inclusion_mu_kN_per_mm2": self.inclusion.mu,
        }


def load_geometry(path: str | Path) -> UnitCellGeometry:
    """Read a unit cell from a JSON config.

    Keys: ``l_mm``, ``l1_factor`` (0.9), ``l2_factor`` (0.3),
    ``matrix_lambda_kN_per_mm2``, ``matrix_mu_kN_per_mm2``,
    ``inclusion_lambda_kN_per_mm2``, ``inclusion_mu_kN_per_mm2``.
    """
    cfg = json.loads(Path(path).read_text())
    return geometry_from_dict(cfg)


def geometry_from_dict(cfg: dict) -> UnitCellGeometry:
    l = float(cfg.get("l_mm", 1.0))
    return UnitCellGeometry(
        l,
        float(cfg.get("l1_factor", 0.9)) * l,
        float(cfg.get("l2_factor", 0.3)) * l,
        IsotropicLame(float(cfg["matrix_lambda_kN_per_mm2"]), float(cfg["matrix_mu_kN_per_mm2"])),
        IsotropicLame(float(cfg["inclusion_lambda_kN_per_mm2"]),
                      float(cfg["inclusion_mu_kN_per_mm2"])),
    )


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable structured mesh.

    ``elements`` holds lattice node ids per element: 6 per T2 triangle
    (vertices counter-clockwise, then midsides 01, 12, 20), 9 per quad in
    tensor order ``3 * jy + ix``. For quads, ``elem_edges`` lists the global
    edges bottom, right, top, left and ``elem_edge_signs`` the orientation of
    the local tangent (+xi on bottom/top, +eta on right/left) relative to the
    global one.
    """

    nodes: np.ndarray
    elements: np.ndarray
    family: str
    material: np.ndarray
    grid: int
    edges: np.ndarray = field(default=None)
    elem_edges: np.ndarray = field(default=None)
    elem_edge_signs: np.ndarray = field(default=None)
    boundary: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def lattice(self) -> int:
        """Nodes per side of the quadratic lattice."""
        return 2 * self.grid + 1

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(np.concatenate([self.boundary[k] for k in ("left", "right", "bottom", "top")]))

    def boundary_edges(self) -> dict[str, np.ndarray]:
        """Global edge ids on each face (quad meshes only)."""
        if self.edges is None:
            raise GeometryError("mesh has no edge list")
        x = self.nodes[self.edges]
        tol = 1e-12
        return {
            "bottom": np.flatnonzero(np.all(np.abs(x[:, :, 1] + DOMAIN_HALF) < tol, axis=1)),
            "right": np.flatnonzero(np.all(np.abs(x[:, :, 0] - DOMAIN_HALF) < tol, axis=1)),
            "top": np.flatnonzero(np.all(np.abs(x[:, :, 1] - DOMAIN_HALF) < tol, axis=1)),
            "left": np.flatnonzero(np.all(np.abs(x[:, :, 0] + DOMAIN_HALF) < tol, axis=1)),
        }


def _lattice(grid: int, coords: np.ndarray | None = None) -> tuple[np.ndarray, callable]:
    m = 2 * grid + 1
    if coords is None:
        coords = np.linspace(-DOMAIN_HALF, DOMAIN_HALF, m)
    X, Y = np.meshgrid(coords, coords)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(ix, iy):
        return iy * m + ix

    return nodes, nid


def _grid_coordinates(m: int, grading: str) -> np.ndarray:
    """Lattice coordinates (vertices and midpoints) of an m-element side."""
    if grading == "uniform":
        verts = np.linspace(-DOMAIN_HALF, DOMAIN_HALF, m + 1)
    elif grading == "cosine":
        verts = -DOMAIN_HALF * np.cos(np.pi * np.arange(m + 1) / m)
        verts = 0.5 * (verts - verts[::-1])  # exact mirror symmetry
    else:
        raise GeometryError(f"unknown grading {grading!r}")
    coords = np.empty(2 * m + 1)
    coords[0::2] = verts
    coords[1::2] = 0.5 * (verts[:-1] + verts[1:])
    return coords


def _boundary_sets(nodes: np.ndarray) -> dict:
    tol = 1e-12
    x, y = nodes[:, 0], nodes[:, 1]
    left = np.flatnonzero(np.abs(x + DOMAIN_HALF) < tol)
    right = np.flatnonzero(np.abs(x - DOMAIN_HALF) < tol)
    bottom = np.flatnonzero(np.abs(y + DOMAIN_HALF) < tol)
    top = np.flatnonzero(np.abs(y - DOMAIN_HALF) < tol)
    corners = {
        "bottom_left": int(np.intersect1d(left, bottom)[0]),
        "bottom_right": int(np.intersect1d(right, bottom)[0]),
        "top_left": int(np.intersect1d(left, top)[0]),
        "top_right": int(np.intersect1d(right, top)[0]),
    }
    return {"left": left, "right": right, "bottom": bottom, "top": top, "corners": corners}


def cross_indicator(points: np.ndarray, geom: UnitCellGeometry, n: int) -> np.ndarray:
    """True where ``points`` lie inside a swiss-cross inclusion of an n x n tiling."""
    cell = 1.0 / n
    local = (points + DOMAIN_HALF) / cell
    local = local - np.floor(local) - 0.5  # in [-1/2, 1/2) per cell
    half_span = 0.5 * geom.arm_span_factor
    half_width = 0.5 * geom.arm_width_factor
    ax, ay = np.abs(local[..., 0]), np.abs(local[..., 1])
    horiz = (ax < half_span) & (ay < half_width)
    vert = (ax < half_width) & (ay < half_span)
    return horiz | vert


def _cell_coordinates(geom: UnitCellGeometry, n: int, refine: int, grading: str) -> np.ndarray:
    """Lattice coordinates (vertices and midpoints) along one side of an n x n tiling.

    The interfaces split each cell side into five segments, which receive
    ``20 refine`` grid intervals in proportion to their length. With
    ``"interface"`` grading every segment gets at least ``2 refine``
    intervals (the thin matrix ligaments at the cell faces carry the shear
    load) and the grid lines cluster quadratically towards both segment ends,
    where the inclusion corners sit.
    """
    per_cell = 20 * refine
    span, width = geom.arm_span_factor, geom.arm_width_factor
    cuts = np.array([0.0, 0.5 - 0.5 * span, 0.5 - 0.5 * width, 0.5 + 0.5 * width, 0.5 + 0.5 * span, 1.0])
    counts = np.diff(cuts) * per_cell
    if np.max(np.abs(counts - np.round(counts))) > 1e-9:
        raise GeometryError("cross interfaces do not align with the grid")
    counts = np.round(counts).astype(int)
    if grading == "uniform":
        local = np.linspace(0.0, 1.0, per_cell + 1)
    elif grading == "interface":
        parts = [cuts[:1]]
        for a, b, k in zip(cuts[:-1], cuts[1:], np.maximum(counts, SEGMENT_MIN * refine)):
            u = np.arange(1, k + 1) / k
            parts.append(a + (b - a) * u ** 2 / (u ** 2 + (1 - u) ** 2))
        local = np.concatenate(parts)
    else:
        raise GeometryError(f"unknown grading {grading!r}")
    verts = np.concatenate([(c + local[:-1]) / n for c in range(n)] + [[1.0]]) - DOMAIN_HALF
    coords = np.empty(2 * len(verts) - 1)
    coords[0::2] = verts
    coords[1::2] = 0.5 * (verts[:-1] + verts[1:])
    return coords


def build_heterogeneous_mesh(geom: UnitCellGeometry, n: int, refine: int = 1,
                             grading: str = "uniform") -> Mesh:
    """T2 mesh of n x n swiss-cross cells, at least ``20 refine`` grid intervals per cell side.

    Grid quads are split into two triangles along alternating diagonals
    (union-jack pattern), which keeps the triangulation mirror symmetric.
    Interfaces are grid lines; see :func:`_cell_coordinates` for ``grading``.
    """
    if n < 1 or refine < 1:
        raise GeometryError("n and refine must be >= 1")
    coords = _cell_coordinates(geom, n, refine, grading)
    N = (len(coords) - 1) // 2
    nodes, nid = _lattice(N, coords)
    tris = []
    for j in range(N):
        for i in range(N):
            a, b = nid(2 * i, 2 * j), nid(2 * i + 2, 2 * j)
            c, d = nid(2 * i + 2, 2 * j + 2), nid(2 * i, 2 * j + 2)
            mab, mbc = nid(2 * i + 1, 2 * j), nid(2 * i + 2, 2 * j + 1)
            mcd, mda = nid(2 * i + 1, 2 * j + 2), nid(2 * i, 2 * j + 1)
            ctr = nid(2 * i + 1, 2 * j + 1)
            if (i + j) % 2 == 0:  # diagonal a-c
                tris.append((a, b, c, mab, mbc, ctr))
                tris.append((a, c, d, ctr, mcd, mda))
            else:  # diagonal b-d
                tris.append((a, b, d, mab, ctr, mda))
                tris.append((b, c, d, mbc, mcd, ctr))
    elements = np.asarray(tris, dtype=np.int64)
    centroids = nodes[elements[:, :3]].mean(axis=1)
    material = np.where(cross_indicator(centroids, geom, n), INCLUSION, MATRIX).astype(np.int8)
    return Mesh(nodes, elements, "T2", material, N, boundary=_boundary_sets(nodes))


def build_homogeneous_mesh(n_cells_hint: int = 10, family: str = "Q2", refine: int = 1,
                          grading: str = "uniform") -> Mesh:
    """Quad mesh with ``n_cells_hint * refine`` elements per side.

    ``family`` is ``"Q2"`` (displacement-only models) or ``"Q2NQ2"``; both
    carry the oriented edge list, which the Nedelec micro-distortion needs.
    ``grading="cosine"`` places the grid lines at Chebyshev-Lobatto points,
    refining towards the boundary where consistent coupling creates layers.
    Elements stay rectangles with midside nodes at their midpoints.
    """
    if family not in ("Q2", "Q2NQ2"):
        raise GeometryError(f"unknown quad family {family!r}")
    m = int(n_cells_hint) * int(refine)
    if m < 1:
        raise GeometryError("need at least one element per side")
    nodes, nid = _lattice(m, _grid_coordinates(m, grading))
    ix = np.arange(m)
    I, J = np.meshgrid(ix, ix)
    I, J = I.ravel(), J.ravel()
    local = [(a, b) for b in range(3) for a in range(3)]
    elements = np.column_stack([nid(2 * I + a, 2 * J + b) for a, b in local]).astype(np.int64)

    # horizontal edges: (i, j) -> (i+1, j), vertical: (i, j) -> (i, j+1)
    h_ids = {}
    edges = []
    for j in range(m + 1):
        for i in range(m):
            h_ids[i, j] = len(edges)
            edges.append((nid(2 * i, 2 * j), nid(2 * i + 2, 2 * j)))
    v_ids = {}
    for j in range(m):
        for i in range(m + 1):
            v_ids[i, j] = len(edges)
            edges.append((nid(2 * i, 2 * j), nid(2 * i, 2 * j + 2)))
    edges = np.asarray(edges, dtype=np.int64)
    elem_edges = np.array(
        [(h_ids[i, j], v_ids[i + 1, j], h_ids[i, j + 1], v_ids[i, j]) for i, j in zip(I, J)],
        dtype=np.int64,
    )
    # local tangents +xi/+eta; global tangent from lower to higher node id
    e = edges[elem_edges]
    d = nodes[e[..., 1]] - nodes[e[..., 0]]
    local_dir = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    signs = np.sign(np.einsum("eki,ki->ek", d, local_dir)).astype(np.int8)
    material = np.zeros(len(elements), dtype=np.int8)
    return Mesh(nodes, elements, family, material, m, edges, elem_edges, signs,
                _boundary_sets(nodes))


def periodic_pairs(mesh: Mesh, tol: float = 1e-10) -> list[tuple[int, int]]:
    """Master/slave node pairs for periodicity on the square domain.

    Right-face nodes are slaved to their left images and top-face nodes to
    their bottom images (corners excluded); the three remaining corners are
    slaved to the bottom-left corner, which also serves as translation pin.
    """
    b = mesh.boundary
    corners = b["corners"]
    corner_set = set(corners.values())
    pairs = []
    for master_face, slave_face, axis in (("left", "right", 1), ("bottom", "top", 0)):
        masters = [k for k in b[master_face] if k not in corner_set]
        slaves = [k for k in b[slave_face] if k not in corner_set]
        if len(masters) != len(slaves):
            raise GeometryError(f"{slave_face} face has {len(slaves)} nodes, {master_face} has {len(masters)}")
        mc = mesh.nodes[masters, axis]
        sc = mesh.nodes[slaves, axis]
        om, os_ = np.argsort(mc), np.argsort(sc)
        if np.max(np.abs(mc[om] - sc[os_]), initial=0.0) > tol:
            raise GeometryError(f"{slave_face} trace does not match {master_face} trace")
        pairs.extend((int(masters[i]), int(slaves[k])) for i, k in zip(om, os_))
    m0 = corners["bottom_left"]
    for name in ("bottom_right", "top_left", "top_right"):
        pairs.append((m0, corners[name]))
    # corners themselves must sit on the domain corners
    cc = mesh.nodes[list(corners.values())]
    if np.max(np.abs(np.abs(cc) - DOMAIN_HALF)) > tol:
        raise GeometryError("corner nodes are not at the domain corners")
    return pairs


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    """Plain-text dump: node block then element block (id, material, nodes)."""
    lines = [f"# family {mesh.family}", f"nodes {mesh.n_nodes}"]
    lines += [f"{k} {x:.16g} {y:.16g}" for k, (x, y) in enumerate(mesh.nodes)]
    lines.append(f"elements {mesh.n_elements}")
    lines += [f"{k} {int(m)} " + " ".join(map(str, el))
              for k, (m, el) in enumerate(zip(mesh.material, mesh.elements))]
    Path(path).write_text("\n".join(lines) + "\n")
