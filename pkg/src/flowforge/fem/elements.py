"""Taylor-Hood (P2/P1) reference elements, quadrature, and dof management."""

from __future__ import annotations

import numpy as np

from ..geometry.mesh import Mesh, boundary_edge_triangles

# Dunavant 7-point rule, exact for polynomials up to degree 5 on the
# reference triangle {x, y >= 0, x + y <= 1}. Weights sum to the area 1/2.
_A1 = 0.0597158717897698
_B1 = 0.4701420641051151
_A2 = 0.7974269853530873
_B2 = 0.1012865073234563
TRI_QP = np.array([
    [1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1],
    [_B1, _A1],
    [_B1, _B1],
    [_A2, _B2],
    [_B2, _A2],
    [_B2, _B2],
])
TRI_QW = 0.5 * np.array([
    0.225,
    0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
    0.1259391805448272, 0.1259391805448272, 0.1259391805448272,
])

# 3-point Gauss-Legendre on [0, 1] for boundary-edge integrals.
_G = np.sqrt(3.0 / 5.0)
EDGE_QP = 0.5 * (1.0 + np.array([-_G, 0.0, _G]))
EDGE_QW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def p1_basis(points: np.ndarray) -> np.ndarray:
    xi, eta = points[:, 0], points[:, 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=1)


P1_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(points: np.ndarray) -> np.ndarray:
    """P2 values; local nodes 0,1,2 = vertices, 3,4,5 = midpoints of edges
    (0,1), (1,2), (2,0)."""
    lam = p1_basis(points)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.stack([
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ], axis=1)


def p2_grad(points: np.ndarray) -> np.ndarray:
    """Reference gradients, shape (npts, 6, 2)."""
    lam = p1_basis(points)
    npts = points.shape[0]
    out = np.empty((npts, 6, 2))
    for i in range(3):
        out[:, i, :] = (4.0 * lam[:, i, None] - 1.0) * P1_GRAD[i]
    pairs = [(0, 1), (1, 2), (2, 0)]
    for k, (i, j) in enumerate(pairs):
        out[:, 3 + k, :] = 4.0 * (lam[:, i, None] * P1_GRAD[j] + lam[:, j, None] * P1_GRAD[i])
    return out


_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class FemSpace:
    """Dof layout and per-element geometry for a Taylor-Hood discretization.

    Dof ordering: ``u_x`` at all P2 nodes, then ``u_y``, then pressure at the
    vertices.  P2 nodes are the mesh vertices followed by one node per mesh
    edge (midpoints of straight edges, positions derived from the vertices).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        tri = mesh.triangles
        m = tri.shape[0]
        halfedges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        key = np.sort(halfedges, axis=1)
        self.edges, inverse = np.unique(key, axis=0, return_inverse=True)
        self.tri_edges = inverse.reshape(3, m).T
        self.n_vertices = mesh.n_nodes
        self.n_edges = self.edges.shape[0]
        self.n_p2 = self.n_vertices + self.n_edges
        self.tri_p2 = np.hstack([tri, self.n_vertices + self.tri_edges])
        self.ndof = 2 * self.n_p2 + self.n_vertices
        self.phi = p2_basis(TRI_QP)          # (Q, 6)
        self.ghat = p2_grad(TRI_QP)          # (Q, 6, 2)
        self.psi = p1_basis(TRI_QP)          # (Q, 3)
        self._boundary_cache: dict[tuple, "BoundaryGeometry"] = {}
        self.update_geometry(mesh.nodes)

    def boundary_geometry(self, tags: tuple[str, ...]) -> "BoundaryGeometry":
        """Cached boundary adjacency/reference data for the edges carrying
        any of the given tags (topology only; geometry is re-evaluated)."""
        key = tuple(sorted(tags))
        if key not in self._boundary_cache:
            sel = np.isin(self.mesh.boundary_tags, list(tags))
            self._boundary_cache[key] = BoundaryGeometry(self, np.nonzero(sel)[0])
        return self._boundary_cache[key]

    # -- dof helpers ---------------------------------------------------
    def u_dof(self, p2_nodes, comp: int):
        return comp * self.n_p2 + np.asarray(p2_nodes)

    def p_dof(self, vertices):
        return 2 * self.n_p2 + np.asarray(vertices)

    def split(self, x: np.ndarray):
        """(u_x, u_y, p) views of a solution vector."""
        return (x[: self.n_p2], x[self.n_p2: 2 * self.n_p2], x[2 * self.n_p2:])

    def velocity(self, x: np.ndarray) -> np.ndarray:
        """(n_p2, 2) velocity array."""
        return np.stack([x[: self.n_p2], x[self.n_p2: 2 * self.n_p2]], axis=1)

    # -- geometry ------------------------------------------------------
    def update_geometry(self, coords: np.ndarray) -> None:
        """Recompute affine maps and physical basis gradients for new vertex
        positions (mesh topology unchanged)."""
        self.coords = np.asarray(coords, dtype=float)
        tri = self.mesh.triangles
        p0 = self.coords[tri[:, 0]]
        p1 = self.coords[tri[:, 1]]
        p2 = self.coords[tri[:, 2]]
        B = np.empty((tri.shape[0], 2, 2))
        B[:, :, 0] = p1 - p0
        B[:, :, 1] = p2 - p0
        self.B = B
        self.detB = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        inv = np.empty_like(B)
        inv[:, 0, 0] = B[:, 1, 1]
        inv[:, 0, 1] = -B[:, 0, 1]
        inv[:, 1, 0] = -B[:, 1, 0]
        inv[:, 1, 1] = B[:, 0, 0]
        inv /= self.detB[:, None, None]
        self.invB = inv
        self.invBT = np.swapaxes(inv, 1, 2)
        # Physical P2 gradients at the volume quadrature points: (M, Q, 6, 2).
        self.G = np.einsum("mde,qae->mqad", self.invBT, self.ghat)
        self.p2_coords = np.concatenate([
            self.coords,
            0.5 * (self.coords[self.edges[:, 0]] + self.coords[self.edges[:, 1]]),
        ])
        # Columns of B^{-T} drive all coordinate derivatives: H[v] = B^{-T} c_v
        # with c_1 = -(e0 + e1), c_2 = e0, c_3 = e1.
        H = np.empty((tri.shape[0], 3, 2))
        H[:, 1, :] = self.invBT[:, :, 0]
        H[:, 2, :] = self.invBT[:, :, 1]
        H[:, 0, :] = -H[:, 1, :] - H[:, 2, :]
        self.H = H

    def p2_nodes_of_boundary_edge(self, a: int, b: int) -> np.ndarray:
        """P2 node ids lying on the mesh edge (a, b): both vertices and the
        midpoint node."""
        lo, hi = (a, b) if a < b else (b, a)
        eid = np.searchsorted(self.edges[:, 0], lo)
        while eid < self.n_edges and self.edges[eid, 0] == lo:
            if self.edges[eid, 1] == hi:
                return np.array([a, b, self.n_vertices + eid])
            eid += 1
        raise KeyError(f"({a}, {b}) is not a mesh edge")


class BoundaryGeometry:
    """Precomputed adjacency and reference placement for boundary edges.

    For every selected boundary edge, stores the adjacent triangle, the P2
    basis values/reference gradients at the edge quadrature points (placed on
    the corresponding edge of the reference triangle), and the local vertex
    indices of the stored edge endpoints.
    """

    def __init__(self, space: FemSpace, edge_indices: np.ndarray):
        mesh = space.mesh
        self.space = space
        self.edge_indices = np.asarray(edge_indices, dtype=np.int64)
        edges = mesh.boundary_edges[self.edge_indices]
        self.edges = edges
        all_adjacent = boundary_edge_triangles(mesh.triangles, mesh.boundary_edges)
        self.tri = all_adjacent[self.edge_indices]
        ne = edges.shape[0]
        nq = EDGE_QP.size
        self.phi = np.empty((ne, nq, 6))
        self.ghat = np.empty((ne, nq, 6, 2))
        self.local_a = np.empty(ne, dtype=np.int64)
        self.local_b = np.empty(ne, dtype=np.int64)
        for e in range(ne):
            tri_verts = mesh.triangles[self.tri[e]]
            la = int(np.nonzero(tri_verts == edges[e, 0])[0][0])
            lb = int(np.nonzero(tri_verts == edges[e, 1])[0][0])
            self.local_a[e] = la
            self.local_b[e] = lb
            ref = (1.0 - EDGE_QP)[:, None] * _REF_VERTS[la] + EDGE_QP[:, None] * _REF_VERTS[lb]
            self.phi[e] = p2_basis(ref)
            self.ghat[e] = p2_grad(ref)

    def geometry(self, coords: np.ndarray):
        """Per-edge tangent vector, length, outward normal, and physical P2
        gradients at the edge quadrature points for given vertex positions."""
        edges = self.edges
        a = coords[edges[:, 0]]
        b = coords[edges[:, 1]]
        tvec = b - a
        length = np.hypot(tvec[:, 0], tvec[:, 1])
        normal = np.stack([tvec[:, 1], -tvec[:, 0]], axis=1) / length[:, None]
        # Orient outward: away from the adjacent triangle centroid.
        tri = self.space.mesh.triangles[self.tri]
        centroid = coords[tri].mean(axis=1)
        midpoint = 0.5 * (a + b)
        flip = np.einsum("ed,ed->e", normal, midpoint - centroid) < 0.0
        normal[flip] *= -1.0
        invBT = self.space.invBT[self.tri]
        G = np.einsum("efg,eqag->eqaf", invBT, self.ghat)
        return tvec, length, normal, G
