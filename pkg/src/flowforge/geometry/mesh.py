"""Triangle mesh with boundary tags, channel subdomains, and deformation rules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConstructionError, DeformationError

# Boundary edge tags.
TAG_IN = "IN"
TAG_OUT = "OUT"
TAG_WALL = "WALL"
TAG_SYM = "SYM"
TAG_INT = "INT"
TAG_WSS_IN = "WSS_IN"
TAG_WSS_OUT = "WSS_OUT"
ALL_TAGS = (TAG_IN, TAG_OUT, TAG_WALL, TAG_SYM, TAG_INT, TAG_WSS_IN, TAG_WSS_OUT)

# Per-node deformation constraint kinds.
NODE_FREE = 0      # unconstrained (interior and freely deformable wall nodes)
NODE_AXIAL = 1     # channel side wall: may move only along the channel axis
NODE_FIXED = 2     # inlet/outlet/symmetry/outer wall: may not move


@dataclass
class Mesh:
    """Immutable triangulation of a flow-field domain.

    Attributes
    ----------
    nodes : (N, 2) float array of vertex coordinates [m].
    triangles : (M, 3) int array of vertex indices, positively oriented.
    tri_channel : (M,) int array; channel index 1..n for triangles inside a
        channel subdomain, 0 elsewhere.
    boundary_edges : (K, 2) int array of vertex pairs on the boundary.
    boundary_tags : (K,) array of tag strings (see ``ALL_TAGS``).
    channel_axes : (n, 2) unit flow direction per channel.
    channel_widths : (n,) across-axis width per channel [m].
    node_kind / node_channel : per-node deformation constraint derived from
        tags and channel adjacency (outer boundary fixed, side walls axial).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_channel: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    channel_axes: np.ndarray
    channel_widths: np.ndarray
    node_kind: np.ndarray = field(default=None)
    node_channel: np.ndarray = field(default=None)
    half_symmetry: bool = False
    inflow_center: float = 0.0
    inflow_halfwidth: float = 0.0

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.tri_channel = np.asarray(self.tri_channel, dtype=np.int64)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.int64)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype="U8")
        self.channel_axes = np.asarray(self.channel_axes, dtype=float)
        self.channel_widths = np.asarray(self.channel_widths, dtype=float)
        if self.node_kind is None or self.node_channel is None:
            kind, chan = derive_node_constraints(
                self.nodes, self.triangles, self.tri_channel,
                self.boundary_edges, self.boundary_tags,
            )
            self.node_kind = kind
            self.node_channel = chan
        else:
            self.node_kind = np.asarray(self.node_kind, dtype=np.int64)
            self.node_channel = np.asarray(self.node_channel, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_channels(self) -> int:
        return self.channel_axes.shape[0]

    @property
    def channel_lengths(self) -> np.ndarray:
        """Per-channel length, recomputed from the current node positions.

        The length of channel ``i`` is defined as ``area(Omega_i) / width_i``,
        which equals the axial extent for straight-walled channels and stays
        well defined (mean length) when the channel mouths tilt.
        """
        areas = signed_areas(self.nodes, self.triangles)
        lengths = np.zeros(self.n_channels)
        for i in range(1, self.n_channels + 1):
            lengths[i - 1] = areas[self.tri_channel == i].sum() / self.channel_widths[i - 1]
        return lengths

    def channel_triangles(self, i: int) -> np.ndarray:
        return np.nonzero(self.tri_channel == i)[0]

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def boundary_length(self, tag: str | None = None) -> float:
        edges = self.boundary_edges if tag is None else self.edges_with_tag(tag)
        if edges.shape[0] == 0:
            return 0.0
        vec = self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]]
        return float(np.hypot(vec[:, 0], vec[:, 1]).sum())


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = nodes[triangles[:, 0]]
    b = nodes[triangles[:, 1]]
    c = nodes[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def boundary_edge_triangles(triangles: np.ndarray, boundary_edges: np.ndarray) -> np.ndarray:
    """Index of the unique triangle adjacent to each boundary edge."""
    edge_map = {}
    for t, tri in enumerate(triangles):
        for k in range(3):
            key = (min(tri[k], tri[(k + 1) % 3]), max(tri[k], tri[(k + 1) % 3]))
            edge_map.setdefault(key, []).append(t)
    adjacent = np.empty(boundary_edges.shape[0], dtype=np.int64)
    for e, (a, b) in enumerate(boundary_edges):
        key = (min(a, b), max(a, b))
        owners = edge_map.get(key, [])
        if len(owners) != 1:
            raise ConstructionError(
                f"boundary edge ({a}, {b}) adjacent to {len(owners)} triangles, expected 1"
            )
        adjacent[e] = owners[0]
    return adjacent


def derive_node_constraints(nodes, triangles, tri_channel, boundary_edges, boundary_tags):
    """Classify nodes for admissible deformations.

    Nodes on inlet, outlet, symmetry, interface, or outer wall edges are
    fixed.  Nodes on channel side walls (wall edges whose adjacent triangle
    lies in a channel subdomain) move only along the channel axis.  All other
    nodes, including the freely deformable distributor end walls, are free.
    The most restrictive rule wins at corners.
    """
    n = nodes.shape[0]
    kind = np.full(n, NODE_FREE, dtype=np.int64)
    channel = np.zeros(n, dtype=np.int64)
    if boundary_edges.shape[0] == 0:
        return kind, channel
    adjacent = boundary_edge_triangles(triangles, boundary_edges)
    # Axial (side-wall) pass first, fixed pass second so FIXED wins corners.
    for e, (a, b) in enumerate(boundary_edges):
        tag = boundary_tags[e]
        if tag == TAG_WALL:
            ch = tri_channel[adjacent[e]]
            if ch > 0:
                for v in (a, b):
                    if kind[v] == NODE_FREE:
                        kind[v] = NODE_AXIAL
                        channel[v] = ch
    for e, (a, b) in enumerate(boundary_edges):
        tag = boundary_tags[e]
        fixed = tag in (TAG_IN, TAG_OUT, TAG_SYM, TAG_INT) or (
            tag == TAG_WALL and tri_channel[adjacent[e]] == 0
        )
        if fixed:
            kind[[a, b]] = NODE_FIXED
            channel[[a, b]] = 0
    return kind, channel


@dataclass(frozen=True)
class QualityReport:
    """Per-mesh minima of standard triangle quality measures."""

    min_angle_deg: float
    min_radius_ratio: float
    min_signed_area: float
    worst_angle_element: int
    flagged: np.ndarray  # element indices below the configured thresholds

    @property
    def ok(self) -> bool:
        return self.flagged.size == 0 and self.min_signed_area > 0.0


def mesh_quality(mesh: Mesh, min_angle_deg: float = 10.0,
                 min_radius_ratio: float = 0.05) -> QualityReport:
    """Exact per-element quality minima with threshold flags.

    ``radius ratio`` is ``2 r_in / r_circ``, equal to 1 for equilateral
    triangles.  Elements with non-positive signed area are always flagged.
    """
    angles = triangle_angles(mesh.nodes, mesh.triangles)
    areas = signed_areas(mesh.nodes, mesh.triangles)
    ratios = radius_ratios(mesh.nodes, mesh.triangles)
    min_ang = angles.min(axis=1)
    bad = (min_ang < min_angle_deg) | (ratios < min_radius_ratio) | (areas <= 0.0)
    return QualityReport(
        min_angle_deg=float(min_ang.min()),
        min_radius_ratio=float(ratios.min()),
        min_signed_area=float(areas.min()),
        worst_angle_element=int(min_ang.argmin()),
        flagged=np.nonzero(bad)[0],
    )


def triangle_angles(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles in degrees, shape (M, 3). Inverted elements still get
    their geometric angles; area sign is reported separately."""
    p = nodes[triangles]  # (M, 3, 2)
    out = np.empty((triangles.shape[0], 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        cosang = np.einsum("ij,ij->i", u, v) / np.maximum(nu * nv, 1e-300)
        out[:, k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return out


def radius_ratios(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = nodes[triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    s = 0.5 * (a + b + c)
    area = np.abs(signed_areas(nodes, triangles))
    r_in = area / np.maximum(s, 1e-300)
    r_circ = a * b * c / np.maximum(4.0 * area, 1e-300)
    return 2.0 * r_in / np.maximum(r_circ, 1e-300)


def validate_deformation(mesh: Mesh, displacement: np.ndarray, atol: float = 0.0) -> None:
    """Raise ``DeformationError`` unless the field satisfies the constraints."""
    d = np.asarray(displacement, dtype=float)
    if d.shape != (mesh.n_nodes, 2):
        raise DeformationError(
            f"displacement shape {d.shape} does not match mesh ({mesh.n_nodes}, 2)"
        )
    fixed = mesh.node_kind == NODE_FIXED
    if np.any(np.abs(d[fixed]) > atol):
        raise DeformationError("displacement nonzero on fixed boundary nodes")
    axial = np.nonzero(mesh.node_kind == NODE_AXIAL)[0]
    if axial.size:
        axes = mesh.channel_axes[mesh.node_channel[axial] - 1]
        normal = np.stack([-axes[:, 1], axes[:, 0]], axis=1)
        across = np.einsum("ij,ij->i", d[axial], normal)
        if np.any(np.abs(across) > atol):
            raise DeformationError(
                "displacement has across-axis component on channel side walls"
            )


def apply_deformation(mesh: Mesh, displacement: np.ndarray, scale: float = 1.0) -> Mesh:
    """Return a new mesh with nodes shifted by ``scale * displacement``.

    The field must satisfy the admissibility constraints; the move is rejected
    with ``DeformationError`` if any element area becomes non-positive.
    Tags, labels, and constraint classifications are preserved.
    """
    validate_deformation(mesh, displacement)
    new_nodes = mesh.nodes + scale * np.asarray(displacement, dtype=float)
    areas = signed_areas(new_nodes, mesh.triangles)
    if np.any(areas <= 0.0):
        worst = int(areas.argmin())
        raise DeformationError(
            f"deformation inverts element {worst} (signed area {areas[worst]:.3e})"
        )
    return replace(mesh, nodes=new_nodes)
