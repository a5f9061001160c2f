"""Deterministic structured triangulation of parallel-channel flow fields.

The flow field consists of an inlet distributor (top), ``n`` vertical
channel strips, and an outlet distributor (bottom).  The distributor floor
(the movable end wall carrying the wall-shear-stress objective) is a wedge:
it is highest at the array midline and drops linearly outward, so outer
channels are shorter than inner ones.  The mesh is a tensor-product grid
whose channel-band and inlet-band rows are sheared to follow the floor,
split into right triangles; construction is fully deterministic.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConstructionError
from .mesh import (
    Mesh,
    TAG_IN,
    TAG_OUT,
    TAG_SYM,
    TAG_WALL,
    TAG_WSS_IN,
    TAG_WSS_OUT,
    boundary_edge_triangles,
)
from .params import FlowFieldParams


def _row_count(thickness_min: float, thickness_max: float, h: float,
               minimum: int = 1) -> int:
    """Rows for a band of varying thickness: geometric-mean spacing keeps
    the aspect ratio bounded on both the thick and the thin side."""
    ref = float(np.sqrt(thickness_min * thickness_max))
    return max(minimum, int(round(ref / h)))


def _subdivide(breaks: np.ndarray, h: float) -> np.ndarray:
    out = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(round((b - a) / h)))
        seg = np.linspace(a, b, n + 1)
        out.extend(seg[1:])
    return np.array(out)


def _unique_sorted(values, tol: float) -> np.ndarray:
    vals = np.sort(np.asarray(values, dtype=float))
    keep = [vals[0]]
    for v in vals[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    return np.array(keep)


def _grid_index(grid: np.ndarray, value: float, tol: float) -> int:
    i = int(np.searchsorted(grid, value - tol))
    if i >= grid.size or abs(grid[i] - value) > tol:
        raise ConstructionError(f"value {value} not on the structured grid")
    return i


def _triangulate_columns(xg: np.ndarray, Y: np.ndarray, cell_fluid: np.ndarray):
    """Triangulate a column grid: node (i, j) at (xg[i], Y[i, j]).

    Returns nodes, triangles, and the (i, j) cell of each triangle pair.
    Node ids are assigned row-major bottom-to-top for stable ordering.
    """
    nx, ny = Y.shape
    used = np.zeros((nx, ny), dtype=bool)
    used[:-1, :-1] |= cell_fluid
    used[1:, :-1] |= cell_fluid
    used[:-1, 1:] |= cell_fluid
    used[1:, 1:] |= cell_fluid
    node_id = np.full((nx, ny), -1, dtype=np.int64)
    order = np.argwhere(used.T)  # (j, i) sorted by row then column
    for n, (j, i) in enumerate(order):
        node_id[i, j] = n
    nodes = np.stack([xg[order[:, 1]], Y[order[:, 1], order[:, 0]]], axis=1)
    cells = np.argwhere(cell_fluid)
    tris = np.empty((2 * cells.shape[0], 3), dtype=np.int64)
    cell_of = np.empty((2 * cells.shape[0], 2), dtype=np.int64)
    for k, (i, j) in enumerate(cells):
        n00 = node_id[i, j]
        n10 = node_id[i + 1, j]
        n01 = node_id[i, j + 1]
        n11 = node_id[i + 1, j + 1]
        # Split along the shorter diagonal: much better angles in sheared cells.
        d_main = nodes[n11] - nodes[n00]
        d_anti = nodes[n01] - nodes[n10]
        if d_main @ d_main <= d_anti @ d_anti:
            tris[2 * k] = (n00, n10, n11)
            tris[2 * k + 1] = (n00, n11, n01)
        else:
            tris[2 * k] = (n00, n10, n01)
            tris[2 * k + 1] = (n10, n11, n01)
        cell_of[2 * k] = (i, j)
        cell_of[2 * k + 1] = (i, j)
    return nodes, tris, cell_of


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    key = np.sort(edges, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    return edges[np.sort(first[counts == 1])]


def build_parallel_flow_field(params: FlowFieldParams, target_h: float) -> Mesh:
    """Mesh the flow field described by ``params`` at edge length ``target_h``.

    Under half symmetry only channels ``1 .. n/2`` are meshed and the cut at
    the array midline is tagged ``SYM``.  Channel subdomains are labeled
    1-based from the left.  The wedge-shaped distributor end walls are
    tagged ``WSS_IN`` (inlet side) and ``WSS_OUT`` (outlet side); they are
    the freely deformable boundary parts.
    """
    params.validate()
    if not target_h < params.channel_width / 2.0:
        raise ConstructionError(
            f"target_h = {target_h} must be below channel_width / 2 "
            f"= {params.channel_width / 2.0}"
        )
    n = params.n_channels
    s = params.channel_spacing
    w = params.channel_width
    # Narrow end margins: the distributors barely overhang the outermost
    # channels, so no stagnant cul-de-sac forms beyond the last mouth.
    margin = min((s - w) / 2.0, w / 4.0)
    x_center = margin + w / 2.0 + (n - 1) * s / 2.0
    x_full = 2.0 * margin + (n - 1) * s + w
    x_end = x_center if params.half_symmetry else x_full
    n_meshed = n // 2 if params.half_symmetry else n

    # Rhombic layout: both distributor end walls are wedges (half the taper
    # each), the outer frame runs parallel to them with flat caps over the
    # inlet and outlet segments, so both distributors have constant depth.
    cap_in = params.inlet_width / 2.0 + s / 2.0
    cap_out = params.outlet_width / 2.0 + s / 2.0
    half = params.channel_length_center / 2.0
    slope = params.taper / 2.0

    def floor_height(x):
        return half - slope * np.abs(x - x_center)

    def ceil_height(x):
        return -half + slope * np.abs(x - x_center)

    def frame_top(x):
        return (half + params.distributor_depth_in
                - slope * np.maximum(0.0, np.abs(x - x_center) - cap_in))

    def frame_bot(x):
        return (-half - params.distributor_depth_out
                + slope * np.maximum(0.0, np.abs(x - x_center) - cap_out))

    left_wall = np.array([margin + i * s for i in range(n_meshed)])
    right_wall = left_wall + w
    inlet_lo = x_center - params.inlet_width / 2.0
    inlet_hi = min(x_center + params.inlet_width / 2.0, x_end)
    outlet_lo = x_center - params.outlet_width / 2.0
    outlet_hi = min(x_center + params.outlet_width / 2.0, x_end)

    tol = 1e-9 * n * s
    x_breaks = _unique_sorted(
        np.concatenate([[0.0, x_end, inlet_lo, inlet_hi, outlet_lo, outlet_hi,
                         max(0.0, x_center - cap_in), min(x_end, x_center + cap_in),
                         max(0.0, x_center - cap_out), min(x_end, x_center + cap_out)],
                        left_wall, right_wall]), tol)
    if x_breaks[0] < -tol or x_breaks[-1] > x_end + tol:
        raise ConstructionError("inlet/outlet segments fall outside the domain")
    xg = _subdivide(x_breaks, target_h)
    nx = xg.size

    floor = floor_height(xg)
    ceil = ceil_height(xg)
    top = frame_top(xg)
    bot = frame_bot(xg)
    chan_min = float((floor - ceil).min())
    chan_max = float((floor - ceil).max())
    if chan_min <= 0.0:
        raise ConstructionError("taper collapses the outermost channels")
    n_out = _row_count(float((ceil - bot).min()), float((ceil - bot).max()),
                       target_h, minimum=2)
    n_ch = _row_count(chan_min, chan_max, target_h, minimum=2)
    n_in = _row_count(float((top - floor).min()), float((top - floor).max()),
                      target_h, minimum=2)

    ny = n_out + n_ch + n_in + 1
    Y = np.empty((nx, ny))
    for j in range(n_out + 1):
        Y[:, j] = bot + (ceil - bot) * (j / n_out)
    for j in range(1, n_ch + 1):
        Y[:, n_out + j] = ceil + (floor - ceil) * (j / n_ch)
    for j in range(1, n_in + 1):
        Y[:, n_out + n_ch + j] = floor + (top - floor) * (j / n_in)

    cell_fluid = np.ones((nx - 1, ny - 1), dtype=bool)
    # Channel band: carve every column that is not inside a channel strip.
    jch0, jch1 = n_out, n_out + n_ch
    in_channel = np.zeros(nx - 1, dtype=np.int64)  # channel id per column, 0 = solid
    for i in range(n_meshed):
        ia = _grid_index(xg, left_wall[i], tol)
        ib = _grid_index(xg, right_wall[i], tol)
        in_channel[ia:ib] = i + 1
    cell_fluid[in_channel == 0, jch0:jch1] = False

    nodes, tris, cell_of = _triangulate_columns(xg, Y, cell_fluid)
    tri_channel = np.where(
        (cell_of[:, 1] >= jch0) & (cell_of[:, 1] < jch1),
        in_channel[cell_of[:, 0]], 0).astype(np.int64)

    bedges = _boundary_edges(tris)
    adjacent = boundary_edge_triangles(tris, bedges)
    tags = np.empty(bedges.shape[0], dtype="U8")
    # Boundary lines are identified by their defining height functions, which
    # also covers the slanted frame and end-wall segments.
    ya = nodes[bedges[:, 0], 1]
    yb = nodes[bedges[:, 1], 1]
    xa = nodes[bedges[:, 0], 0]
    xb = nodes[bedges[:, 1], 0]
    midx = 0.5 * (xa + xb)
    on_top = (np.abs(ya - frame_top(xa)) <= tol) & (np.abs(yb - frame_top(xb)) <= tol)
    on_bot = (np.abs(ya - frame_bot(xa)) <= tol) & (np.abs(yb - frame_bot(xb)) <= tol)
    on_floor = (np.abs(ya - floor_height(xa)) <= tol) & (np.abs(yb - floor_height(xb)) <= tol)
    on_ceil = (np.abs(ya - ceil_height(xa)) <= tol) & (np.abs(yb - ceil_height(xb)) <= tol)
    for e in range(bedges.shape[0]):
        if on_top[e]:
            tags[e] = TAG_IN if inlet_lo < midx[e] < inlet_hi else TAG_WALL
        elif on_bot[e]:
            tags[e] = TAG_OUT if outlet_lo < midx[e] < outlet_hi else TAG_WALL
        elif abs(xa[e]) <= tol and abs(xb[e]) <= tol:
            tags[e] = TAG_WALL
        elif abs(xa[e] - x_end) <= tol and abs(xb[e] - x_end) <= tol:
            tags[e] = TAG_SYM if params.half_symmetry else TAG_WALL
        elif abs(xa[e] - xb[e]) <= tol:
            if tri_channel[adjacent[e]] == 0:
                raise ConstructionError(
                    f"unclassifiable vertical boundary edge at x = {xa[e]}"
                )
            tags[e] = TAG_WALL  # channel side wall
        elif on_floor[e]:
            tags[e] = TAG_WSS_IN   # inlet distributor end wall (wedge floor)
        elif on_ceil[e]:
            tags[e] = TAG_WSS_OUT  # outlet distributor end wall (wedge ceiling)
        else:
            raise ConstructionError(
                f"unclassifiable boundary edge near ({midx[e]}, {0.5 * (ya[e] + yb[e])})"
            )

    axes = np.tile([0.0, -1.0], (n_meshed, 1))  # flow runs top to bottom
    return Mesh(
        nodes=nodes,
        triangles=tris,
        tri_channel=tri_channel,
        boundary_edges=bedges,
        boundary_tags=tags,
        channel_axes=axes,
        channel_widths=np.full(n_meshed, w),
        half_symmetry=params.half_symmetry,
        inflow_center=x_center,
        inflow_halfwidth=params.inlet_width / 2.0,
    )


def build_straight_channel(width: float, length: float, target_h: float) -> Mesh:
    """Single straight channel fixture: inlet across the top, outlet across
    the bottom, no-slip side walls.  Used by solver verification cases."""
    if width <= 0 or length <= 0 or target_h <= 0:
        raise ConstructionError("width, length, and target_h must be positive")
    xg = _subdivide(np.array([0.0, width]), target_h)
    yg = _subdivide(np.array([0.0, length]), target_h)
    Y = np.tile(yg, (xg.size, 1))
    cell_fluid = np.ones((xg.size - 1, yg.size - 1), dtype=bool)
    nodes, tris, _ = _triangulate_columns(xg, Y, cell_fluid)
    tri_channel = np.ones(tris.shape[0], dtype=np.int64)
    bedges = _boundary_edges(tris)
    tol = 1e-9 * max(width, length)
    mid = 0.5 * (nodes[bedges[:, 0]] + nodes[bedges[:, 1]])
    tags = np.empty(bedges.shape[0], dtype="U8")
    for e in range(bedges.shape[0]):
        x, y = mid[e]
        if abs(y - length) <= tol:
            tags[e] = TAG_IN
        elif abs(y) <= tol:
            tags[e] = TAG_OUT
        else:
            tags[e] = TAG_WALL
    return Mesh(
        nodes=nodes,
        triangles=tris,
        tri_channel=tri_channel,
        boundary_edges=bedges,
        boundary_tags=tags,
        channel_axes=np.array([[0.0, -1.0]]),
        channel_widths=np.array([width]),
        half_symmetry=False,
        inflow_center=width / 2.0,
        inflow_halfwidth=width / 2.0,
    )
