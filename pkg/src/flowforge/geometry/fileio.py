"""Plain-text mesh and solution-field serialization.

Format (line oriented, '.' decimal separator, one record per line)::

    flowforge-mesh 1
    # optional comment lines, e.g. config_hash=...
    nodes <N>
    <x> <y>                 (N lines)
    triangles <M>
    <i> <j> <k> <label>     (M lines, label 0 = no channel)
    edges <K>
    <i> <j> <TAG>           (K lines)
    [fields <F>
    <name_1> ... <name_F>
    <v_1> ... <v_F>         (N lines, node-based values)]

Floats are written with ``repr`` and therefore round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConstructionError
from .mesh import Mesh, TAG_IN, TAG_SYM, ALL_TAGS

FORMAT_HEADER = "flowforge-mesh 1"


def write_mesh(path, mesh: Mesh, fields: dict[str, np.ndarray] | None = None,
               comments: list[str] | None = None) -> None:
    lines = [FORMAT_HEADER]
    for c in comments or []:
        lines.append(f"# {c}")
    lines.append(f"nodes {mesh.n_nodes}")
    lines.extend(f"{repr(x)} {repr(y)}" for x, y in mesh.nodes)
    lines.append(f"triangles {mesh.n_triangles}")
    lines.extend(
        f"{t[0]} {t[1]} {t[2]} {c}"
        for t, c in zip(mesh.triangles, mesh.tri_channel)
    )
    lines.append(f"edges {mesh.boundary_edges.shape[0]}")
    lines.extend(
        f"{e[0]} {e[1]} {tag}"
        for e, tag in zip(mesh.boundary_edges, mesh.boundary_tags)
    )
    if fields:
        names = list(fields)
        lines.append(f"fields {len(names)}")
        lines.append(" ".join(names))
        cols = [np.asarray(fields[n], dtype=float) for n in names]
        for row in zip(*cols):
            lines.append(" ".join(repr(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> tuple[Mesh, dict[str, np.ndarray]]:
    """Parse a mesh file; returns the mesh and any appended node fields."""
    raw = Path(path).read_text().splitlines()
    lines = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise ConstructionError(f"{path}: missing '{FORMAT_HEADER}' header")
    pos = 1

    def expect(keyword: str) -> int:
        nonlocal pos
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != keyword:
            raise ConstructionError(f"{path}: expected '{keyword} <count>' at line {pos}")
        pos += 1
        return int(parts[1])

    n = expect("nodes")
    nodes = np.array(
        [[float(v) for v in lines[pos + i].split()] for i in range(n)]
    )
    pos += n
    m = expect("triangles")
    tri_rows = np.array(
        [[int(v) for v in lines[pos + i].split()] for i in range(m)], dtype=np.int64
    )
    pos += m
    triangles, tri_channel = tri_rows[:, :3], tri_rows[:, 3]
    k = expect("edges")
    bedges = np.empty((k, 2), dtype=np.int64)
    tags = np.empty(k, dtype="U8")
    for i in range(k):
        a, b, tag = lines[pos + i].split()
        if tag not in ALL_TAGS:
            raise ConstructionError(f"{path}: unknown boundary tag {tag!r}")
        bedges[i] = (int(a), int(b))
        tags[i] = tag
    pos += k

    fields: dict[str, np.ndarray] = {}
    if pos < len(lines):
        f = expect("fields")
        names = lines[pos].split()
        pos += 1
        if len(names) != f:
            raise ConstructionError(f"{path}: field name count mismatch")
        values = np.array(
            [[float(v) for v in lines[pos + i].split()] for i in range(n)]
        )
        pos += n
        fields = {name: values[:, j].copy() for j, name in enumerate(names)}

    n_channels = int(tri_channel.max()) if m else 0
    widths = np.empty(n_channels)
    for c in range(1, n_channels + 1):
        sel = tri_channel == c
        if not sel.any():
            raise ConstructionError(f"{path}: channel {c} has no triangles")
        xs = nodes[np.unique(triangles[sel]), 0]
        widths[c - 1] = xs.max() - xs.min()
    axes = np.tile([0.0, -1.0], (n_channels, 1))

    half_symmetry = bool((tags == TAG_SYM).any())
    in_sel = tags == TAG_IN
    if in_sel.any():
        xs = nodes[np.unique(bedges[in_sel]), 0]
        span = xs.max() - xs.min()
        if half_symmetry:
            center = float(nodes[bedges[tags == TAG_SYM][0, 0], 0])
            halfwidth = span
        else:
            center = float(0.5 * (xs.max() + xs.min()))
            halfwidth = span / 2.0
    else:
        center, halfwidth = 0.0, 0.0

    mesh = Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_channel=tri_channel,
        boundary_edges=bedges,
        boundary_tags=tags,
        channel_axes=axes,
        channel_widths=widths,
        half_symmetry=half_symmetry,
        inflow_center=center,
        inflow_halfwidth=halfwidth,
    )
    return mesh, fields
