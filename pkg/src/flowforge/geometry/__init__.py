"""Flow-field geometry: parametric construction, meshing, deformation."""

from .params import FlowFieldParams
from .mesh import (
    Mesh,
    QualityReport,
    mesh_quality,
    apply_deformation,
    validate_deformation,
    signed_areas,
    NODE_FREE,
    NODE_AXIAL,
    NODE_FIXED,
    TAG_IN,
    TAG_OUT,
    TAG_WALL,
    TAG_SYM,
    TAG_INT,
    TAG_WSS_IN,
    TAG_WSS_OUT,
    ALL_TAGS,
)
from .generator import build_parallel_flow_field, build_straight_channel
from .fileio import read_mesh, write_mesh

__all__ = [
    "FlowFieldParams",
    "Mesh",
    "QualityReport",
    "mesh_quality",
    "apply_deformation",
    "validate_deformation",
    "signed_areas",
    "build_parallel_flow_field",
    "build_straight_channel",
    "read_mesh",
    "write_mesh",
    "NODE_FREE",
    "NODE_AXIAL",
    "NODE_FIXED",
    "TAG_IN",
    "TAG_OUT",
    "TAG_WALL",
    "TAG_SYM",
    "TAG_INT",
    "TAG_WSS_IN",
    "TAG_WSS_OUT",
    "ALL_TAGS",
]
