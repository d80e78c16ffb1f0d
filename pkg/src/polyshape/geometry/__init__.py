"""Polygonal inclusions, perturbation fields, extensions and meshes."""

from .mesh import Mesh, MeshFailure, generate_mesh, read_mesh, write_mesh
from .perturbation import (
    ClearanceTooSmall,
    ExtensionField,
    ExtensionGeometry,
    NonconvexQuadrangle,
    PerturbationField,
    coordinate_motion,
    dilation,
    edge_normal,
    extend_field,
    vertex_motion,
)
from .polygon import (
    CollinearVertex,
    DegeneratePerturbation,
    GeometryError,
    NotInsideOuterDomain,
    OuterDomain,
    Polygon,
    SelfIntersection,
    build_polygon,
    deform,
)

__all__ = [
    "Mesh",
    "MeshFailure",
    "generate_mesh",
    "read_mesh",
    "write_mesh",
    "ClearanceTooSmall",
    "ExtensionField",
    "ExtensionGeometry",
    "NonconvexQuadrangle",
    "PerturbationField",
    "coordinate_motion",
    "dilation",
    "edge_normal",
    "extend_field",
    "vertex_motion",
    "CollinearVertex",
    "DegeneratePerturbation",
    "GeometryError",
    "NotInsideOuterDomain",
    "OuterDomain",
    "Polygon",
    "SelfIntersection",
    "build_polygon",
    "deform",
]
