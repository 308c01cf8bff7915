"""focalsphere: spherical force-directed layout with interactive focal views."""

from .graphs import (
    UNREACHED,
    DistanceField,
    Graph,
    bfs_distances,
    from_edges,
    generate_grid,
    generate_watts_strogatz,
    load_edge_list,
    order_random_walk,
    order_temporal,
)
from .geometry import (
    align_rotation,
    lambert_project,
    random_unit,
    rotate_to_pole,
    slerp,
    spherical_distance,
)
from .tritree import TriangleMesh, TriangleTree, build_icosahedron, build_tree, subdivide
from .layout import (
    Embedding,
    LayoutConfig,
    load_embedding,
    run_layout,
    save_embedding,
    step,
)
from .focal import FocalParams, fit_dmax, fit_dmax_for, focal_adjust
from .metrics import QualityReport, distance_correlation, norm_avg_edge_length, quality_report
from .render import (
    DensityRaster,
    FocalView,
    OverlaySpec,
    hemisphere_density,
    load_events,
    make_focal_view,
    rasterize,
    render_animation,
)
from .service import SessionState, build_session, create_app

__version__ = "0.1.0"

__all__ = [
    "UNREACHED", "DistanceField", "Graph", "bfs_distances", "from_edges",
    "generate_grid", "generate_watts_strogatz", "load_edge_list",
    "order_random_walk", "order_temporal",
    "align_rotation", "lambert_project", "random_unit", "rotate_to_pole",
    "slerp", "spherical_distance",
    "TriangleMesh", "TriangleTree", "build_icosahedron", "build_tree", "subdivide",
    "Embedding", "LayoutConfig", "load_embedding", "run_layout", "save_embedding", "step",
    "FocalParams", "fit_dmax", "fit_dmax_for", "focal_adjust",
    "QualityReport", "distance_correlation", "norm_avg_edge_length", "quality_report",
    "DensityRaster", "FocalView", "OverlaySpec", "hemisphere_density", "load_events",
    "make_focal_view", "rasterize", "render_animation",
    "SessionState", "build_session", "create_app",
]
