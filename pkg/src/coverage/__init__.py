from src.coverage.voronoi import (
    CoverageConfig,
    VoronoiCell,
    cell_centroid,
    coverage_objective,
    coverage_step,
    graph_voronoi,
    lloyd_teleport,
)
