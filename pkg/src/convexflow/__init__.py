"""Numerical laboratory for Gauss-curvature flows of convex bodies.

Bodies are stored by their support function sampled on a sphere grid
(uniform circle in the plane, icosphere in space).  The package provides the
geometry of such bodies, the entropy functionals and entropy points, the
planar Minkowski solver, the expanding and contracting flows, and the
verification experiments built on top of them.
"""
from .body import (
    ConvexBody,
    Snapshot,
    ball,
    boundary_embedding,
    centroid,
    circumcenter,
    covariance,
    covariance_normalize,
    ellipsoid,
    gauss_curvature,
    hausdorff_distance,
    inradius,
    linear_image,
    mean_width,
    mixed_volume,
    polar_body,
    polar_volume,
    surface_area,
    translate,
    unit_ball_volume,
    volume,
    width_diameter,
)
from .entropy import (
    EntropyParams,
    EntropyReport,
    entropy_A,
    entropy_B,
    entropy_point,
    entropy_report,
    gl_invariant,
    santalo_point,
    santalo_product,
)
from .errors import ConvexFlowError
from .experiments import (
    ExperimentResult,
    convergence_experiment,
    duality_experiment,
    random_body,
    random_ellipse,
    stability_sweep,
    verify_lutwak,
    verify_sharp_2d,
    verify_urysohn_chain,
)
from .flow import FlowConfig, FlowRun, FlowState, FlowTrace, polar_duality_check, run, speed, step
from .grid import CircleGrid, IcosphereGrid, hessian_radii, make_circle_grid, make_sphere_grid
from .minkowski import (
    MeasureDensity,
    curvature_image,
    self_similar_branches,
    self_similar_solve,
    solve_minkowski_2d,
)

__version__ = "0.1.0"
