"""Weighted graph Helmholtzian (Hodge 1-Laplacian) estimated from point clouds."""

from .complex import (
    Complex2,
    as_point_cloud,
    boundary_map_1,
    boundary_map_2,
    build_vr_complex,
    default_delta,
    farthest_point_subsample,
)
from .errors import ConsistencyError, ConvergenceError, FormatError, HelmholtzianError, InputError
from .datasets import SyntheticSpec, generate, true_circle_eigenvalues, true_flat_torus_eigenvalues
from .flows import cochain_from_field, field_from_cochain, select_damping, trajectory_to_cochain
from .learning import (
    SslModel,
    cross_validate,
    edge_adjacency_kernel,
    fit_laplacian_rls,
    fit_updown_rls,
    r2_score,
    smooth_flow,
)
from .operators import (
    HelmholtzOperators,
    assemble_down,
    assemble_graph_laplacian,
    assemble_helmholtzian,
    assemble_up,
    helmholtz_operators,
    manifold_helmholtzian,
    symmetrize,
)
from .spectral import (
    BettiEstimate,
    HodgeParts,
    Spectrum,
    classify_eigenflows,
    estimate_betti,
    estimate_betti1,
    hodge_decompose,
    low_spectrum,
)
from .weights import (
    WeightSet,
    compute_weights,
    default_epsilon,
    floor_weights,
    propagate_edge_weights,
    propagate_vertex_weights,
    triangle_weights,
)

__version__ = "0.1.0"
