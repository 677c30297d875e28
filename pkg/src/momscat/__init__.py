"""momscat: method-of-moments scattering solver for closed PEC bodies.

Dense boundary-element solver built on RWG functions, with the classical
EFIE/MFIE/CFIE systems, weak-form identity-operator variants (WMFIE-1/2/3,
WCFIE), a weak-form combined-source formulation, a Mie-series reference for
spheres, and a scenario-driven experiment harness.
"""

__version__ = "0.1.0"

from momscat.mesh import (
    TriangleMesh,
    MeshStats,
    MeshError,
    load_mesh,
    generate_sphere,
    generate_canonical,
    mesh_stats,
)
from momscat.rwg import RwgSpace, ChargeDiagnostics, build_rwg_space, eval_beta, eval_alpha, charge_vector
from momscat.quadrature import TriangleRule, gauss_rule, integrate_static_singular, integrate_kernel_pair
from momscat.operators import (
    OperatorSet,
    ExcitationVectors,
    PlaneWave,
    QuadConfig,
    assemble,
    assemble_efie_matrix,
    excite_plane_wave,
    gram_matrices,
    gram_bb_entry,
    gram_ba_entry,
)
from momscat.formulations import (
    FormulationConfig,
    FormulationOperator,
    GramSolver,
    apply_W,
    make_efie,
    make_mfie,
    make_wmfie,
    make_cfie,
    make_csie,
    make_formulation,
)
from momscat.solvers import SolveReport, NonSpdError, gmres, pcg_diag, dense_solve
from momscat.postproc import (
    FarFieldCut,
    ErrorReport,
    far_field,
    bistatic_rcs,
    near_field,
    relative_error_cut,
    current_error,
    lf_divergence_sweep,
    cut_directions,
    sphere_grid,
)
from momscat.mie import MieSolution, mie_coefficients, mie_far_field, mie_near_field, efficiencies
