"""Transport-based displacement-interpolation reduced-order modeling.

Reconstructs a time-continuous approximation of a PDE trajectory from sparse
checkpoints: entropic optimal transport couples consecutive checkpoints,
displacement interpolation synthesizes in-between snapshots, time-to-alpha
mappings drive online inference, and a POD/GPR residual corrector de-biases
the result.
"""

from .errors import OtromError
from .fomgen import BlobSpec, ConstantVelocity, FomConfig, RigidRotation, analytic_gaussian, simulate
from .gpr import GPRModel, gpr_fit, gpr_predict, make_gpr, se_kernel
from .interpolation import (
    InterpolationModel,
    build_interpolation_model,
    displacement_interpolate,
    generate_synthetic_matrix,
    synth_snapshot,
)
from .kernels import BACKEND
from .measure import (
    DiscreteMeasure,
    Grid,
    SignedDecomposition,
    Snapshot,
    Trajectory,
    field_to_measures,
    measures_to_field,
)
from .pod import PODBasis, compute_pod, project, projection_error, reconstruct
from .rom import (
    ErrorReport,
    RomModel,
    TimeAlphaMapping,
    error_metrics,
    fit_minl2_mapping,
    linear_map_time,
    n_synth_for_total,
    select_checkpoints,
    train,
)
from .transport import (
    CostMatrix,
    SinkhornOptions,
    TransportPlan,
    build_cost_matrix,
    exact_lp,
    sinkhorn,
    transport_cost,
)

__version__ = "0.1.0"
