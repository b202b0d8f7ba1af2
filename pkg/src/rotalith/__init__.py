"""Rotation-invariant point-cloud feature extraction on dense and sparse paths."""

from .errors import (
    ArchiveFormatError,
    CloudFormatError,
    InputFormatError,
    InvalidRotationError,
    NumericError,
    OutOfBallError,
    RotalithError,
    SingularCosetError,
)
from .geometry import (
    EulerZYZ,
    SphericalPoint,
    cart_to_spherical,
    coset_angle,
    euler_to_matrix,
    matrix_to_euler,
    random_rotation,
    rot_y,
    rot_z,
    spherical_to_cart,
    tmap,
    tmap_inv,
)
from .voxelize import SamplingConfig, SphericalGrid, grid_shift_alpha, normalize_cloud, voxelize
from .so3 import (
    S2Signal,
    SO3Signal,
    SphericalFilter,
    adjoint,
    adjoint_inverse,
    equivariance_report,
    filter_eval,
    gamma_average,
    rotate_grid,
    sh_forward,
    sh_inverse,
    shells_to_channels,
    svc_bruteforce,
    svc_spectral,
)
from .resample import trilinear_sample
from .sprin import (
    MlpFilter,
    SprinLayerCfg,
    dilated_knn,
    farthest_point_sampling,
    feature_propagation,
    relative_invariants,
    set_abstraction,
    sparse_correlate,
)
from .pipeline import (
    Descriptor,
    PrinConfig,
    SprinConfig,
    blob_cloud,
    equivariance_trial,
    head_predict,
    init_weights,
    match_descriptors,
    prin_forward,
    small_sprin_config,
    sprin_forward,
    toy_protocol,
    toy_synth,
    train_head,
)
from .io import read_archive, read_cloud, write_archive, write_cloud

__version__ = "0.1.0"
