"""Equivariant convolution machinery on S2, SO(3), lattices and meshes.

Conventions (normative) are documented in docs/conventions.md; the
audit module asserts them as named checks with residuals.
"""

__version__ = "0.1.0"

from .errors import (
    BandlimitOverflow,
    EquivarError,
    KernelConstraintViolated,
    NonManifold,
    NotARotation,
    ShapeMismatch,
    TieDetected,
)
from .harmonics import (
    CGTable,
    EulerZYZ,
    cg_block,
    clebsch_gordan,
    compose,
    random_rotation,
    rotation_from_matrix,
    rotation_matrix,
    sph_harm,
    wigner_D,
    wigner_d_small,
)
from .grids import (
    S2Grid,
    SO3Grid,
    SpectralS2Signal,
    SpectralSO3Signal,
    rotate_spectral_s2,
    rotate_spectral_so3,
    s2_analysis,
    s2_grid,
    s2_synthesis,
    so3_analysis,
    so3_grid,
    so3_synthesis,
)
from .features import (
    FeatureType,
    cg_change_of_basis,
    intensity_scale,
    pointwise_map,
    se3_output_feature_type,
    tensor_product_degrees,
    vectorize_similarity,
)
from .spectral_conv import (
    KernelS2,
    KernelSO3,
    RepSpectral,
    irrep_s2_conv,
    irrep_so3_conv,
    s2_conv_general,
    s2_conv_scalar,
    s2_conv_spatial,
    so3_conv_general,
    so3_conv_scalar,
    so3_conv_spatial,
)
from .steerable import (
    SteerableKernelBasis,
    VolumetricKernel,
    assemble_volumetric,
    circular_harmonic_basis,
    constraint_residual,
    semidirect_conv,
    solve_angular_basis,
)
from .nonlin import (
    GroupLatticeFeature,
    gated,
    norm_nonlinearity,
    pointwise,
    subgroup_pool,
    vector_field_nonlinearity,
)
from .gauge_mesh import (
    TangentAtlas,
    TriMesh,
    build_atlas,
    gem_conv,
    harmonic_conv,
    icosahedron,
    icosphere,
    random_sphere_mesh,
    rotate_frames,
)
from .gcnn import (
    BoxDetections,
    OrientedDetections,
    SegmentationPipeline,
    group_conv,
    lifting_conv,
    z2_conv,
)
