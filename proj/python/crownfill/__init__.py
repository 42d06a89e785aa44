"""SDF tooth-crown completion pipeline: geometry, augmentation, diffusion, metrics."""

from crownfill._core import (  # noqa: F401
    TRUNCATION,
    AdamOptimizer,
    AugmentConfig,
    CompletionSample,
    DenoiserNetwork,
    GuidanceConfig,
    Jaw,
    LabeledArch,
    NoiseSchedule,
    Primitive,
    PrimitiveKind,
    RespacedSchedule,
    Rng,
    SdfGrid,
    SecondMomentResampler,
    SimilarityTransform,
    SimplexNoiseParams,
    ToothContext,
    TriangleMesh,
    UNetConfig,
    VoxelBox,
    antagonist_interference,
    build_sample,
    cfg_mix,
    chamfer,
    complete,
    csg_difference,
    csg_intersection,
    csg_union,
    eval_primitive,
    evaluate_sample,
    extract_tooth_context,
    generate_phantom_arch,
    iou_voxel,
    iou_voxel_masked,
    l1_volume,
    l1_volume_masked,
    linear_schedule,
    load_arch,
    load_network,
    marching_cubes,
    mesh_to_sdf,
    perturb_with_simplex,
    q_sample,
    respace,
    sample_to_grid,
    save_checkpoint,
    simplex_noise,
    train_step,
)

__version__ = "0.1.0"
