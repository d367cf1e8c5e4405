"""Maximum consensus LiDAR localization on a discretized pose grid."""

from mcloc._core import (
    Layout,
    LocalizationResult,
    MatchMode,
    Objective,
    ProtrusionSide,
    SceneSpec,
    SearchSpec,
    SensorSpec,
    apply_density_bias,
    estimate_normals,
    generate_map,
    grid_convergence_study,
    helmert_score,
    helmert_score_reference,
    icp_point_to_plane,
    load_cloud,
    match_weight,
    maximum_consensus,
    save_cloud,
    se2_apply,
    simulate_scan,
)

__all__ = [
    "Layout",
    "LocalizationResult",
    "MatchMode",
    "Objective",
    "ProtrusionSide",
    "SceneSpec",
    "SearchSpec",
    "SensorSpec",
    "apply_density_bias",
    "estimate_normals",
    "generate_map",
    "grid_convergence_study",
    "helmert_score",
    "helmert_score_reference",
    "icp_point_to_plane",
    "load_cloud",
    "match_weight",
    "maximum_consensus",
    "save_cloud",
    "se2_apply",
    "simulate_scan",
]
