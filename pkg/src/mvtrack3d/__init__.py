"""Multi-view 3D multi-object tracking testbed.

Compares position-only tracking (Kalman filter + Mahalanobis association)
against re-ID-feature tracking (cosine association) across smooth, random and
active-perception viewpoint orderings, on a synthetic occluded-greenhouse
simulator, scored with HOTA and CLEAR-MOT.
"""

from .assignment import FORBIDDEN, Assignment, CostMatrix, cosine_cost, mahalanobis_cost, solve_hungarian
from .core import (
    AABox,
    BBox2D,
    CameraPose,
    DEFAULT_FEATURE_DIM,
    Detection,
    GroundTruth,
    TrackOutput,
    Vec3,
    Viewpoint,
    euclidean,
    iou_2d,
)
from .estimation import KalmanState, NoiseParams, kf_init, kf_predict, kf_update
from .experiment import (
    ExperimentConfig,
    PlannerParams,
    ResultRow,
    ResultsTable,
    SequenceType,
    emit_results,
    load_config,
    read_sequence,
    run_experiment,
    save_config,
    write_sequence,
)
from .metrics import (
    ClearScores,
    HotaScores,
    MetricsReport,
    SimilarityConfig,
    SimilarityMode,
    evaluate_all,
    evaluate_clear,
    evaluate_hota,
    similarity,
)
from .planning import OccupancyGrid, PlanRequest, info_gain, integrate_depth, plan_active, plan_random, plan_sort
from .simulation import (
    CameraModel,
    GenerationError,
    NoiseModel,
    Scene,
    SceneSpec,
    build_viewpoint_grid,
    detection_probability,
    generate_scene,
    simulate_detections,
    visible_fraction,
)
from .tracking import (
    TrackerConfig,
    TrackerState,
    TrackerVariant,
    TrackRecord,
    tracker_new,
    tracker_run,
    tracker_step,
)

__version__ = "0.1.0"
