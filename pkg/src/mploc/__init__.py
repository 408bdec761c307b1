"""mmWave multipath simulation, reflection-order classification, and positioning.

The package synthesizes channel observations over 2D polygonal scenes with an
image-method ray tracer, classifies each path's reflection order with a bagged
decision-tree ensemble, and positions the receiver from single-bounce
reflections via line intersection.
"""

from .errors import (
    AmbiguousIntersection,
    ConfigError,
    DataError,
    DegenerateGeometry,
    DomainError,
    Error,
    ParallelLines,
)
from .geometry import Bearing, Line, Point2, Segment, bearing_from_to, intersect_lines, mirror_point, segment_intersection
from .raytracer import GnbSite, PropagationPath, Scene, Wall, load_scene, save_scene, trace_paths, validate_path
from .channel import (
    C,
    GeneratedDataset,
    GroundTruth,
    Measurement,
    NoiseModel,
    OutageMarker,
    RadioConfig,
    TrajectoryPoint,
    fspl_db,
    generate_dataset,
    path_to_measurement,
)
from .classifier import (
    FEATURE_NAMES,
    ConfusionMatrix,
    DecisionTree,
    Ensemble,
    TreeParams,
    baseline_rss_filter,
    confusion,
    cross_validate,
    load_ensemble,
    predict,
    predict_batch,
    save_ensemble,
    split_dataset,
    train_bagged,
    train_tree,
)
from .positioning import (
    FixMethod,
    Outage,
    PipelineMode,
    PositionFix,
    SphericalObs,
    los_position_2d,
    pipeline_step,
    sbr_line,
    sbr_position,
    scatterer_point,
    spherical_to_cartesian_3d,
)
from .evaluation import ErrorStats, cdf_points, compare_runs, error_stats

__version__ = "0.1.0"
