"""Landmark-based gaze estimation toolkit.

A two-sphere eyeball model fitted to iris landmarks by least squares,
heatmap encode/decode for landmark training targets, an epsilon-SVR
gaze regressor over normalized landmark features, a synthetic
ground-truth generator with curriculum noise, and the evaluation
protocols tying them together.

Conventions used throughout: image coordinates are pixels with the
origin top-left and v increasing downward; angles are radians with
positive pitch rotating the gaze downward; gaze vectors are unit length
with negative z toward the camera.
"""

from .eyeball import (
    EyeballObservation,
    EyeballState,
    FitResult,
    PersonCalibration,
    SolverConfig,
    apply_calibration,
    calibrate,
    fit,
    fit_many,
    initial_parameters,
    project_iris_center,
    project_iris_edges,
    residual_sum,
)
from .evalkit import (
    ExperimentReport,
    SuccessCurve,
    angular_errors_deg,
    eyelid_registration_error,
    iris_localization_curve,
    run_cross_population,
    run_personalized,
    write_curve_csv,
    write_reports_csv,
)
from .features import FEATURE_CONFIGS, EyeLandmarks, build_features, feature_dim
from .geometry import (
    GazeAngles,
    GazeVector,
    Point2,
    angles_to_vector,
    angular_distance,
    angular_error,
    vector_to_angles,
)
from .heatmap import (
    Heatmap,
    HeatmapSet,
    decode_set,
    encode,
    encode_set,
    heatmap_loss,
    soft_argmax,
)
from .svr import (
    GazeRegressor,
    SvrModel,
    SvrParams,
    load_regressor,
    predict,
    predict_angles,
    save_regressor,
    select_calibration,
    train,
    train_gaze_regressor,
    tune,
)
from .synth import (
    NoiseSpec,
    PersonSpec,
    SampleRecord,
    difficulty_at_step,
    generate,
    generate_dataset,
    read_dataset,
    sample_person,
    to_observation,
    write_dataset,
)

__version__ = "0.1.0"
