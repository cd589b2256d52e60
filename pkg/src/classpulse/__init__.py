"""classpulse: real-time online-classroom evaluation.

Streams of facial-landmark frames and expression labels become per-student
reactions, a weighted class score with a three-level verdict, and an
offline Monte Carlo harness quantifying how sensor noise degrades both.
"""
from .errors import (
    ClasspulseError,
    DegenerateConfigurationError,
    EmptyClassroomError,
    InfeasibleCohortError,
    InvalidInputError,
    ReplayParseError,
    UnreachableTargetError,
)
from .evaluation import (
    ClassEvaluation,
    EvaluationParams,
    ReactionLabel,
    StudentRecord,
    apply_reaction,
    class_score,
    classify_level,
    reaction_value,
    weight_coefficient,
    weights,
)
from .headpose import (
    EulerSample,
    GestureDetector,
    GestureKind,
    HeadGesture,
    HeadPoseConfig,
    LandmarkFrame,
    estimate_euler,
)
from .pnp import (
    CameraIntrinsics,
    PoseSolution,
    build_intrinsics,
    project_points,
    rotation_vector_to_euler,
    solve_pnp,
)
from .sensors import (
    Channel,
    ConfusionModel,
    ExpressionLabel,
    default_confusion_model,
    expression_to_reaction,
    gesture_to_reaction,
    identity_confusion_model,
    load_confusion_model,
    observe,
    save_confusion_model,
)
from .simulation import (
    CaseResult,
    CohortSpec,
    SweepConfig,
    SweepResult,
    Weighting,
    assign_reactions_for_target,
    generate_cohort,
    run_case,
    run_sweep,
    write_csv,
)

__version__ = "0.1.0"
