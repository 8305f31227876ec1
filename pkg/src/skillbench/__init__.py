"""Desk-scale plan-execute harness for primitive-skill manipulation agents.

Layers, bottom up: a pose/camera geometry core, a parser for the
primitive-skill command language, an annotated-episode data model, a
kinematic tabletop simulator with bundled tasks, a plan-execute engine
speaking a newline-delimited JSON planner protocol, and evaluation metrics
with report rendering. See README.md for the tour.
"""

from .geometry import (
    CameraModel,
    Destination,
    Pose,
    derive_direction,
    interpolate_linear,
    project,
    unproject,
)
from .grammar import (
    PrimitiveSkill,
    SkillCategory,
    SkillKind,
    bind_destination,
    classify,
    format_skill,
    parse_skill,
)
from .episodes import Clip, Episode, TeleopRecord, derive_spatial, load_episode, to_training_rows
from .sim import (
    Action,
    ArmState,
    FailureInjection,
    SceneObject,
    SimConfig,
    TaskSpec,
    WorldState,
    check_success,
    controller_dispatch,
    observe,
    step,
)
from .engine import EngineConfig, Transcript, TrialResult, run_episode, run_trials
from .protocol import (
    OraclePlanner,
    PlanRequest,
    PlanResponse,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
    render_prompt,
    serve_oracle,
)
from .metrics import (
    cumulative_success,
    destination_recall,
    execution_success_rate,
    planning_accuracy,
)

__version__ = "0.1.0"
