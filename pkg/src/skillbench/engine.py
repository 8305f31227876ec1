"""Plan-execute loop: alternate planner queries and controller executions.

Each iteration observes the world, sends the planner one request (task
description, decision history, symbolic observation), validates the
response, binds the destination when the decision carries ``<pos>``, and
executes the dispatched action chunks with a re-observation between chunks.
The loop ends on a done decision (success is then the task predicate), on
reset (arm returns home, episode counts as failed), or at the step limit.

The engine owns the image-to-world conversion: planners only ever speak in
(x, y, d) triplets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grammar import (
    POS_TOKEN,
    PrimitiveSkill,
    SkillKind,
    bind_destination,
    format_skill,
    is_motion_based,
    parse_skill,
)
from .protocol import (
    PlanRequest,
    PlanResponse,
    canonical_json,
    decode_request,
    decode_response,
    request_to_json,
    response_to_json,
)
from .sim import (
    DEFAULT_SIM_CONFIG,
    FailureInjection,
    NoGraspableObjectError,
    SimConfig,
    TaskSpec,
    UnresolvedPosError,
    WorldState,
    check_success,
    controller_dispatch,
    observe,
    step,
)

TRANSCRIPT_SCHEMA_VERSION = 1

TERMINAL_DONE = "done"
TERMINAL_RESET = "reset"
TERMINAL_STEP_LIMIT = "step_limit"
TERMINAL_ERROR = "error_aborted"


class ProtocolError(RuntimeError):
    """Planner response violates the protocol contract."""


@dataclass(frozen=True)
class EngineConfig:
    max_steps: int = 32
    sim: SimConfig = DEFAULT_SIM_CONFIG
    failure_injection: FailureInjection = FailureInjection()
    planner_endpoint: str | None = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @property
    def chunk_size(self) -> int:
        return self.sim.chunk_size


@dataclass(frozen=True)
class TranscriptEntry:
    request: PlanRequest
    response: PlanResponse
    resolved_skill: str
    action_count: int
    post_step_success: bool


@dataclass
class Transcript:
    task: str
    seed: int
    entries: list[TranscriptEntry] = field(default_factory=list)
    terminal: str | None = None
    success: bool = False


@dataclass
class TrialResult:
    task: str
    seed: int
    success: bool
    transcript: Transcript
    error: str | None = None

    @property
    def entries(self):
        return self.transcript.entries


def transcript_to_json(transcript: Transcript) -> dict:
    return {
        "schema": TRANSCRIPT_SCHEMA_VERSION,
        "task": transcript.task,
        "seed": transcript.seed,
        "terminal": transcript.terminal,
        "success": transcript.success,
        "entries": [
            {
                "request": request_to_json(e.request),
                "response": response_to_json(e.response),
                "resolved_skill": e.resolved_skill,
                "action_count": e.action_count,
                "post_step_success": e.post_step_success,
            }
            for e in transcript.entries
        ],
    }


def transcript_from_json(doc: dict) -> Transcript:
    if doc.get("schema") != TRANSCRIPT_SCHEMA_VERSION:
        raise ValueError(f"unsupported transcript schema {doc.get('schema')!r}")
    entries = [
        TranscriptEntry(
            request=decode_request(canonical_json(e["request"]) + b"\n"),
            response=decode_response(canonical_json(e["response"]) + b"\n"),
            resolved_skill=e["resolved_skill"],
            action_count=int(e["action_count"]),
            post_step_success=bool(e["post_step_success"]),
        )
        for e in doc["entries"]
    ]
    return Transcript(
        task=doc["task"],
        seed=int(doc["seed"]),
        entries=entries,
        terminal=doc["terminal"],
        success=bool(doc["success"]),
    )


def transcript_bytes(transcript: Transcript) -> bytes:
    return canonical_json(transcript_to_json(transcript)) + b"\n"


def save_transcript(transcript: Transcript, path) -> None:
    Path(path).write_bytes(transcript_bytes(transcript))


def load_transcript(path) -> Transcript:
    return transcript_from_json(json.loads(Path(path).read_text()))


def _validated_skill(response: PlanResponse) -> PrimitiveSkill:
    """Parse and contract-check a planner response.

    A motion decision whose ``<pos>`` has no accompanying destination is a
    planner contract violation (UnresolvedPosError) and must never reach a
    controller; a destination on a non-motion decision (or alongside a
    literal triplet) is a ProtocolError.
    """
    try:
        skill = parse_skill(response.decision)
    except ValueError as exc:
        raise ProtocolError(f"undecodable decision {response.decision!r}: {exc}") from exc
    if is_motion_based(skill) and not skill.pos.resolved:
        if response.destination is None:
            raise UnresolvedPosError(
                f"decision {response.decision!r} contains {POS_TOKEN} but no destination"
            )
    elif response.destination is not None:
        raise ProtocolError(
            f"destination accompanies decision {response.decision!r} without {POS_TOKEN}"
        )
    return skill


class _FrameCounter:
    def __init__(self):
        self.value = 0

    def advance(self) -> int:
        self.value += 1
        return self.value


def _execute_chunks(world: WorldState, plan, frame: _FrameCounter, config: EngineConfig):
    count = 0
    for chunk in plan.chunks:
        for action in chunk:
            world = step(world, action, config.sim)
            count += 1
        observe(world, frame.advance())  # re-observe between chunks
    return world, count


def _home_plan(world: WorldState, task: TaskSpec, sim_config: SimConfig):
    """Return-to-home trajectory used by the reset decision."""
    from .geometry import interpolate_linear
    from .sim import Action, ControllerPlan

    waypoints = interpolate_linear(
        world.arm.pose, task.home_pose, sim_config.max_step, sim_config.max_rot_step
    )
    actions = [Action(target=p) for p in waypoints[1:]]
    chunks = [
        actions[i : i + sim_config.chunk_size]
        for i in range(0, len(actions), sim_config.chunk_size)
    ]
    return ControllerPlan(chunks, check=lambda after: True)


def run_episode(task: TaskSpec, planner, config: EngineConfig | None = None, seed: int = 0):
    """One plan-execute episode; returns a TrialResult.

    `planner` is either a planner handle (an object with .plan(request))
    or a factory callable (task, world) -> handle, used for planners that
    need the trial's initial world (the in-process oracle).
    """
    config = config or EngineConfig()
    world = task.build_world(seed)
    handle = planner(task, world) if callable(planner) else planner
    rng = np.random.default_rng([config.failure_injection.seed, seed])
    transcript = Transcript(task=task.name, seed=seed)
    frame = _FrameCounter()
    history: list[PrimitiveSkill] = []

    def entry(request, response, resolved, count, flag):
        transcript.entries.append(
            TranscriptEntry(
                request=request,
                response=response,
                resolved_skill=resolved,
                action_count=count,
                post_step_success=flag,
            )
        )

    try:
        for _ in range(config.max_steps):
            obs = observe(world, frame.value)
            request = PlanRequest(
                task_description=task.description,
                history=tuple(format_skill(k) for k in history),
                arm_image_position=obs.arm_image_position,
                object_views=obs.object_views,
                frame_id=obs.frame_id,
                scene_description=task.scene_caption,
            )
            response = handle.plan(request)
            skill = _validated_skill(response)

            if skill.kind is SkillKind.DONE:
                success = check_success(task, world)
                entry(request, response, "done", 0, success)
                transcript.terminal = TERMINAL_DONE
                transcript.success = success
                return TrialResult(task.name, seed, success, transcript)

            if skill.kind is SkillKind.RESET:
                world, count = _execute_chunks(world, _home_plan(world, task, config.sim), frame, config)
                entry(request, response, "reset", count, False)
                transcript.terminal = TERMINAL_RESET
                transcript.success = False
                return TrialResult(task.name, seed, False, transcript)

            if is_motion_based(skill) and not skill.pos.resolved:
                resolved = bind_destination(skill, response.destination)
            else:
                resolved = skill
            history.append(skill)

            try:
                plan = controller_dispatch(
                    resolved, world, config.sim, rng=rng, failure=config.failure_injection
                )
            except NoGraspableObjectError:
                # A failed grasp is a failed step, not an aborted episode.
                entry(request, response, format_skill(resolved), 0, False)
                continue
            world, count = _execute_chunks(world, plan, frame, config)
            entry(request, response, format_skill(resolved), count, bool(plan.check(world)))

        transcript.terminal = TERMINAL_STEP_LIMIT
        transcript.success = False
        return TrialResult(task.name, seed, False, transcript)
    except Exception as exc:
        transcript.terminal = TERMINAL_ERROR
        transcript.success = False
        exc.transcript = transcript
        raise
    finally:
        if hasattr(handle, "close"):
            handle.close()


def run_trials(task: TaskSpec, planner, n_trials: int, config: EngineConfig | None = None, base_seed: int = 0) -> list[TrialResult]:
    """n independent seeded episodes (seeds base, base+1, ...); errors are recorded, not raised."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    results = []
    for i in range(n_trials):
        seed = base_seed + i
        try:
            results.append(run_episode(task, planner, config, seed=seed))
        except Exception as exc:  # noqa: BLE001 - per-trial errors are data
            transcript = getattr(exc, "transcript", Transcript(task=task.name, seed=seed))
            transcript.terminal = transcript.terminal or TERMINAL_ERROR
            results.append(
                TrialResult(task.name, seed, False, transcript, error=f"{type(exc).__name__}: {exc}")
            )
    return results
