"""Kinematic tabletop world standing in for the real arm.

No contact dynamics: the arm teleports along interpolated waypoints, grasping
is tolerance-based, and a detached object settles straight down onto the
highest support under its footprint (the table is z = 0). Containers are
never supports, so objects dropped over one fall inside it.

``step`` is the single state-transition function; every effect a controller
wants (coupled pushing, latch toggling, grasp/release) is expressed in the
emitted actions, which keeps (seed, action sequence) -> world bit-for-bit
deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .episodes import GRIPPER_MAX
from .geometry import (
    CameraModel,
    Destination,
    Pose,
    interpolate_linear,
    project,
    quat_conj,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    unproject,
)
from .grammar import PrimitiveSkill, SkillKind, is_motion_based

TASK_SCHEMA_VERSION = 1

# Gripper commands below this width count as a closing (grasp) attempt.
GRASP_CLOSE_THRESHOLD = 0.04


class UnresolvedPosError(ValueError):
    """A motion-based skill reached a controller without a resolved destination."""


class NoGraspableObjectError(RuntimeError):
    """Pick policy found no graspable object within its basin of attraction."""


@dataclass(frozen=True)
class SimConfig:
    max_step: float = 0.01  # metres per action along a trajectory
    max_rot_step: float = 0.1  # radians per action for pure rotations
    chunk_size: int = 5  # actions executed between re-observations
    eps_grasp: float = 0.02  # grasp tolerance at gripper closure
    eps_contact: float = 0.02  # push/pull coupling distance to the object box
    eps_press: float = 0.02  # press trigger distance to the object box
    pick_basin: float = 0.10  # horizontal search radius of the pick policy
    lift_height: float = 0.08  # retreat height after a grasp
    gripper_open: float = GRIPPER_MAX
    gripper_closed: float = 0.0


DEFAULT_SIM_CONFIG = SimConfig()


@dataclass(frozen=True)
class FailureInjection:
    """Seeded execution-noise model: destination jitter plus grasp drops."""

    destination_noise_sigma: float = 0.0  # metres, iid gaussian on the 3D target
    grasp_failure_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.destination_noise_sigma < 0 or not 0.0 <= self.grasp_failure_prob <= 1.0:
            raise ValueError("failure injection parameters out of range")


@dataclass(frozen=True, eq=False)
class SceneObject:
    id: str
    category: str
    pose: Pose
    extent: np.ndarray  # axis-aligned half-sizes, metres
    attributes: tuple[str, ...] = ()
    graspable: bool = False
    pressable: bool = False
    container: bool = False
    latched: bool = False

    def __post_init__(self):
        extent = np.asarray(self.extent, dtype=float)
        if extent.shape != (3,) or np.any(extent <= 0):
            raise ValueError(f"object {self.id}: extent must be three positive half-sizes")
        extent.setflags(write=False)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "attributes", tuple(self.attributes))

    @property
    def top(self) -> float:
        return float(self.pose.position[2] + self.extent[2])


def grasp_anchor(obj: SceneObject) -> np.ndarray:
    """Top-center point of an object: where it is grasped, pressed, and observed."""
    return obj.pose.position + np.array([0.0, 0.0, float(obj.extent[2])])


def box_distance(obj: SceneObject, point) -> float:
    """Euclidean distance from a point to the object's axis-aligned box."""
    gap = np.abs(np.asarray(point, dtype=float) - obj.pose.position) - obj.extent
    return float(np.linalg.norm(np.maximum(gap, 0.0)))


@dataclass(frozen=True, eq=False)
class ArmState:
    pose: Pose
    gripper_width: float
    held_object: str | None = None
    # Held object's pose relative to the arm, fixed at attach time.
    grasp_offset: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if not 0.0 <= self.gripper_width <= GRIPPER_MAX:
            raise ValueError(f"gripper width {self.gripper_width} out of bounds")
        if (self.held_object is None) != (self.grasp_offset is None):
            raise ValueError("held object and grasp offset must be set together")


@dataclass(frozen=True, eq=False)
class WorldState:
    arm: ArmState
    objects: tuple[SceneObject, ...]
    camera: CameraModel
    rng_seed: int = 0

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        object.__setattr__(self, "objects", tuple(self.objects))

    def object_by_id(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)


@dataclass(frozen=True)
class Action:
    """One low-level command: an arm motion plus optional effect channels.

    `target` moves the arm to an absolute pose; `delta` offsets the current
    pose (position offset, orientation pre-multiply). `couple` drags the named
    object along this action's translation (push/pull contact); `press`
    toggles the named object's latch after the motion.
    """

    target: Pose | None = None
    delta: tuple | None = None
    gripper_command: float | None = None
    couple: str | None = None
    press: str | None = None

    def __post_init__(self):
        if self.target is not None and self.delta is not None:
            raise ValueError("action cannot carry both target and delta")
        if self.gripper_command is not None and not math.isfinite(self.gripper_command):
            raise ValueError("non-finite gripper command")


@dataclass(frozen=True)
class ObjectView:
    id: str
    category: str
    attributes: tuple[str, ...]
    image_position: Destination


@dataclass(frozen=True)
class Observation:
    arm_image_position: Destination
    object_views: tuple[ObjectView, ...]
    frame_id: int


def _xy_overlap(a: SceneObject, b: SceneObject) -> bool:
    da = np.abs(a.pose.position[:2] - b.pose.position[:2])
    return bool(np.all(da < a.extent[:2] + b.extent[:2]))


def _settle(objects: list[SceneObject], faller_id: str) -> list[SceneObject]:
    """Drop the named object onto the highest non-container support it overlaps."""
    idx = next(i for i, o in enumerate(objects) if o.id == faller_id)
    faller = objects[idx]
    support = 0.0
    for other in objects:
        if other.id == faller_id or other.container:
            continue
        if _xy_overlap(faller, other):
            support = max(support, other.top)
    new_pos = faller.pose.position.copy()
    new_pos[2] = support + float(faller.extent[2])
    objects[idx] = replace(faller, pose=Pose(new_pos, faller.pose.orientation))
    return objects


def step(world: WorldState, action: Action, config: SimConfig = DEFAULT_SIM_CONFIG) -> WorldState:
    """Apply one action; returns the successor world (input is not mutated)."""
    arm = world.arm
    pose = arm.pose
    if action.target is not None:
        pose = action.target
    elif action.delta is not None:
        dpos, dquat = action.delta
        pose = Pose(pose.position + np.asarray(dpos, dtype=float), quat_mul(dquat, pose.orientation))
    translation = pose.position - arm.pose.position

    objects = list(world.objects)
    held = arm.held_object
    grasp_offset = arm.grasp_offset

    if held is not None:
        idx = next(i for i, o in enumerate(objects) if o.id == held)
        rel_pos, rel_quat = grasp_offset
        objects[idx] = replace(
            objects[idx],
            pose=Pose(pose.position + quat_rotate(pose.orientation, rel_pos), quat_mul(pose.orientation, rel_quat)),
        )
    if action.couple is not None and action.couple != held and np.any(translation != 0.0):
        idx = next((i for i, o in enumerate(objects) if o.id == action.couple), None)
        if idx is not None:
            moved = objects[idx]
            objects[idx] = replace(
                moved, pose=Pose(moved.pose.position + translation, moved.pose.orientation)
            )

    width = arm.gripper_width
    if action.gripper_command is not None:
        width = min(max(action.gripper_command, 0.0), GRIPPER_MAX)
        if action.gripper_command < GRASP_CLOSE_THRESHOLD and held is None:
            best = None
            best_dist = config.eps_grasp
            for obj in objects:
                if not obj.graspable:
                    continue
                dist = float(np.linalg.norm(grasp_anchor(obj) - pose.position))
                if dist <= best_dist:
                    best, best_dist = obj, dist
            if best is not None:
                held = best.id
                rel_pos = quat_rotate(quat_conj(pose.orientation), best.pose.position - pose.position)
                rel_quat = quat_mul(quat_conj(pose.orientation), best.pose.orientation)
                grasp_offset = (rel_pos, rel_quat)
        elif action.gripper_command >= GRASP_CLOSE_THRESHOLD and held is not None:
            objects = _settle(objects, held)
            held = None
            grasp_offset = None

    if action.press is not None:
        idx = next((i for i, o in enumerate(objects) if o.id == action.press), None)
        if idx is not None and objects[idx].pressable:
            objects[idx] = replace(objects[idx], latched=not objects[idx].latched)

    return WorldState(
        arm=ArmState(pose=pose, gripper_width=width, held_object=held, grasp_offset=grasp_offset),
        objects=tuple(objects),
        camera=world.camera,
        rng_seed=world.rng_seed,
    )


def observe(world: WorldState, frame_id: int = 0) -> Observation:
    """Symbolic observation: projected arm position plus one view per object."""
    views = tuple(
        ObjectView(
            id=obj.id,
            category=obj.category,
            attributes=obj.attributes,
            image_position=project(world.camera, grasp_anchor(obj)),
        )
        for obj in world.objects
    )
    return Observation(
        arm_image_position=project(world.camera, world.arm.pose.position),
        object_views=views,
        frame_id=frame_id,
    )


@dataclass
class ControllerPlan:
    """Action chunks for one skill plus its post-execution check."""

    chunks: list[list[Action]]
    check: object  # callable (WorldState) -> bool
    target_point: np.ndarray | None = None

    @property
    def action_count(self) -> int:
        return sum(len(chunk) for chunk in self.chunks)


def _chunked(actions: list[Action], size: int) -> list[list[Action]]:
    return [actions[i : i + size] for i in range(0, len(actions), size)]


def _motion_actions(world: WorldState, target: Pose, config: SimConfig) -> list[Action]:
    waypoints = interpolate_linear(world.arm.pose, target, config.max_step, config.max_rot_step)
    return [Action(target=p) for p in waypoints[1:]]


def _match_object(world: WorldState, skill: PrimitiveSkill, candidates: list[SceneObject]) -> list[SceneObject]:
    if skill.object:
        by_category = [o for o in candidates if o.category == skill.object]
        if skill.attribute and by_category:
            wanted = set(skill.attribute.split())
            by_attr = [o for o in by_category if wanted <= set(o.attributes)]
            if by_attr:
                return by_attr
        if by_category:
            return by_category
    return candidates


def _noisy(target: np.ndarray, failure: FailureInjection | None, rng) -> np.ndarray:
    if failure is None or failure.destination_noise_sigma <= 0.0 or rng is None:
        return target
    return target + rng.normal(0.0, failure.destination_noise_sigma, size=3)


def controller_dispatch(
    skill: PrimitiveSkill,
    world: WorldState,
    config: SimConfig = DEFAULT_SIM_CONFIG,
    rng=None,
    failure: FailureInjection | None = None,
) -> ControllerPlan:
    """Map one resolved skill to action chunks.

    Motion-based skills interpolate from the current arm pose toward the
    unprojected destination (hard-code controllers); pick and place are
    oracle policies with a limited horizontal basin; open/close set the
    gripper directly.
    """
    kind = skill.kind
    arm = world.arm

    if is_motion_based(skill):
        if skill.pos is None or not skill.pos.resolved:
            raise UnresolvedPosError(f"{kind.value} dispatched without a resolved destination")
        goal = unproject(world.camera, skill.pos.destination)
        target_point = _noisy(goal, failure, rng)

        if kind in (SkillKind.MOVE, SkillKind.PUSH, SkillKind.PULL):
            target = Pose(target_point, arm.pose.orientation)
            actions = _motion_actions(world, target, config)
            couple_id = None
            if kind in (SkillKind.PUSH, SkillKind.PULL):
                movable = [o for o in world.objects if o.id != arm.held_object]
                matched = _match_object(world, skill, movable)
                if matched:
                    target_obj = min(matched, key=lambda o: box_distance(o, arm.pose.position))
                    contact_at = None
                    for i, act in enumerate(actions):
                        if box_distance(target_obj, act.target.position) <= config.eps_contact:
                            contact_at = i
                            break
                    if contact_at is not None:
                        couple_id = target_obj.id
                        actions = [
                            replace(act, couple=target_obj.id) if i >= contact_at else act
                            for i, act in enumerate(actions)
                        ]

            def check(after: WorldState, goal=goal, couple_id=couple_id, kind=kind) -> bool:
                arm_ok = float(np.linalg.norm(after.arm.pose.position - goal)) <= 0.02
                if kind is SkillKind.MOVE:
                    return arm_ok
                return arm_ok and couple_id is not None

            return ControllerPlan(_chunked(actions, config.chunk_size), check, target_point)

        if kind is SkillKind.PRESS:
            target = Pose(target_point, arm.pose.orientation)
            actions = _motion_actions(world, target, config)
            pressables = [o for o in world.objects if o.pressable]
            matched = _match_object(world, skill, pressables)
            pressed = None
            if matched:
                nearest = min(matched, key=lambda o: box_distance(o, target_point))
                if box_distance(nearest, target_point) <= config.eps_press:
                    pressed = nearest
            if pressed is not None:
                want_latch = not pressed.latched
                actions.append(Action(press=pressed.id))

                def check(after: WorldState, pressed=pressed, want=want_latch) -> bool:
                    return after.object_by_id(pressed.id).latched == want

            else:

                def check(after: WorldState) -> bool:
                    return False

            return ControllerPlan(_chunked(actions, config.chunk_size), check, target_point)

        if kind is SkillKind.ROTATE:
            angle = math.radians(skill.rotation.angle)
            if skill.rotation.direction == "counterclockwise":
                angle = -angle
            # Approach axis: the gripper's downward axis, world -z for the
            # default orientation. Clockwise is as seen from above.
            axis = quat_rotate(arm.pose.orientation, np.array([0.0, 0.0, -1.0]))
            spin = quat_from_axis_angle(axis, angle)
            target = Pose(target_point, quat_mul(spin, arm.pose.orientation))
            actions = _motion_actions(world, target, config)

            def check(after: WorldState, goal=goal, target=target) -> bool:
                from .geometry import quat_angle

                return (
                    float(np.linalg.norm(after.arm.pose.position - goal)) <= 0.02
                    and quat_angle(after.arm.pose.orientation, target.orientation) <= 1e-6
                )

            return ControllerPlan(_chunked(actions, config.chunk_size), check, target_point)

    if kind is SkillKind.PICK:
        candidates = [
            o
            for o in world.objects
            if o.graspable
            and o.id != arm.held_object
            and float(np.linalg.norm((grasp_anchor(o) - arm.pose.position)[:2])) <= config.pick_basin
        ]
        candidates = _match_object(world, skill, candidates)
        if not candidates:
            raise NoGraspableObjectError(
                f"no graspable object within {config.pick_basin} m of the gripper"
            )
        target_obj = min(
            candidates,
            key=lambda o: float(np.linalg.norm((grasp_anchor(o) - arm.pose.position)[:2])),
        )
        grasp_point = grasp_anchor(target_obj)
        if failure is not None and failure.grasp_failure_prob > 0.0 and rng is not None:
            if rng.random() < failure.grasp_failure_prob:
                grasp_point = grasp_point + np.array([3.0 * config.eps_grasp, 0.0, 0.0])
        actions = [Action(gripper_command=config.gripper_open)]
        actions += _motion_actions(world, Pose(grasp_point, arm.pose.orientation), config)
        actions.append(Action(gripper_command=config.gripper_closed))
        lift = grasp_point + np.array([0.0, 0.0, config.lift_height])
        lift_traj = interpolate_linear(
            Pose(grasp_point, arm.pose.orientation),
            Pose(lift, arm.pose.orientation),
            config.max_step,
            config.max_rot_step,
        )
        actions += [Action(target=p) for p in lift_traj[1:]]

        def check(after: WorldState, want=target_obj.id) -> bool:
            return after.arm.held_object == want

        return ControllerPlan(_chunked(actions, config.chunk_size), check, grasp_point)

    if kind in (SkillKind.PLACE, SkillKind.OPEN):
        actions = [Action(gripper_command=config.gripper_open)]

        def check(after: WorldState) -> bool:
            return after.arm.held_object is None

        return ControllerPlan(_chunked(actions, config.chunk_size), check)

    if kind is SkillKind.CLOSE:
        actions = [Action(gripper_command=config.gripper_closed)]

        def check(after: WorldState) -> bool:
            return after.arm.gripper_width < GRASP_CLOSE_THRESHOLD

        return ControllerPlan(_chunked(actions, config.chunk_size), check)

    raise ValueError(f"{kind.value} has no controller (handled by the engine)")


# --- success predicates -----------------------------------------------------

def eval_predicate(pred: dict, world: WorldState) -> bool:
    """Evaluate a declarative success predicate over a world state."""
    if len(pred) != 1:
        raise ValueError(f"predicate must have exactly one operator: {pred}")
    op, body = next(iter(pred.items()))
    if op == "all":
        return all(eval_predicate(p, world) for p in body)
    if op == "any":
        return any(eval_predicate(p, world) for p in body)
    if op == "not":
        return not eval_predicate(body, world)
    if op == "held":
        return world.arm.held_object == body["object"]
    if op == "gripper_empty":
        return world.arm.held_object is None
    if op == "latched":
        return world.object_by_id(body["object"]).latched == bool(body.get("state", True))
    if op == "within":
        obj = world.object_by_id(body["object"])
        if "target" in body:
            point = world.object_by_id(body["target"]).pose.position
        else:
            point = np.asarray(body["point"], dtype=float)
        return float(np.linalg.norm(obj.pose.position - point)) <= float(body["tol"])
    if op == "above":
        obj = world.object_by_id(body["object"])
        base = world.object_by_id(body["base"])
        xy = float(np.linalg.norm(obj.pose.position[:2] - base.pose.position[:2]))
        resting = abs(float(obj.pose.position[2]) - (base.top + float(obj.extent[2])))
        return xy <= float(body["xy_tol"]) and resting <= float(body.get("z_tol", 0.01))
    if op == "inside":
        obj = world.object_by_id(body["object"])
        box = world.object_by_id(body["container"])
        gap = np.abs(obj.pose.position - box.pose.position) - box.extent
        return bool(np.all(gap <= 0.0))
    if op == "inside_region":
        obj = world.object_by_id(body["object"])
        center = np.asarray(body["center"], dtype=float)
        extent = np.asarray(body["extent"], dtype=float)
        return bool(np.all(np.abs(obj.pose.position - center) <= extent))
    raise ValueError(f"unknown predicate operator {op!r}")


# --- task specifications ----------------------------------------------------

@dataclass(frozen=True)
class ObjectSpec:
    id: str
    category: str
    position: tuple[float, float, float]
    extent: tuple[float, float, float]
    attributes: tuple[str, ...] = ()
    graspable: bool = False
    pressable: bool = False
    container: bool = False
    jitter_xy: float = 0.0


@dataclass(frozen=True)
class TaskSpec:
    """A named task: seeded initial world plus a declarative success predicate."""

    name: str
    description: str
    home_pose: Pose
    camera: CameraModel
    objects: tuple[ObjectSpec, ...]
    success: dict
    scene_caption: str | None = None

    def build_world(self, seed: int) -> WorldState:
        rng = np.random.default_rng([TASK_SCHEMA_VERSION, seed])
        objects = []
        for spec in self.objects:
            pos = np.asarray(spec.position, dtype=float)
            if spec.jitter_xy > 0.0:
                pos = pos + np.concatenate([rng.uniform(-spec.jitter_xy, spec.jitter_xy, 2), [0.0]])
            objects.append(
                SceneObject(
                    id=spec.id,
                    category=spec.category,
                    pose=Pose.identity(pos),
                    extent=np.asarray(spec.extent, dtype=float),
                    attributes=spec.attributes,
                    graspable=spec.graspable,
                    pressable=spec.pressable,
                    container=spec.container,
                )
            )
        arm = ArmState(pose=self.home_pose, gripper_width=GRIPPER_MAX)
        return WorldState(arm=arm, objects=tuple(objects), camera=self.camera, rng_seed=seed)


def check_success(task: TaskSpec, world: WorldState) -> bool:
    return eval_predicate(task.success, world)


def task_to_json(task: TaskSpec) -> dict:
    return {
        "schema": TASK_SCHEMA_VERSION,
        "name": task.name,
        "description": task.description,
        "scene_caption": task.scene_caption,
        "home_pose": {
            "position": [float(v) for v in task.home_pose.position],
            "orientation": [float(v) for v in task.home_pose.orientation],
        },
        "camera": task.camera.to_json(),
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "attributes": list(o.attributes),
                "position": list(o.position),
                "extent": list(o.extent),
                "graspable": o.graspable,
                "pressable": o.pressable,
                "container": o.container,
                "jitter_xy": o.jitter_xy,
            }
            for o in task.objects
        ],
        "success": task.success,
    }


def task_from_json(doc: dict) -> TaskSpec:
    if doc.get("schema") != TASK_SCHEMA_VERSION:
        raise ValueError(f"unsupported task schema {doc.get('schema')!r}")
    home = doc["home_pose"]
    return TaskSpec(
        name=doc["name"],
        description=doc["description"],
        scene_caption=doc.get("scene_caption"),
        home_pose=Pose(
            np.asarray(home["position"], dtype=float),
            np.asarray(home["orientation"], dtype=float),
        ),
        camera=CameraModel.from_json(doc["camera"]),
        objects=tuple(
            ObjectSpec(
                id=o["id"],
                category=o["category"],
                attributes=tuple(o.get("attributes", ())),
                position=tuple(o["position"]),
                extent=tuple(o["extent"]),
                graspable=o.get("graspable", False),
                pressable=o.get("pressable", False),
                container=o.get("container", False),
                jitter_xy=o.get("jitter_xy", 0.0),
            )
            for o in doc["objects"]
        ),
        success=doc["success"],
    )


def load_task_file(path) -> TaskSpec:
    return task_from_json(json.loads(Path(path).read_text()))


def save_task(task: TaskSpec, path) -> None:
    Path(path).write_text(json.dumps(task_to_json(task), indent=1) + "\n")


def world_to_json(world: WorldState) -> dict:
    """Canonical serializable form; used for bit-for-bit determinism checks."""
    arm = world.arm
    doc = {
        "arm": {
            "position": [float(v) for v in arm.pose.position],
            "orientation": [float(v) for v in arm.pose.orientation],
            "gripper_width": arm.gripper_width,
            "held_object": arm.held_object,
        },
        "objects": [
            {
                "id": o.id,
                "position": [float(v) for v in o.pose.position],
                "orientation": [float(v) for v in o.pose.orientation],
                "latched": o.latched,
            }
            for o in world.objects
        ],
        "rng_seed": world.rng_seed,
    }
    if arm.grasp_offset is not None:
        doc["arm"]["grasp_offset"] = {
            "position": [float(v) for v in arm.grasp_offset[0]],
            "orientation": [float(v) for v in arm.grasp_offset[1]],
        }
    return doc
