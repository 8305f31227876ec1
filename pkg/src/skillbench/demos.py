"""Scripted demonstrations: synthesize an annotated episode for a task world.

Each bundled task has a fixed decision script. Destination anchors are
resolved against the evolving world right before each decision, and the
resulting skills are executed through the real controllers, so replaying the
episode through the engine reproduces the demonstration exactly. The stored
destination of a motion clip is the planner-facing triplet itself (the
projection of the anchor), which keeps replay byte-stable; trajectory and
direction are derived from the synthesized teleop records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .episodes import Clip, Episode, SpatialInfo, TeleopRecord, derive_spatial
from .geometry import project
from .grammar import bind_destination, is_motion_based, parse_skill
from .sim import (
    DEFAULT_SIM_CONFIG,
    SimConfig,
    TaskSpec,
    WorldState,
    controller_dispatch,
    grasp_anchor,
    step,
)

RECORD_DT = 0.1


@dataclass(frozen=True)
class DemoStep:
    """One scripted decision plus how to ground its destination, if any.

    view_object: id whose observed anchor is the destination (also tells an
    external scripted planner it can source the triplet from object_views).
    resolve: fallback resolver (WorldState -> world point) for anchors that
    are not any object's view anchor; such steps are wire-scripted as
    literal triplets.
    """

    decision: str
    view_object: str | None = None
    resolve: object | None = None

    def anchor(self, world: WorldState) -> np.ndarray | None:
        if self.view_object is not None:
            return grasp_anchor(world.object_by_id(self.view_object))
        if self.resolve is not None:
            return self.resolve(world)
        return None


def _front_anchor(object_id: str):
    def resolver(world: WorldState) -> np.ndarray:
        obj = world.object_by_id(object_id)
        return obj.pose.position - np.array([0.0, float(obj.extent[1]), 0.0])

    return resolver


def _closed_front_anchor(object_id: str, closed_y: float):
    def resolver(world: WorldState) -> np.ndarray:
        obj = world.object_by_id(object_id)
        pos = obj.pose.position
        return np.array([float(pos[0]), closed_y - float(obj.extent[1]), float(pos[2])])

    return resolver


def _fixed_point(point):
    arr = np.asarray(point, dtype=float)
    return lambda world: arr


# Drawer geometry shared between the task fixture and the demo script.
DRAWER_CLOSED_Y = 0.38

TAKE_DOWN_DROP = (-0.18, 0.18, 0.10)


def demo_script(task_name: str) -> list[DemoStep]:
    scripts = {
        "pick_object": [
            DemoStep("move on top of the cup <pos>", view_object="cup"),
            DemoStep("pick the cup"),
        ],
        "press_button": [
            DemoStep("move on top of the button <pos>", view_object="button"),
            DemoStep("press the button <pos>", view_object="button"),
        ],
        "take_down_object": [
            DemoStep("move on top of the book <pos>", view_object="book"),
            DemoStep("pick the book"),
            DemoStep("move to the <pos>", resolve=_fixed_point(TAKE_DOWN_DROP)),
            DemoStep("place the book"),
        ],
        "close_drawer": [
            DemoStep("move in front of the drawer <pos>", resolve=_front_anchor("drawer")),
            DemoStep(
                "push the drawer to the <pos>",
                resolve=_closed_front_anchor("drawer", DRAWER_CLOSED_Y),
            ),
        ],
        "wipe_table": [
            DemoStep("move on top of the sponge <pos>", view_object="sponge"),
            DemoStep("pick the sponge"),
            DemoStep("move on top of the stain <pos>", view_object="stain"),
            DemoStep("place the sponge"),
        ],
        "throw_garbage": [
            DemoStep("move on top of the garbage <pos>", view_object="garbage"),
            DemoStep("pick the garbage"),
            DemoStep("move on top of the bin <pos>", view_object="bin"),
            DemoStep("open the gripper"),
        ],
        "stack_blocks": [
            DemoStep("move on top of the red block <pos>", view_object="red_block"),
            DemoStep("pick the red block"),
            DemoStep("move on top of the blue block <pos>", view_object="blue_block"),
            DemoStep("place the red block"),
        ],
        "receive_object": [
            DemoStep("move on top of the bottle <pos>", view_object="bottle"),
            DemoStep("pick the bottle"),
        ],
    }
    if task_name not in scripts:
        raise KeyError(f"no demo script for task {task_name!r}")
    return scripts[task_name]


def generate_demo(
    task: TaskSpec,
    world: WorldState,
    config: SimConfig = DEFAULT_SIM_CONFIG,
    episode_id: str | None = None,
) -> tuple[Episode, WorldState]:
    """Roll the demo script through the controllers; returns (episode, final world)."""
    steps = demo_script(task.name)
    records = [TeleopRecord(0.0, world.arm.pose, world.arm.gripper_width)]
    t = RECORD_DT
    clips = []

    def append_record(w: WorldState):
        nonlocal t
        records.append(TeleopRecord(t, w.arm.pose, w.arm.gripper_width))
        t += RECORD_DT

    for i, demo in enumerate(steps):
        skill = parse_skill(demo.decision)
        if i == 0:
            clip_start = 0
        else:
            append_record(world)  # dwell frame: re-observation before the decision
            clip_start = len(records) - 1
        destination = None
        bound = skill
        if is_motion_based(skill):
            destination = project(world.camera, demo.anchor(world))
            bound = bind_destination(skill, destination)
        plan = controller_dispatch(bound, world, config)
        for chunk in plan.chunks:
            for action in chunk:
                world = step(world, action, config)
                append_record(world)
        clip_end = len(records) - 1
        if clip_end == clip_start:  # zero-action skill: hold the pose one frame
            append_record(world)
            clip_end += 1
        spatial = None
        if destination is not None:
            derived = derive_spatial(Clip(clip_start, clip_end, skill), records, world.camera)
            spatial = SpatialInfo(
                destination=destination,
                trajectory=derived.trajectory,
                direction=derived.direction,
            )
        clips.append(Clip(clip_start, clip_end, skill, spatial))

    episode = Episode(
        id=episode_id or f"{task.name}_01",
        task=task.name,
        task_description=task.description,
        camera=world.camera,
        records=records,
        clips=clips,
        scene_caption=task.scene_caption,
    )
    return episode, world
