"""Bundled tasks, fixture episodes, and golden protocol fixtures.

Eight tabletop tasks ship with the package. Each task is defined here in
code, serialized to ``fixtures/tasks/*.json``, and its demonstration episode
for the canonical seed is serialized to ``fixtures/episodes/*.json``. Golden
wire fixtures (request/response byte lines from a canonical run) live under
``fixtures/golden/``. Run ``python -m skillbench.fixtures`` to regenerate
everything after changing scenes, scripts, or controllers.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .demos import DRAWER_CLOSED_Y, generate_demo
from .episodes import Episode, load_episode_file, save_episode
from .geometry import Pose, look_at_camera
from .sim import (
    DEFAULT_SIM_CONFIG,
    ObjectSpec,
    TaskSpec,
    check_success,
    load_task_file,
    observe,
    save_task,
)

CANONICAL_SEED = 7

TASK_NAMES = (
    "pick_object",
    "press_button",
    "take_down_object",
    "close_drawer",
    "wipe_table",
    "throw_garbage",
    "stack_blocks",
    "receive_object",
)


def desk_camera():
    return look_at_camera(position=(0.0, -0.85, 0.55), target=(0.0, 0.2, 0.05), fx=1.05, fy=1.05)


def home_pose() -> Pose:
    return Pose.identity((0.0, 0.0, 0.30))


def builtin_tasks() -> dict[str, TaskSpec]:
    camera = desk_camera()
    home = home_pose()

    def task(name, description, caption, objects, success):
        return TaskSpec(
            name=name,
            description=description,
            scene_caption=caption,
            home_pose=home,
            camera=camera,
            objects=tuple(objects),
            success=success,
        )

    tasks = {}

    tasks["pick_object"] = task(
        "pick_object",
        "pick up the cup",
        "a white cup stands on the table next to a flat plate",
        [
            ObjectSpec("cup", "cup", (0.10, 0.20, 0.05), (0.035, 0.035, 0.05), ("white",), graspable=True, jitter_xy=0.02),
            ObjectSpec("plate", "plate", (-0.15, 0.25, 0.01), (0.07, 0.07, 0.01), jitter_xy=0.01),
        ],
        {"held": {"object": "cup"}},
    )

    tasks["press_button"] = task(
        "press_button",
        "press the button",
        "a round button sits on the table beside a wooden block",
        [
            ObjectSpec("button", "button", (0.0, 0.25, 0.015), (0.02, 0.02, 0.015), ("round",), pressable=True, jitter_xy=0.02),
            ObjectSpec("decoy_block", "block", (-0.18, 0.30, 0.02), (0.02, 0.02, 0.02), ("wooden",), graspable=True, jitter_xy=0.01),
        ],
        {"latched": {"object": "button", "state": True}},
    )

    tasks["take_down_object"] = task(
        "take_down_object",
        "take the book down from the shelf",
        "a small book lies on top of a shelf at the right side of the table",
        [
            ObjectSpec("shelf", "shelf", (0.22, 0.32, 0.075), (0.08, 0.06, 0.075)),
            ObjectSpec("book", "book", (0.22, 0.32, 0.162), (0.05, 0.035, 0.012), ("small",), graspable=True, jitter_xy=0.01),
        ],
        {
            "all": [
                {"inside_region": {"object": "book", "center": [-0.18, 0.18, 0.012], "extent": [0.06, 0.06, 0.03]}},
                {"gripper_empty": {}},
            ]
        },
    )

    tasks["close_drawer"] = task(
        "close_drawer",
        "close the drawer",
        "an open drawer juts out of the cabinet at the back of the table",
        [
            ObjectSpec("drawer", "drawer", (0.05, 0.30, 0.04), (0.07, 0.06, 0.04), ("open",), jitter_xy=0.008),
        ],
        {"within": {"object": "drawer", "point": [0.05, DRAWER_CLOSED_Y, 0.04], "tol": 0.02}},
    )

    tasks["wipe_table"] = task(
        "wipe_table",
        "wipe the table with the sponge",
        "a yellow sponge and a dark stain are on the table",
        [
            ObjectSpec("sponge", "sponge", (-0.05, 0.15, 0.015), (0.04, 0.03, 0.015), ("yellow",), graspable=True, jitter_xy=0.02),
            ObjectSpec("stain", "stain", (0.15, 0.30, 0.002), (0.05, 0.05, 0.002), ("dark",), jitter_xy=0.01),
        ],
        {
            "all": [
                {"within": {"object": "sponge", "target": "stain", "tol": 0.05}},
                {"gripper_empty": {}},
            ]
        },
    )

    tasks["throw_garbage"] = task(
        "throw_garbage",
        "throw the garbage into the bin",
        "a crumpled piece of garbage lies among blocks, with a bin on the right",
        [
            ObjectSpec("garbage", "garbage", (-0.12, 0.22, 0.02), (0.025, 0.025, 0.02), ("crumpled",), graspable=True, jitter_xy=0.02),
            ObjectSpec("bin", "bin", (0.20, 0.15, 0.06), (0.055, 0.055, 0.06), container=True, jitter_xy=0.01),
            ObjectSpec("clutter_a", "block", (0.00, 0.35, 0.02), (0.02, 0.02, 0.02), ("green",), graspable=True, jitter_xy=0.01),
            ObjectSpec("clutter_b", "block", (-0.24, 0.33, 0.02), (0.02, 0.02, 0.02), ("grey",), graspable=True, jitter_xy=0.01),
        ],
        {"inside": {"object": "garbage", "container": "bin"}},
    )

    tasks["stack_blocks"] = task(
        "stack_blocks",
        "stack the red block on the blue block",
        "a red block and a blue block rest apart on the table",
        [
            ObjectSpec("red_block", "block", (-0.08, 0.28, 0.02), (0.02, 0.02, 0.02), ("red",), graspable=True, jitter_xy=0.02),
            ObjectSpec("blue_block", "block", (0.10, 0.30, 0.02), (0.02, 0.02, 0.02), ("blue",), graspable=True, jitter_xy=0.02),
        ],
        {"above": {"object": "red_block", "base": "blue_block", "xy_tol": 0.02}},
    )

    tasks["receive_object"] = task(
        "receive_object",
        "receive the bottle from the holder",
        "a holder presents a small bottle above the table",
        [
            ObjectSpec("holder", "holder", (0.0, 0.38, 0.09), (0.03, 0.03, 0.09)),
            ObjectSpec("bottle", "bottle", (0.0, 0.38, 0.215), (0.02, 0.02, 0.035), ("small",), graspable=True, jitter_xy=0.01),
        ],
        {"held": {"object": "bottle"}},
    )

    return tasks


def _fixture_root() -> Path:
    return Path(resources.files("skillbench").joinpath("fixtures"))


def bundled_task(name: str) -> TaskSpec:
    path = _fixture_root() / "tasks" / f"{name}.json"
    if not path.exists():
        raise KeyError(f"unknown bundled task {name!r}")
    return load_task_file(path)


def bundled_tasks() -> dict[str, TaskSpec]:
    return {name: bundled_task(name) for name in TASK_NAMES}


def bundled_episode_dir() -> Path:
    return _fixture_root() / "episodes"

def golden_dir() -> Path:
    return _fixture_root() / "golden"


def bundled_episode(task_name: str) -> Episode:
    return load_episode_file(bundled_episode_dir() / f"{task_name}_01.json")


def write_fixtures(root: Path | None = None, seed: int = CANONICAL_SEED) -> None:
    """Regenerate all bundled fixtures (tasks, episodes, golden wire lines)."""
    root = Path(root) if root is not None else _fixture_root()
    (root / "tasks").mkdir(parents=True, exist_ok=True)
    (root / "episodes").mkdir(parents=True, exist_ok=True)
    (root / "golden").mkdir(parents=True, exist_ok=True)

    tasks = builtin_tasks()
    plans = {}
    for name, task in tasks.items():
        save_task(task, root / "tasks" / f"{name}.json")
        world = task.build_world(seed)
        observe(world)  # raises if anything starts outside the camera frustum
        episode, final_world = generate_demo(task, world, DEFAULT_SIM_CONFIG)
        if not check_success(task, final_world):
            raise AssertionError(f"demo for task {name!r} does not satisfy its predicate")
        save_episode(episode, root / "episodes" / f"{episode.id}.json")
        plans[task.description] = _scripted_plan(task, episode)

    _write_golden(root / "golden", tasks["pick_object"], seed)
    (root / "golden" / "plans.json").write_text(json.dumps(plans, indent=1) + "\n")


def _scripted_plan(task: TaskSpec, episode: Episode) -> list[dict]:
    """Table-driven plan for an external scripted planner service.

    Destinations that equal an object's view anchor are sourced from the
    request's object_views at serve time; the rest are literal triplets from
    the canonical-seed demonstration.
    """
    from .demos import demo_script
    from .grammar import format_skill

    steps = []
    for demo, clip in zip(demo_script(task.name), episode.clips):
        entry = {"decision": format_skill(clip.skill)}
        if clip.spatial is not None:
            if demo.view_object is not None:
                entry["destination_from_view"] = demo.view_object
            else:
                entry["destination"] = clip.spatial.destination.as_list()
        steps.append(entry)
    return steps


def _write_golden(golden: Path, task: TaskSpec, seed: int) -> None:
    """Record the canonical pick_object wire exchange as byte fixtures."""
    from .engine import EngineConfig, run_episode
    from .protocol import OraclePlanner, encode_request, encode_response

    def factory(task_spec, world):
        episode, _ = generate_demo(task_spec, world, DEFAULT_SIM_CONFIG)
        return OraclePlanner(episode)

    result = run_episode(task, factory, EngineConfig(), seed=seed)
    requests = b"".join(encode_request(e.request) for e in result.entries)
    responses = b"".join(encode_response(e.response) for e in result.entries)
    (golden / "requests.jsonl").write_bytes(requests)
    (golden / "responses.jsonl").write_bytes(responses)


if __name__ == "__main__":
    write_fixtures()
    print(f"fixtures written under {_fixture_root()}")
