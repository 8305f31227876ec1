"""Annotated-episode data model, file format, and spatial-information derivation.

An episode is one teleoperated demonstration: a camera model, a sequence of
timestamped end-effector records, and an ordered list of clips. Each clip
spans a frame range and is labeled with one primitive skill; motion-based
clips additionally store the three spatial-information forms (destination,
direction, trajectory) derived from the records.

Storage is one JSON document per episode with a versioned ``"schema"``
header (see docs/formats.md).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import prompts
from .geometry import (
    CameraModel,
    DegenerateError,
    Destination,
    Pose,
    project,
)
from .grammar import (
    PrimitiveSkill,
    format_destination,
    format_skill,
    is_motion_based,
    parse_skill,
)

EPISODE_SCHEMA_VERSION = 1

GRIPPER_MAX = 0.085  # parallel-gripper opening, metres


class SchemaError(ValueError):
    """Document does not match the episode schema; message carries the field path."""


class InvariantError(ValueError):
    """Document parsed but violates a data-model invariant."""


@dataclass(frozen=True)
class TeleopRecord:
    timestamp: float
    pose: Pose
    gripper_width: float

    def __post_init__(self):
        if not 0.0 <= self.gripper_width <= GRIPPER_MAX:
            raise InvariantError(
                f"gripper width {self.gripper_width} outside [0, {GRIPPER_MAX}]"
            )


@dataclass(frozen=True)
class SpatialInfo:
    """The three spatial-information forms attached to a motion-based clip."""

    destination: Destination
    trajectory: list[Pose]
    direction: np.ndarray | None = None

    def __post_init__(self):
        if not self.trajectory:
            raise InvariantError("trajectory must be nonempty")
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
                raise InvariantError("direction must be a unit vector")
            d.setflags(write=False)
            object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Clip:
    start_frame: int
    end_frame: int
    skill: PrimitiveSkill
    spatial: SpatialInfo | None = None

    def __post_init__(self):
        if self.start_frame < 0 or self.start_frame >= self.end_frame:
            raise InvariantError(
                f"clip frames [{self.start_frame}, {self.end_frame}] not increasing"
            )
        # Motion-based clips may be built bare and annotated via derive_spatial;
        # Episode enforces that stored motion clips carry their spatial info.
        if self.spatial is not None and not is_motion_based(self.skill):
            raise InvariantError("only motion-based skills carry spatial info")
        if self.skill.pos is not None and self.skill.pos.resolved:
            raise InvariantError("stored skills keep their pos slot unresolved")


@dataclass(frozen=True)
class Episode:
    id: str
    task: str
    task_description: str
    camera: CameraModel
    records: list[TeleopRecord]
    clips: list[Clip]
    scene_caption: str | None = None

    def __post_init__(self):
        if not self.records:
            raise InvariantError("episode has no teleop records")
        times = [r.timestamp for r in self.records]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvariantError("record timestamps must be strictly increasing")
        last = len(self.records) - 1
        prev_end = -1
        for i, clip in enumerate(self.clips):
            if clip.start_frame <= prev_end:
                raise InvariantError(f"clip {i} overlaps or disorders the previous clip")
            if clip.end_frame > last:
                raise InvariantError(f"clip {i} frame range exceeds record count {last + 1}")
            if is_motion_based(clip.skill) and clip.spatial is None:
                raise InvariantError(f"clip {i} is motion-based but has no spatial info")
            prev_end = clip.end_frame


@dataclass(frozen=True)
class TrainingRow:
    observation_ref: int
    arm_image_position: Destination
    history: list[str]
    target_decision: str
    rendered_prompt: str


def _pose_to_json(pose: Pose) -> dict:
    return {
        "position": [float(v) for v in pose.position],
        "orientation": [float(v) for v in pose.orientation],
    }


def _pose_from_json(doc: dict, path: str) -> Pose:
    try:
        return Pose(np.asarray(doc["position"], dtype=float), np.asarray(doc["orientation"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad pose ({exc})") from exc


def episode_to_json(episode: Episode) -> dict:
    doc = {
        "schema": EPISODE_SCHEMA_VERSION,
        "id": episode.id,
        "task": episode.task,
        "task_description": episode.task_description,
        "camera": episode.camera.to_json(),
        "records": [
            {
                "t": r.timestamp,
                "position": [float(v) for v in r.pose.position],
                "orientation": [float(v) for v in r.pose.orientation],
                "gripper_width": r.gripper_width,
            }
            for r in episode.records
        ],
        "clips": [],
    }
    if episode.scene_caption is not None:
        doc["scene_caption"] = episode.scene_caption
    for clip in episode.clips:
        entry = {
            "start_frame": clip.start_frame,
            "end_frame": clip.end_frame,
            "skill": format_skill(clip.skill),
        }
        if clip.spatial is not None:
            spatial = {
                "destination": clip.spatial.destination.as_list(),
                "trajectory": [_pose_to_json(p) for p in clip.spatial.trajectory],
            }
            if clip.spatial.direction is not None:
                spatial["direction"] = [float(v) for v in clip.spatial.direction]
            entry["spatial"] = spatial
        doc["clips"].append(entry)
    return doc


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}.{key}: missing required field")
    return doc[key]


def episode_from_json(doc: dict) -> Episode:
    if not isinstance(doc, dict):
        raise SchemaError("$: episode document must be an object")
    if doc.get("schema") != EPISODE_SCHEMA_VERSION:
        raise SchemaError(f"$.schema: unsupported version {doc.get('schema')!r}")
    try:
        camera = CameraModel.from_json(_require(doc, "camera", "$"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"$.camera: {exc}") from exc

    records = []
    raw_records = _require(doc, "records", "$")
    if not isinstance(raw_records, list):
        raise SchemaError("$.records: must be a list")
    for i, raw in enumerate(raw_records):
        path = f"$.records[{i}]"
        pose = _pose_from_json(raw, path)
        try:
            records.append(
                TeleopRecord(
                    timestamp=float(_require(raw, "t", path)),
                    pose=pose,
                    gripper_width=float(_require(raw, "gripper_width", path)),
                )
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (SchemaError, InvariantError)):
                raise
            raise SchemaError(f"{path}: {exc}") from exc

    clips = []
    raw_clips = _require(doc, "clips", "$")
    if not isinstance(raw_clips, list):
        raise SchemaError("$.clips: must be a list")
    for i, raw in enumerate(raw_clips):
        path = f"$.clips[{i}]"
        try:
            skill = parse_skill(_require(raw, "skill", path))
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{path}.skill: {exc}") from exc
        spatial = None
        if "spatial" in raw and raw["spatial"] is not None:
            sp = raw["spatial"]
            try:
                destination = Destination(*[float(v) for v in _require(sp, "destination", path)])
            except (TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"{path}.spatial.destination: {exc}") from exc
            trajectory = [
                _pose_from_json(p, f"{path}.spatial.trajectory[{j}]")
                for j, p in enumerate(_require(sp, "trajectory", path))
            ]
            direction = None
            if sp.get("direction") is not None:
                direction = np.asarray(sp["direction"], dtype=float)
            spatial = SpatialInfo(destination=destination, trajectory=trajectory, direction=direction)
        clips.append(
            Clip(
                start_frame=int(_require(raw, "start_frame", path)),
                end_frame=int(_require(raw, "end_frame", path)),
                skill=skill,
                spatial=spatial,
            )
        )

    return Episode(
        id=str(_require(doc, "id", "$")),
        task=str(_require(doc, "task", "$")),
        task_description=str(_require(doc, "task_description", "$")),
        camera=camera,
        records=records,
        clips=clips,
        scene_caption=doc.get("scene_caption"),
    )


def load_episode(data: bytes | str) -> Episode:
    """Parse and validate one episode document."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: not valid JSON ({exc})") from exc
    return episode_from_json(doc)


def load_episode_file(path) -> Episode:
    return load_episode(Path(path).read_bytes())


def save_episode(episode: Episode, path) -> None:
    Path(path).write_text(json.dumps(episode_to_json(episode), indent=1) + "\n")


def derive_spatial(clip: Clip, records: list[TeleopRecord], camera: CameraModel) -> SpatialInfo:
    """Recompute a motion-based clip's spatial info from the teleop records.

    The trajectory is the record poses over the clip's frame range, the
    destination is the projection of the final pose, and the direction is the
    start-to-end unit displacement (absent when the endpoints coincide).
    """
    if not is_motion_based(clip.skill):
        raise InvariantError(f"{clip.skill.kind.value} is not motion-based")
    if clip.end_frame >= len(records):
        raise InvariantError("clip frame range exceeds records")
    poses = [records[i].pose for i in range(clip.start_frame, clip.end_frame + 1)]
    destination = project(camera, poses[-1].position)
    direction = None
    try:
        from .geometry import derive_direction

        direction = derive_direction(poses[0], poses[-1])
    except DegenerateError:
        direction = None
    return SpatialInfo(destination=destination, trajectory=poses, direction=direction)


def to_training_rows(episode: Episode, template_id: str = "instruction-1") -> list[TrainingRow]:
    """One instruction-following row per clip plus a terminal "done" row."""
    rows = []
    history: list[str] = []
    scene = episode.scene_caption
    targets = [format_skill(clip.skill) for clip in episode.clips] + ["done"]
    frames = [clip.start_frame for clip in episode.clips]
    frames.append(episode.clips[-1].end_frame if episode.clips else 0)
    for frame, target in zip(frames, targets):
        arm_pos = project(episode.camera, episode.records[frame].pose.position)
        prompt = prompts.render_template(
            template_id,
            {
                "task_desc": episode.task_description,
                "historical_decisions": prompts.render_history(history),
                "robot_arm_pos": format_destination(arm_pos),
                "scene_desc": scene,
            },
        )
        rows.append(
            TrainingRow(
                observation_ref=frame,
                arm_image_position=arm_pos,
                history=list(history),
                target_decision=target,
                rendered_prompt=prompt,
            )
        )
        history.append(target)
    return rows


@dataclass
class CorpusFileReport:
    path: str
    ok: bool
    episode_id: str | None = None
    clip_count: int = 0
    error: str | None = None


@dataclass
class CorpusReport:
    files: list[CorpusFileReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.files)

    def summary(self) -> str:
        lines = []
        for f in self.files:
            if f.ok:
                lines.append(f"PASS {f.path} ({f.episode_id}, {f.clip_count} clips)")
            else:
                lines.append(f"FAIL {f.path}: {f.error}")
        lines.append(f"{sum(f.ok for f in self.files)}/{len(self.files)} files pass")
        return "\n".join(lines)


def validate_corpus(path) -> CorpusReport:
    """Load every *.json episode under a directory and report per-file results."""
    report = CorpusReport()
    root = Path(path)
    for file in sorted(root.glob("*.json")):
        entry = CorpusFileReport(path=str(file), ok=True)
        try:
            episode = load_episode_file(file)
            entry.episode_id = episode.id
            entry.clip_count = len(episode.clips)
        except (SchemaError, InvariantError, OSError) as exc:
            entry.ok = False
            entry.error = str(exc)
        report.files.append(entry)
    return report


def spatial_max_divergence(episode: Episode) -> float:
    """Largest absolute difference between stored and re-derived spatial fields.

    Compares destination triplets, direction components, and trajectory
    endpoint positions; used by the `derive` subcommand and the regeneration
    check.
    """
    worst = 0.0
    for clip in episode.clips:
        if clip.spatial is None:
            continue
        derived = derive_spatial(clip, episode.records, episode.camera)
        stored = clip.spatial
        worst = max(
            worst,
            abs(stored.destination.x - derived.destination.x),
            abs(stored.destination.y - derived.destination.y),
            abs(stored.destination.d - derived.destination.d),
        )
        if (stored.direction is None) != (derived.direction is None):
            return float("inf")
        if stored.direction is not None:
            worst = max(worst, float(np.max(np.abs(stored.direction - derived.direction))))
        if len(stored.trajectory) != len(derived.trajectory):
            return float("inf")
        for a, b in ((0, 0), (-1, -1)):
            worst = max(
                worst,
                float(
                    np.max(np.abs(stored.trajectory[a].position - derived.trajectory[b].position))
                ),
            )
    return worst
