"""Poses, image-space destinations, pinhole projection, and trajectory interpolation.

Conventions used throughout the package:

* World frame: metres, z up.
* Camera frame: x right, y down, z along the optical axis, so image y grows
  downward and the top-left image corner is (0, 0).
* Image coordinates are normalized to [0, 1] on both axes; depth is the
  camera-frame z in metres.
* Quaternions are (w, x, y, z), unit norm, canonicalized to w >= 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNIT_TOL = 1e-9

CAMERA_SCHEMA_VERSION = 1


class BehindCameraError(ValueError):
    """Point has non-positive depth along the optical axis."""


class OutOfFrameError(ValueError):
    """Projection falls outside the normalized [0, 1] image square."""


class DegenerateError(ValueError):
    """Operation undefined for coincident endpoints."""


def _vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite 3-vector")
    return arr


def _quat(q) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"expected quaternion (w,x,y,z), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite quaternion")
    return arr


def quat_normalize(q) -> np.ndarray:
    q = _quat(q)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_canonical(q) -> np.ndarray:
    """Unit quaternion with w >= 0 (q and -q become the same value)."""
    q = quat_normalize(q)
    if q[0] < 0.0 or (q[0] == 0.0 and next((c for c in q[1:] if c != 0.0), 1.0) < 0.0):
        q = -q
    return q


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = _quat(a)
    bw, bx, by, bz = _quat(b)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q) -> np.ndarray:
    w, x, y, z = _quat(q)
    return np.array([w, -x, -y, -z])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w, x, y, z = _quat(q)
    u = np.array([x, y, z])
    v = _vec3(v)
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = _vec3(axis)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle_rad
    return quat_canonical(np.concatenate([[math.cos(half)], math.sin(half) * axis / n]))


def quat_angle(a, b) -> float:
    """Geodesic angle in radians between two unit quaternions."""
    dot = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return 2.0 * math.acos(min(1.0, dot))


def quat_slerp(a, b, t: float) -> np.ndarray:
    """Shortest-arc spherical interpolation; antipodal pairs handled by sign flip."""
    a = quat_normalize(a)
    b = quat_normalize(b)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 0.9995:
        return quat_normalize(a + t * (b - a))
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    return quat_normalize(
        (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b
    )


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m) -> np.ndarray:
    """Quaternion for a proper rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError("expected 3x3 matrix")
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return quat_canonical(q)


@dataclass(frozen=True, eq=False)
class Pose:
    """End-effector position (metres, world frame) and orientation.

    The orientation is normalized and canonicalized on construction, so two
    poses built from q and -q compare equal under pose_allclose.
    """

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = _vec3(self.position)
        quat = _quat(self.orientation)
        n = float(np.linalg.norm(quat))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"orientation norm {n} too far from 1")
        quat = quat_canonical(quat)
        pos.setflags(write=False)
        quat.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @staticmethod
    def identity(position=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(np.asarray(position, dtype=float), np.array([1.0, 0.0, 0.0, 0.0]))


def pose_allclose(a: Pose, b: Pose, tol: float = UNIT_TOL) -> bool:
    return (
        bool(np.all(np.abs(a.position - b.position) <= tol))
        and quat_angle(a.orientation, b.orientation) <= tol * 10.0
    )


# A trajectory is simply an ordered, nonempty list of poses.
Trajectory = list


@dataclass(frozen=True)
class Destination:
    """Normalized image coordinates plus camera-frame depth in metres."""

    x: float
    y: float
    d: float

    def __post_init__(self):
        for name in ("x", "y", "d"):
            v = getattr(self, name)
            if not isinstance(v, float):
                object.__setattr__(self, name, float(v))
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.d)):
            raise ValueError("non-finite destination")
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"image coordinates ({self.x}, {self.y}) outside [0, 1]")
        if self.d <= 0.0:
            raise ValueError(f"depth must be positive, got {self.d}")

    def as_list(self) -> list:
        return [self.x, self.y, self.d]


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole intrinsics in normalized-image units plus a world-to-camera transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # world -> camera, (w, x, y, z)
    translation: np.ndarray  # metres

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        rot = quat_canonical(self.rotation)
        tr = _vec3(self.translation)
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    def world_to_camera(self, point) -> np.ndarray:
        return quat_rotate(self.rotation, _vec3(point)) + self.translation

    def camera_to_world(self, point) -> np.ndarray:
        return quat_rotate(quat_conj(self.rotation), _vec3(point) - self.translation)

    def to_json(self) -> dict:
        return {
            "schema": CAMERA_SCHEMA_VERSION,
            "intrinsics": {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy},
            "extrinsics": {
                "rotation": [float(v) for v in self.rotation],
                "translation": [float(v) for v in self.translation],
            },
        }

    @staticmethod
    def from_json(doc: dict) -> "CameraModel":
        if doc.get("schema") != CAMERA_SCHEMA_VERSION:
            raise ValueError(f"unsupported camera schema {doc.get('schema')!r}")
        intr = doc["intrinsics"]
        extr = doc["extrinsics"]
        return CameraModel(
            fx=float(intr["fx"]),
            fy=float(intr["fy"]),
            cx=float(intr["cx"]),
            cy=float(intr["cy"]),
            rotation=np.asarray(extr["rotation"], dtype=float),
            translation=np.asarray(extr["translation"], dtype=float),
        )


def save_camera(camera: CameraModel, path) -> None:
    Path(path).write_text(json.dumps(camera.to_json(), indent=2) + "\n")


def load_camera(path) -> CameraModel:
    return CameraModel.from_json(json.loads(Path(path).read_text()))


def look_at_camera(
    position,
    target,
    fx: float,
    fy: float,
    cx: float = 0.5,
    cy: float = 0.5,
    up=(0.0, 0.0, 1.0),
) -> CameraModel:
    """Camera at `position` with the optical axis through `target`.

    The image x axis is horizontal (right when looking along the axis with
    `up` overhead) and the image y axis points as close to -up as the axis
    allows, which keeps image y growing downward for an overhead-ish view.
    """
    position = _vec3(position)
    forward = _vec3(target) - position
    n = float(np.linalg.norm(forward))
    if n < UNIT_TOL:
        raise DegenerateError("camera position and target coincide")
    forward = forward / n
    up = _vec3(up)
    x_cam = np.cross(forward, up)
    nx = float(np.linalg.norm(x_cam))
    if nx < UNIT_TOL:
        raise DegenerateError("view direction parallel to up vector")
    x_cam = x_cam / nx
    y_cam = np.cross(forward, x_cam)
    rot_matrix = np.stack([x_cam, y_cam, forward])  # rows: camera axes in world coords
    rotation = quat_from_matrix(rot_matrix)
    translation = -quat_rotate(rotation, position)
    return CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, rotation=rotation, translation=translation)


def project(camera: CameraModel, world_point) -> Destination:
    """Project a world point to a normalized-image destination triplet.

    Raises BehindCameraError for non-positive depth and OutOfFrameError when
    the projection leaves the [0, 1] image square; callers never receive a
    silently clamped destination.
    """
    pc = camera.world_to_camera(world_point)
    zc = float(pc[2])
    if zc <= 0.0:
        raise BehindCameraError(f"camera-frame depth {zc} is not positive")
    x = camera.cx + camera.fx * float(pc[0]) / zc
    y = camera.cy + camera.fy * float(pc[1]) / zc
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise OutOfFrameError(f"projection ({x:.4f}, {y:.4f}) outside [0, 1] image")
    return Destination(x=x, y=y, d=zc)


def unproject(camera: CameraModel, dest: Destination) -> np.ndarray:
    """World point whose projection is `dest`; exact right-inverse of project."""
    zc = dest.d
    xc = (dest.x - camera.cx) / camera.fx * zc
    yc = (dest.y - camera.cy) / camera.fy * zc
    return camera.camera_to_world(np.array([xc, yc, zc]))


def interpolate_linear(
    start: Pose,
    end: Pose,
    max_step: float,
    max_rot_step: float = 0.1,
) -> list[Pose]:
    """Straight-line trajectory from start to end.

    Positions are uniformly spaced along the segment with consecutive gaps of
    at most max_step metres; orientations follow shortest-arc spherical
    interpolation with the same parameter. A pure rotation (coincident
    positions) is subdivided so no step rotates more than max_rot_step
    radians. Identical endpoints yield a single waypoint.
    """
    if max_step <= 0.0:
        raise ValueError("max_step must be positive")
    if max_rot_step <= 0.0:
        raise ValueError("max_rot_step must be positive")
    dist = float(np.linalg.norm(end.position - start.position))
    angle = quat_angle(start.orientation, end.orientation)
    if dist == 0.0 and angle <= UNIT_TOL:
        return [start]
    n = max(math.ceil(dist / max_step), math.ceil(angle / max_rot_step), 1)
    waypoints = [start]
    for i in range(1, n):
        t = i / n
        waypoints.append(
            Pose(
                position=(1.0 - t) * start.position + t * end.position,
                orientation=quat_slerp(start.orientation, end.orientation, t),
            )
        )
    waypoints.append(end)
    return waypoints


def derive_direction(start: Pose, end: Pose) -> np.ndarray:
    """Unit vector from start position to end position (world frame)."""
    disp = end.position - start.position
    n = float(np.linalg.norm(disp))
    if n <= UNIT_TOL:
        raise DegenerateError("positions coincide; direction undefined")
    return disp / n
