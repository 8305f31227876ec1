"""Wire protocol between the executor and a planner service.

Framing: one message per line, a UTF-8 JSON object terminated by a single
newline, over any reliable byte stream. Requests and responses strictly
alternate on a connection; the executor is the client and sends one request
per decision. Canonical encoding (sorted keys, compact separators, ASCII)
makes recorded exchanges byte-stable. Unknown fields are ignored on decode
for forward compatibility; an unknown protocol_version is rejected.

Field-by-field documentation lives in docs/protocol.md, with golden byte
fixtures under skillbench/fixtures/golden/.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from dataclasses import dataclass

from . import prompts
from .episodes import Episode
from .geometry import Destination
from .grammar import format_destination, format_skill, parse_skill
from .sim import ObjectView

PROTOCOL_VERSION = 1


class DecodeError(ValueError):
    """Line is not a valid protocol message; carries the byte offset."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class VersionError(DecodeError):
    """Message declares a protocol version this implementation does not speak."""


class HistoryMismatchError(RuntimeError):
    """Request history is not a prefix of the oracle's planned decisions."""


@dataclass(frozen=True)
class PlanRequest:
    task_description: str
    history: tuple[str, ...]
    arm_image_position: Destination
    object_views: tuple[ObjectView, ...]
    frame_id: int
    scene_description: str | None = None
    image_bytes: str | None = None  # base64 text, reserved for VLM-backed planners
    protocol_version: int = PROTOCOL_VERSION

    def __post_init__(self):
        for entry in self.history:
            parse_skill(entry)  # history must be grammar-conformant
        object.__setattr__(self, "history", tuple(self.history))
        object.__setattr__(self, "object_views", tuple(self.object_views))


@dataclass(frozen=True)
class PlanResponse:
    decision: str
    destination: Destination | None = None
    diagnostics: str | None = None


def canonical_json(doc) -> bytes:
    return json.dumps(
        doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False
    ).encode("ascii")


def request_to_json(request: PlanRequest) -> dict:
    doc = {
        "protocol_version": request.protocol_version,
        "task_description": request.task_description,
        "history": list(request.history),
        "arm_image_position": request.arm_image_position.as_list(),
        "object_views": [
            {
                "id": v.id,
                "category": v.category,
                "attributes": list(v.attributes),
                "image_position": v.image_position.as_list(),
            }
            for v in request.object_views
        ],
        "frame_id": request.frame_id,
    }
    if request.scene_description is not None:
        doc["scene_description"] = request.scene_description
    if request.image_bytes is not None:
        doc["image_bytes"] = request.image_bytes
    return doc


def response_to_json(response: PlanResponse) -> dict:
    doc = {"decision": response.decision}
    if response.destination is not None:
        doc["destination"] = response.destination.as_list()
    if response.diagnostics is not None:
        doc["diagnostics"] = response.diagnostics
    return doc


def encode_request(request: PlanRequest) -> bytes:
    return canonical_json(request_to_json(request)) + b"\n"


def encode_response(response: PlanResponse) -> bytes:
    return canonical_json(response_to_json(response)) + b"\n"


def _parse_line(line: bytes) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"malformed JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(doc, dict):
        raise DecodeError("message must be a JSON object")
    return doc


def _triplet(values, what: str) -> Destination:
    try:
        x, y, d = (float(v) for v in values)
        return Destination(x, y, d)
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"bad {what} triplet: {exc}") from exc


def decode_request(line: bytes) -> PlanRequest:
    doc = _parse_line(line)
    version = doc.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise VersionError(f"unsupported protocol_version {version!r}")
    try:
        views = tuple(
            ObjectView(
                id=str(v["id"]),
                category=str(v["category"]),
                attributes=tuple(v.get("attributes", ())),
                image_position=_triplet(v["image_position"], "image_position"),
            )
            for v in doc.get("object_views", [])
        )
        request = PlanRequest(
            task_description=str(doc["task_description"]),
            history=tuple(str(h) for h in doc.get("history", [])),
            arm_image_position=_triplet(doc["arm_image_position"], "arm_image_position"),
            object_views=views,
            frame_id=int(doc["frame_id"]),
            scene_description=doc.get("scene_description"),
            image_bytes=doc.get("image_bytes"),
        )
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"bad request: {exc}") from exc
    return request


def decode_response(line: bytes) -> PlanResponse:
    doc = _parse_line(line)
    try:
        destination = None
        if doc.get("destination") is not None:
            destination = _triplet(doc["destination"], "destination")
        return PlanResponse(
            decision=str(doc["decision"]),
            destination=destination,
            diagnostics=doc.get("diagnostics"),
        )
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"bad response: {exc}") from exc


def render_prompt(request: PlanRequest, template_id: str) -> str:
    """Render a bundled prompt template against a request."""
    return prompts.render_template(
        template_id,
        {
            "task_desc": request.task_description,
            "historical_decisions": prompts.render_history(list(request.history)),
            "robot_arm_pos": format_destination(request.arm_image_position),
            "scene_desc": request.scene_description,
        },
    )


class OraclePlanner:
    """Replays an annotated episode as ground-truth decisions.

    Stateless above the request: the cursor is the request history length,
    verified to be a prefix of the episode's clip decisions, so replaying a
    recorded request always yields the identical response.
    """

    def __init__(self, episode: Episode):
        self.episode = episode
        self._decisions = [format_skill(clip.skill) for clip in episode.clips]

    def plan(self, request: PlanRequest) -> PlanResponse:
        cursor = len(request.history)
        if cursor > len(self._decisions) or list(request.history) != self._decisions[:cursor]:
            raise HistoryMismatchError(
                f"history {list(request.history)!r} is not a prefix of the planned decisions"
            )
        if cursor == len(self._decisions):
            return PlanResponse(decision="done")
        clip = self.episode.clips[cursor]
        destination = clip.spatial.destination if clip.spatial is not None else None
        return PlanResponse(decision=self._decisions[cursor], destination=destination)

    def close(self):
        pass


class EndpointPlanner:
    """Client half of the wire protocol: one connection per episode."""

    def __init__(self, address: tuple[str, int]):
        self._sock = socket.create_connection(address)
        self._reader = self._sock.makefile("rb")

    def plan(self, request: PlanRequest) -> PlanResponse:
        self._sock.sendall(encode_request(request))
        line = self._reader.readline()
        if not line:
            raise ConnectionError("planner closed the connection mid-episode")
        return decode_response(line)

    def close(self):
        try:
            self._reader.close()
        finally:
            self._sock.close()


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


class _OracleHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line or not line.strip():
                return  # client done, or half a line at shutdown
            try:
                request = decode_request(line)
            except DecodeError:
                return  # abort this connection only; the service lives on
            response = self.server.plan(request)
            try:
                self.wfile.write(encode_response(response))
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return


class OracleService(socketserver.ThreadingTCPServer):
    """Serves oracle plans for a corpus of episodes, keyed by task description."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, episodes: list[Episode], bind_address: tuple[str, int]):
        super().__init__(bind_address, _OracleHandler)
        self._by_task: dict[str, Episode] = {}
        for episode in episodes:
            self._by_task[episode.task_description] = episode
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def plan(self, request: PlanRequest) -> PlanResponse:
        episode = self._by_task.get(request.task_description)
        if episode is None:
            return PlanResponse(
                decision="reset", diagnostics=f"no episode for task {request.task_description!r}"
            )
        try:
            return OraclePlanner(episode).plan(request)
        except HistoryMismatchError as exc:
            return PlanResponse(decision="reset", diagnostics=str(exc))

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve_oracle(episodes: list[Episode], bind_address: tuple[str, int] = ("127.0.0.1", 0)) -> OracleService:
    """Start an oracle planner service; returns the running (started) service."""
    return OracleService(episodes, bind_address).start()
