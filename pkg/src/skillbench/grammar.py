"""Parser and formatter for the primitive-skill command language.

The language is a closed set of imperative templates; one canonical string
per skill. Destinations appear either as the literal placeholder token
``<pos>`` or as a bracketed triplet ``[x, y, d]``. Canonical rendering uses
exactly three decimal places for triplet components; full-precision values
travel out-of-band (see the planner protocol's numeric destination field).

Grammar (EBNF) is documented in docs/grammar.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import Destination

POS_TOKEN = "<pos>"

# Closed preposition vocabulary for the relative move form. Multi-word
# entries are matched longest-first so parsing stays deterministic.
DEFAULT_PREPOSITIONS = (
    "on top of",
    "in front of",
    "to the left of",
    "to the right of",
    "next to",
    "behind",
    "inside",
    "under",
)


class GrammarError(ValueError):
    """Input does not match the skill grammar; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class RangeError(ValueError):
    """A destination triplet parsed but violates its bounds."""


class NoSlotError(ValueError):
    """Skill has no unresolved position slot to bind."""


class SkillKind(Enum):
    MOVE = "move"
    PUSH = "push"
    PULL = "pull"
    PRESS = "press"
    ROTATE = "rotate"
    PICK = "pick"
    PLACE = "place"
    OPEN = "open"
    CLOSE = "close"
    DONE = "done"
    RESET = "reset"


class SkillCategory(Enum):
    MOTION_BASED = "motion-based"
    GRIPPER_BASED = "gripper-based"
    CONTROL = "control"


_CATEGORY = {
    SkillKind.MOVE: SkillCategory.MOTION_BASED,
    SkillKind.PUSH: SkillCategory.MOTION_BASED,
    SkillKind.PULL: SkillCategory.MOTION_BASED,
    SkillKind.PRESS: SkillCategory.MOTION_BASED,
    SkillKind.ROTATE: SkillCategory.MOTION_BASED,
    SkillKind.PICK: SkillCategory.GRIPPER_BASED,
    SkillKind.PLACE: SkillCategory.GRIPPER_BASED,
    SkillKind.OPEN: SkillCategory.GRIPPER_BASED,
    SkillKind.CLOSE: SkillCategory.GRIPPER_BASED,
    SkillKind.DONE: SkillCategory.CONTROL,
    SkillKind.RESET: SkillCategory.CONTROL,
}


@dataclass(frozen=True)
class Rotation:
    direction: str  # "clockwise" | "counterclockwise"
    angle: int  # integer degrees, exclusive (0, 360)

    def __post_init__(self):
        if self.direction not in ("clockwise", "counterclockwise"):
            raise ValueError(f"bad rotation direction {self.direction!r}")
        if not isinstance(self.angle, int) or not 0 < self.angle < 360:
            raise ValueError(f"rotation angle must be an integer in (0, 360), got {self.angle!r}")


@dataclass(frozen=True)
class PosSlot:
    """Position slot of a motion-based skill: unresolved (`<pos>`) or a Destination."""

    destination: Destination | None = None

    @property
    def resolved(self) -> bool:
        return self.destination is not None


UNRESOLVED = PosSlot(None)

_WORD = re.compile(r"[a-z]+")
_FLOAT = re.compile(r"-?(?:\d+\.\d*|\.\d+|\d+)")


@dataclass(frozen=True)
class PrimitiveSkill:
    """One parsed planner decision.

    Invariants (checked on construction): motion-based skills and only
    motion-based skills carry a pos slot; move is either absolute (no
    preposition/object) or relative (both present); push/pull/press carry an
    object; rotate carries rotation parameters; gripper and control skills
    carry no slot.
    """

    kind: SkillKind
    object: str | None = None
    attribute: str | None = None
    preposition: str | None = None
    rotation: Rotation | None = None
    pos: PosSlot | None = None

    def __post_init__(self):
        kind = self.kind
        category = _CATEGORY[kind]
        if category is SkillCategory.MOTION_BASED:
            if self.pos is None:
                raise ValueError(f"{kind.value} requires a pos slot")
        elif self.pos is not None:
            raise ValueError(f"{kind.value} cannot carry a pos slot")
        if kind is SkillKind.MOVE:
            if (self.preposition is None) != (self.object is None):
                raise ValueError("relative move requires both preposition and object")
            if self.object is None and self.attribute is not None:
                raise ValueError("attribute requires an object")
        elif kind in (SkillKind.PUSH, SkillKind.PULL, SkillKind.PRESS, SkillKind.PICK, SkillKind.PLACE):
            if not self.object:
                raise ValueError(f"{kind.value} requires an object")
            if self.preposition is not None:
                raise ValueError(f"{kind.value} cannot carry a preposition")
        else:
            if self.object is not None or self.attribute is not None or self.preposition is not None:
                raise ValueError(f"{kind.value} carries no placeholders")
        if kind is SkillKind.ROTATE:
            if self.rotation is None:
                raise ValueError("rotate requires rotation parameters")
        elif self.rotation is not None:
            raise ValueError(f"{kind.value} cannot carry rotation parameters")
        for name in ("object", "attribute"):
            value = getattr(self, name)
            if value is not None and not _valid_phrase(value):
                raise ValueError(f"{name} {value!r} must be lowercase words")
        if self.object is not None and len(self.object.split()) != 1:
            raise ValueError("object must be a single word (leading words are the attribute)")


def _valid_phrase(text: str) -> bool:
    words = text.split(" ")
    return bool(words) and all(_WORD.fullmatch(w) for w in words)


def classify(skill: PrimitiveSkill) -> SkillCategory:
    """Category of a skill; the three categories partition the kind enum."""
    return _CATEGORY[skill.kind]


def is_motion_based(skill: PrimitiveSkill) -> bool:
    return _CATEGORY[skill.kind] is SkillCategory.MOTION_BASED


def bind_destination(skill: PrimitiveSkill, dest: Destination) -> PrimitiveSkill:
    """Same skill with its unresolved pos slot resolved to `dest`."""
    if skill.pos is None:
        raise NoSlotError(f"{skill.kind.value} has no pos slot")
    if skill.pos.resolved:
        raise NoSlotError(f"{skill.kind.value} pos slot already resolved")
    return replace(skill, pos=PosSlot(dest))


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def fail(self, message: str):
        raise GrammarError(message, self.pos)

    def literal(self, token: str, message: str | None = None):
        if not self.text.startswith(token, self.pos):
            self.fail(message or f"expected {token!r}")
        self.pos += len(token)

    def try_literal(self, token: str) -> bool:
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def word(self) -> str:
        m = _WORD.match(self.text, self.pos)
        if not m:
            self.fail("expected a lowercase word")
        self.pos = m.end()
        return m.group()

    def number(self) -> float:
        m = _FLOAT.match(self.text, self.pos)
        if not m:
            self.fail("expected a number")
        self.pos = m.end()
        return float(m.group())


def _parse_pos(cur: _Cursor) -> PosSlot:
    if cur.try_literal(POS_TOKEN):
        return UNRESOLVED
    if not cur.try_literal("["):
        cur.fail(f"expected {POS_TOKEN} or a [x, y, d] triplet")
    values = [cur.number()]
    for _ in range(2):
        cur.literal(", ", "expected ', ' inside triplet")
        values.append(cur.number())
    cur.literal("]", "expected closing ']'")
    try:
        dest = Destination(*values)
    except ValueError as exc:
        raise RangeError(str(exc)) from exc
    return PosSlot(dest)


def _parse_object_phrase(cur: _Cursor, stop_words: tuple[str, ...] = ()) -> tuple[str | None, str]:
    """Parse `the {attribute} {object}`; leading words become the attribute.

    stop_words are terminator words (e.g. "to" before a trailing destination)
    that end the phrase instead of joining it.
    """
    cur.literal("the ", "expected 'the'")
    words = [cur.word()]
    while True:
        mark = cur.pos
        if not cur.try_literal(" "):
            break
        if cur.eof() or not _WORD.match(cur.text, cur.pos):
            cur.pos = mark
            break
        word = cur.word()
        if word in stop_words:
            cur.pos = mark
            break
        words.append(word)
    obj = words[-1]
    attribute = " ".join(words[:-1]) if len(words) > 1 else None
    return attribute, obj


def parse_skill(text: str, prepositions: tuple[str, ...] = DEFAULT_PREPOSITIONS) -> PrimitiveSkill:
    """Parse one canonical skill string; GrammarError carries the byte offset.

    Parsing is deterministic: the verb selects the template and prepositions
    are matched longest-first, so no input has two parses.
    """
    cur = _Cursor(text)
    verb = cur.word()

    if verb == "done" or verb == "reset":
        if not cur.eof():
            cur.fail("trailing input after control skill")
        return PrimitiveSkill(kind=SkillKind.DONE if verb == "done" else SkillKind.RESET)

    if verb == "move":
        cur.literal(" ")
        for prep in sorted(prepositions, key=len, reverse=True):
            if cur.try_literal(prep + " "):
                attribute, obj = _parse_object_phrase(cur)
                cur.literal(" ", "expected position after object")
                pos = _parse_pos(cur)
                if not cur.eof():
                    cur.fail("trailing input")
                return PrimitiveSkill(
                    kind=SkillKind.MOVE, object=obj, attribute=attribute, preposition=prep, pos=pos
                )
        cur.literal("to the ", "expected a preposition or 'to the'")
        pos = _parse_pos(cur)
        if not cur.eof():
            cur.fail("trailing input")
        return PrimitiveSkill(kind=SkillKind.MOVE, pos=pos)

    if verb in ("push", "pull"):
        cur.literal(" ")
        attribute, obj = _parse_object_phrase(cur, stop_words=("to",))
        cur.literal(" to the ", "expected 'to the' before position")
        pos = _parse_pos(cur)
        if not cur.eof():
            cur.fail("trailing input")
        kind = SkillKind.PUSH if verb == "push" else SkillKind.PULL
        return PrimitiveSkill(kind=kind, object=obj, attribute=attribute, pos=pos)

    if verb == "press":
        cur.literal(" ")
        attribute, obj = _parse_object_phrase(cur)
        cur.literal(" ", "expected position after object")
        pos = _parse_pos(cur)
        if not cur.eof():
            cur.fail("trailing input")
        return PrimitiveSkill(kind=SkillKind.PRESS, object=obj, attribute=attribute, pos=pos)

    if verb == "rotate":
        cur.literal(" ")
        direction = cur.word()
        if direction not in ("clockwise", "counterclockwise"):
            cur.fail("expected 'clockwise' or 'counterclockwise'")
        cur.literal(" ")
        angle_start = cur.pos
        angle = cur.number()
        if angle != int(angle) or not 0 < angle < 360:
            raise GrammarError("rotation angle must be an integer in (0, 360)", angle_start)
        cur.literal(" ", "expected position after angle")
        pos = _parse_pos(cur)
        if not cur.eof():
            cur.fail("trailing input")
        return PrimitiveSkill(
            kind=SkillKind.ROTATE, rotation=Rotation(direction, int(angle)), pos=pos
        )

    if verb in ("pick", "place"):
        cur.literal(" ")
        attribute, obj = _parse_object_phrase(cur)
        if not cur.eof():
            cur.fail("trailing input")
        kind = SkillKind.PICK if verb == "pick" else SkillKind.PLACE
        return PrimitiveSkill(kind=kind, object=obj, attribute=attribute)

    if verb in ("open", "close"):
        cur.literal(" the gripper", "expected 'the gripper'")
        if not cur.eof():
            cur.fail("trailing input")
        return PrimitiveSkill(kind=SkillKind.OPEN if verb == "open" else SkillKind.CLOSE)

    raise GrammarError(f"unknown verb {verb!r}", 0)


def format_destination(dest: Destination) -> str:
    return f"[{dest.x:.3f}, {dest.y:.3f}, {dest.d:.3f}]"


def _format_pos(pos: PosSlot) -> str:
    return format_destination(pos.destination) if pos.resolved else POS_TOKEN


def _format_object(attribute: str | None, obj: str) -> str:
    return f"the {attribute} {obj}" if attribute else f"the {obj}"


def format_skill(skill: PrimitiveSkill) -> str:
    """Canonical string for a skill; inverse of parse_skill on 3-decimal triplets."""
    kind = skill.kind
    if kind is SkillKind.DONE:
        return "done"
    if kind is SkillKind.RESET:
        return "reset"
    if kind in (SkillKind.OPEN, SkillKind.CLOSE):
        return f"{kind.value} the gripper"
    if kind in (SkillKind.PICK, SkillKind.PLACE):
        return f"{kind.value} {_format_object(skill.attribute, skill.object)}"
    if kind is SkillKind.MOVE:
        if skill.preposition is None:
            return f"move to the {_format_pos(skill.pos)}"
        return (
            f"move {skill.preposition} {_format_object(skill.attribute, skill.object)}"
            f" {_format_pos(skill.pos)}"
        )
    if kind in (SkillKind.PUSH, SkillKind.PULL):
        return (
            f"{kind.value} {_format_object(skill.attribute, skill.object)}"
            f" to the {_format_pos(skill.pos)}"
        )
    if kind is SkillKind.PRESS:
        return f"press {_format_object(skill.attribute, skill.object)} {_format_pos(skill.pos)}"
    if kind is SkillKind.ROTATE:
        rot = skill.rotation
        return f"rotate {rot.direction} {rot.angle} {_format_pos(skill.pos)}"
    raise AssertionError(f"unhandled kind {kind}")
