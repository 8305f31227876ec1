"""Bundled prompt templates and their deterministic field substitution.

Template text is shipped verbatim under skillbench/prompts/; only the four
request fields ({task_desc}, {historical_decisions}, {robot_arm_pos},
{scene_desc}) are substituted. Braced tokens that belong to the template
text itself (such as the skill option list) are left untouched.
"""

from __future__ import annotations

from importlib import resources

from ..geometry import Destination
from ..grammar import format_destination

TEMPLATE_IDS = ("system", "gpt4v-icl") + tuple(f"instruction-{i}" for i in range(1, 11))

_FIELD_TOKENS = ("task_desc", "historical_decisions", "robot_arm_pos", "scene_desc")


class UnknownTemplateError(KeyError):
    """Template id is not part of the bundled set."""


class MissingFieldError(KeyError):
    """Template references a field the request does not provide."""


def _asset_name(template_id: str) -> str:
    if template_id == "system":
        return "system.txt"
    if template_id == "gpt4v-icl":
        return "gpt4v_icl.txt"
    if template_id.startswith("instruction-"):
        try:
            n = int(template_id.split("-", 1)[1])
        except ValueError:
            raise UnknownTemplateError(template_id) from None
        if 1 <= n <= 10:
            return f"instruction_{n:02d}.txt"
    raise UnknownTemplateError(template_id)


def template_text(template_id: str) -> str:
    name = _asset_name(template_id)
    return resources.files("skillbench.prompts").joinpath(name).read_text(encoding="utf-8").rstrip("\n")


def render_history(history: list[str]) -> str:
    return ", ".join(history) if history else "none"


def render_arm_position(dest: Destination) -> str:
    return format_destination(dest)


def render_template(template_id: str, fields: dict[str, str | None]) -> str:
    """Substitute the known field tokens into a bundled template.

    Raises MissingFieldError when the template references a token whose value
    is absent (None or not supplied).
    """
    text = template_text(template_id)
    for token in _FIELD_TOKENS:
        marker = "{" + token + "}"
        if marker not in text:
            continue
        value = fields.get(token)
        if value is None:
            raise MissingFieldError(f"template {template_id!r} needs field {token!r}")
        text = text.replace(marker, value)
    return text
