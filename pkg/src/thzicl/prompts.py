"""Conversation assembly for zero-shot and one-shot classification, plus the
reply parser for the structured "### Classification:" return format.

Template texts ship with the package; a directory override can replace any
subset using the file names 1_system_prompt.txt, 2_frame_prompt.txt and
40_in_context_learning_prompt.txt.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

IMAGE_PLACEHOLDER = "[Image NR]"

TEMPLATE_FILES = {
    "task_instruction": "1_system_prompt.txt",
    "query_template": "2_frame_prompt.txt",
    "demo_template": "40_in_context_learning_prompt.txt",
}


class PromptError(Exception):
    pass


class MissingPlaceholder(PromptError):
    pass


class MissingDemonstration(PromptError):
    pass


class UnparseableReply(PromptError):
    pass


class AmbiguousReply(PromptError):
    pass


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"


class ShotFormat(enum.Enum):
    ZERO_SHOT = "zero"
    ONE_SHOT = "one"


class Label(enum.Enum):
    YES_C4 = "YES_C4"
    NO_C4 = "NO_C4"


@dataclass(frozen=True)
class PromptTemplates:
    task_instruction: str
    query_template: str
    demo_template: str

    def __post_init__(self):
        if self.query_template.count(IMAGE_PLACEHOLDER) != 1:
            raise MissingPlaceholder(
                f"query template must contain exactly one {IMAGE_PLACEHOLDER!r}"
            )
        for marker in ("<BEGIN Return Format Each Image>", "<END Return Format Each Image>"):
            if marker not in self.task_instruction:
                raise MissingPlaceholder(f"task instruction lacks marker {marker!r}")


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    png: bytes = field(repr=False)


@dataclass(frozen=True)
class MultimodalMessage:
    role: Role
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("message needs at least one part")


@dataclass(frozen=True)
class ConversationBundle:
    shot_format: ShotFormat
    messages: tuple
    frame_index: int

    def image_count(self) -> int:
        return sum(
            1 for msg in self.messages for part in msg.parts if isinstance(part, ImagePart)
        )


@dataclass(frozen=True)
class ParsedLabel:
    label: Label
    source: str  # "STRUCTURED" or "FALLBACK"
    matched_span: str


def load_templates(directory: str | Path | None = None) -> PromptTemplates:
    """Embedded defaults, with per-file overrides from a directory."""
    texts = {}
    for attr, fname in TEMPLATE_FILES.items():
        override = Path(directory) / fname if directory is not None else None
        if override is not None and override.is_file():
            texts[attr] = override.read_text(encoding="utf-8")
        else:
            texts[attr] = (
                resources.files("thzicl.templates").joinpath(fname).read_text(encoding="utf-8")
            )
    return PromptTemplates(**texts)


def format_frame_number(frame_index: int) -> str:
    return f"{frame_index:04d}"


def build_query(templates: PromptTemplates, frame_index: int, frame_png: bytes) -> MultimodalMessage:
    text = templates.query_template.replace(IMAGE_PLACEHOLDER, format_frame_number(frame_index))
    return MultimodalMessage(role=Role.USER, parts=(TextPart(text), ImagePart(frame_png)))


def build_demonstration(templates: PromptTemplates, crop_png: bytes) -> MultimodalMessage:
    return MultimodalMessage(
        role=Role.USER, parts=(TextPart(templates.demo_template), ImagePart(crop_png))
    )


def assemble(
    shot: ShotFormat,
    templates: PromptTemplates,
    frame_index: int,
    frame_png: bytes,
    crop_png: bytes | None = None,
    system_as_user: bool = False,
) -> ConversationBundle:
    """Task instruction, optional demonstration, then the query — in that
    order, each image directly preceded by its introducing text."""
    instruction_role = Role.USER if system_as_user else Role.SYSTEM
    messages = [MultimodalMessage(role=instruction_role, parts=(TextPart(templates.task_instruction),))]
    if shot is ShotFormat.ONE_SHOT:
        if crop_png is None:
            raise MissingDemonstration("one-shot assembly requires a demonstration crop")
        messages.append(build_demonstration(templates, crop_png))
    messages.append(build_query(templates, frame_index, frame_png))
    return ConversationBundle(shot_format=shot, messages=tuple(messages), frame_index=frame_index)


_PHRASE = re.compile(r"(yes\s*c4|no\s*c4)", re.IGNORECASE)
_STRUCTURED_LINE = re.compile(r"^\s*#*\s*Classification\b", re.IGNORECASE)


def _label_for(span: str) -> Label:
    return Label.YES_C4 if span.lower().lstrip().startswith("yes") else Label.NO_C4


def parse_classification(raw_reply: str) -> ParsedLabel:
    """Prefer the "Classification" line of the return format; otherwise fall
    back to the earliest "Yes C4" / "No C4" phrase anywhere in the reply."""
    for line in raw_reply.splitlines():
        if _STRUCTURED_LINE.match(line):
            matches = _PHRASE.findall(line)
            kinds = {_label_for(m) for m in matches}
            if len(kinds) == 2:
                raise AmbiguousReply(f"classification line contains both labels: {line!r}")
            if matches:
                return ParsedLabel(
                    label=_label_for(matches[0]), source="STRUCTURED", matched_span=matches[0]
                )
    m = _PHRASE.search(raw_reply)
    if m is None:
        raise UnparseableReply("reply contains neither 'Yes C4' nor 'No C4'")
    return ParsedLabel(label=_label_for(m.group(0)), source="FALLBACK", matched_span=m.group(0))
