"""Prompt assembly for the generation stage.

Two templates: a plain field skeleton and an instruction-prefixed variant.
Both render the three sections in fixed order (OCR Text, Mentions,
Paragraphs). When the rendered prompt would exceed the character budget,
only the Paragraphs section is truncated, and only at sentence-chunk
boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .textkit import split_chunks

INSTRUCTION_PREAMBLE = (
    "Summarize the following OCR text, mentions, and paragraphs, "
    "extracting key information and generating a concise summary. "
)

MIN_PROMPT_CHARS = 64


class PromptCapacityError(ValueError):
    pass


class TemplateId(str, enum.Enum):
    PLAIN = "plain"
    INSTRUCTION = "instruction"


@dataclass(frozen=True)
class PromptTemplate:
    id: TemplateId
    preamble: str

    @classmethod
    def plain(cls) -> "PromptTemplate":
        return cls(TemplateId.PLAIN, "")

    @classmethod
    def instruction(cls) -> "PromptTemplate":
        return cls(TemplateId.INSTRUCTION, INSTRUCTION_PREAMBLE)

    @classmethod
    def from_id(cls, template_id: TemplateId | str) -> "PromptTemplate":
        return cls.instruction() if TemplateId(template_id) is TemplateId.INSTRUCTION else cls.plain()


@dataclass(frozen=True)
class PromptText:
    text: str
    template_id: TemplateId
    section_offsets: dict[str, tuple[int, int]] = field(compare=False)
    truncated: bool = False


def build_prompt(
    ocr_text: str,
    mentions: list[str],
    paragraph: str,
    template: PromptTemplate,
    max_chars: int = 4096,
) -> PromptText:
    """Render the prompt, truncating the paragraph section to fit max_chars."""
    if max_chars < MIN_PROMPT_CHARS:
        raise PromptCapacityError(f"max_chars must be >= {MIN_PROMPT_CHARS}, got {max_chars}")
    mention_text = " ".join(mentions)
    head = f"{template.preamble}OCR Text: {ocr_text}\nMentions: {mention_text}\nParagraphs: "
    budget = max_chars - len(head)
    if budget < 0:
        raise PromptCapacityError(
            f"max_chars={max_chars} cannot hold the preamble, headers, OCR text and mentions"
        )

    truncated = False
    body = paragraph
    if len(body) > budget:
        # drop trailing chunks until the paragraph fits; never cut mid-sentence
        truncated = True
        kept = ""
        for chunk in split_chunks([paragraph]):
            candidate = chunk.text if not kept else f"{kept} {chunk.text}"
            if len(candidate) > budget:
                break
            kept = candidate
        body = kept

    text = head + body
    ocr_start = len(template.preamble) + len("OCR Text: ")
    mention_start = ocr_start + len(ocr_text) + len("\nMentions: ")
    para_start = mention_start + len(mention_text) + len("\nParagraphs: ")
    offsets = {
        "ocr_text": (ocr_start, ocr_start + len(ocr_text)),
        "mentions": (mention_start, mention_start + len(mention_text)),
        "paragraphs": (para_start, para_start + len(body)),
    }
    return PromptText(text=text, template_id=template.id, section_offsets=offsets, truncated=truncated)
