"""Event-template containers shared by every parser backend.

All four parsers emit templates in one common shape: a sequence of tokens
where each token is either a literal word or the single-token wildcard
``<*>`` that stands for exactly one arbitrary token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

WILDCARD = "<*>"

_ID_CHUNKS = re.compile(r"(\d+)")


def natural_key(template_id: str) -> tuple:
    """Sort key that orders T2 before T10."""
    return tuple(int(part) if part.isdigit() else part
                 for part in _ID_CHUNKS.split(template_id))


@dataclass(frozen=True)
class EventTemplate:
    """One learned event pattern: literal tokens with wildcard positions."""

    template_id: str
    tokens: tuple[str, ...]
    support: int = 1

    def matches(self, tokens) -> bool:
        """Positional match: same length, literals equal, wildcards free."""
        if len(tokens) != len(self.tokens):
            return False
        return all(t == WILDCARD or t == o for t, o in zip(self.tokens, tokens))


@dataclass
class TemplateSet:
    """The templates one parser learned from a training corpus."""

    parser_name: str
    parser_params: dict
    templates: list[EventTemplate] = field(default_factory=list)
    assignment: dict[int, str] = field(default_factory=dict)

    def by_id(self) -> dict[str, EventTemplate]:
        return {t.template_id: t for t in self.templates}


def list_templates(ts: TemplateSet) -> list[EventTemplate]:
    """Templates in natural id order (T2 before T10)."""
    return sorted(ts.templates, key=lambda t: natural_key(t.template_id))


def export_templates(ts: TemplateSet) -> str:
    """Stable line-delimited export: parser, id, space-joined tokens, support."""
    lines = []
    for t in list_templates(ts):
        lines.append("\t".join([ts.parser_name, t.template_id,
                                " ".join(t.tokens), str(t.support)]))
    return "\n".join(lines) + ("\n" if lines else "")


def import_templates(text: str) -> TemplateSet:
    """Parse an :func:`export_templates` dump. Assignments are not exported."""
    templates = []
    parser_name = ""
    for raw in text.splitlines():
        if not raw.strip():
            continue
        parser_name, template_id, tokens, support = raw.split("\t")
        templates.append(EventTemplate(template_id=template_id,
                                       tokens=tuple(tokens.split(" ")),
                                       support=int(support)))
    return TemplateSet(parser_name=parser_name, parser_params={}, templates=templates)
