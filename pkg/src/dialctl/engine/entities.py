"""Deterministic gazetteer entity extraction and the inline markup used by
dialog corpora (``<type>surface</type>``)."""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class EntityMention:
    entity_type: str
    surface: str
    start: int
    end: int
    resolved: str | None = None


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "'"


class Gazetteer:
    """Maps surface forms (including nicknames and synonyms) to
    (entity type, canonical value) pairs.

    Matching is longest-match, left-to-right, case-insensitive and
    non-overlapping, with word boundaries on both sides.
    """

    def __init__(self, entries: dict[str, tuple[str, str]]):
        self.entries = {surface.lower(): pair for surface, pair in entries.items()}
        # longest first so multiword surfaces win over their prefixes
        self._surfaces = sorted(self.entries, key=len, reverse=True)

    def lookup(self, surface: str) -> tuple[str, str] | None:
        return self.entries.get(surface.lower())

    def extract(self, text: str) -> list[EntityMention]:
        lower = text.lower()
        mentions: list[EntityMention] = []
        pos = 0
        n = len(lower)
        while pos < n:
            if not _is_word_char(lower[pos]):
                pos += 1
                continue
            if pos > 0 and _is_word_char(lower[pos - 1]):
                pos += 1
                continue
            hit = None
            for surface in self._surfaces:
                end = pos + len(surface)
                if lower.startswith(surface, pos) and (end >= n or not _is_word_char(lower[end])):
                    hit = surface
                    break
            if hit is None:
                pos += 1
                continue
            etype, canonical = self.entries[hit]
            end = pos + len(hit)
            mentions.append(
                EntityMention(
                    entity_type=etype,
                    surface=text[pos:end],
                    start=pos,
                    end=end,
                    resolved=canonical,
                )
            )
            pos = end
        return mentions


def extract_entities(text: str, gazetteer: Gazetteer) -> list[EntityMention]:
    return gazetteer.extract(text)


_MARKUP = re.compile(r"<(?P<type>[a-z][a-z0-9_]*)>(?P<surface>.*?)</(?P=type)>", re.DOTALL)


def parse_markup(text: str, gazetteer: Gazetteer | None = None) -> tuple[str, list[EntityMention]]:
    """Strip ``<type>surface</type>`` markup, returning the plain text and
    the annotated mentions with offsets into it.

    When a gazetteer is given, resolved values are filled from it; unknown
    surfaces keep ``resolved=None``.
    """
    plain_parts: list[str] = []
    mentions: list[EntityMention] = []
    pos = 0
    plain_len = 0
    for m in _MARKUP.finditer(text):
        plain_parts.append(text[pos : m.start()])
        plain_len += m.start() - pos
        surface = m.group("surface")
        resolved = None
        if gazetteer is not None:
            hit = gazetteer.lookup(surface)
            if hit is not None:
                resolved = hit[1]
        mentions.append(
            EntityMention(
                entity_type=m.group("type"),
                surface=surface,
                start=plain_len,
                end=plain_len + len(surface),
                resolved=resolved,
            )
        )
        plain_parts.append(surface)
        plain_len += len(surface)
        pos = m.end()
    plain_parts.append(text[pos:])
    return "".join(plain_parts), mentions


def render_markup(text: str, mentions: list[EntityMention]) -> str:
    """Inverse of :func:`parse_markup` for mentions with valid offsets."""
    out: list[str] = []
    pos = 0
    for m in sorted(mentions, key=lambda m: m.start):
        out.append(text[pos : m.start])
        out.append(f"<{m.entity_type}>{text[m.start:m.end]}</{m.entity_type}>")
        pos = m.end
    out.append(text[pos:])
    return "".join(out)
