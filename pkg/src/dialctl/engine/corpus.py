"""Dialog corpus file format and teacher-forced compilation.

Format (UTF-8, versioned by the header line)::

    # dialctl corpus v1
    dialog 1
      S greeting
      U Call <name>Jason Williams</name> <phonetype>cellphone</phonetype>
      S announce_call
      S PlaceCall
    end

User turns carry inline entity markup; system turns name an action
template or API.  ``serialize_corpus(parse_corpus(text)) == text`` for
canonical files.

Compilation replays a dialog through the domain hooks, producing the
(feature, mask, target) triples used for supervised training, with the
recorded actions teacher-forced into the previous-action segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Domain
from .entities import parse_markup

HEADER = "# dialctl corpus v1"


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class CorpusTurn:
    speaker: str  # "U" or "S"
    text: str | None = None  # annotated user text
    action: str | None = None  # template name


@dataclass
class CorpusDialog:
    turns: list[CorpusTurn]

    def __len__(self) -> int:
        return len(self.turns)


def parse_corpus(text: str) -> list[CorpusDialog]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines or lines[0] != HEADER:
        raise CorpusError(f"line 1: expected header {HEADER!r}")
    dialogs: list[CorpusDialog] = []
    current: list[CorpusTurn] | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("dialog "):
            if current is not None:
                raise CorpusError(f"line {lineno}: dialog started inside a dialog")
            try:
                number = int(line[len("dialog "):])
            except ValueError:
                raise CorpusError(f"line {lineno}: bad dialog number") from None
            if number != len(dialogs) + 1:
                raise CorpusError(f"line {lineno}: expected dialog {len(dialogs) + 1}")
            current = []
        elif line == "end":
            if current is None:
                raise CorpusError(f"line {lineno}: 'end' outside a dialog")
            if not current:
                raise CorpusError(f"line {lineno}: empty dialog")
            dialogs.append(CorpusDialog(turns=current))
            current = None
        elif line.startswith("  U "):
            if current is None:
                raise CorpusError(f"line {lineno}: turn outside a dialog")
            current.append(CorpusTurn(speaker="U", text=line[4:]))
        elif line.startswith("  S "):
            if current is None:
                raise CorpusError(f"line {lineno}: turn outside a dialog")
            current.append(CorpusTurn(speaker="S", action=line[4:]))
        else:
            raise CorpusError(f"line {lineno}: unrecognized line {line!r}")
    if current is not None:
        raise CorpusError("unterminated dialog at end of file")
    return dialogs


def serialize_corpus(dialogs: list[CorpusDialog]) -> str:
    out = [HEADER]
    for i, dialog in enumerate(dialogs, start=1):
        out.append(f"dialog {i}")
        for turn in dialog.turns:
            if turn.speaker == "U":
                out.append(f"  U {turn.text}")
            else:
                out.append(f"  S {turn.action}")
        out.append("end")
    return "\n".join(out) + "\n"


def load_corpus(path: str | Path) -> list[CorpusDialog]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def save_corpus(dialogs: list[CorpusDialog], path: str | Path) -> None:
    Path(path).write_text(serialize_corpus(dialogs), encoding="utf-8")


def corpus_stats(dialogs: list[CorpusDialog]) -> dict[str, float]:
    lengths = [len(d) for d in dialogs]
    return {
        "dialogs": len(dialogs),
        "mean_turns": float(np.mean(lengths)) if lengths else 0.0,
        "min_turns": min(lengths) if lengths else 0,
        "max_turns": max(lengths) if lengths else 0,
    }


@dataclass
class CompiledDialog:
    """Teacher-forced training arrays for one dialog."""

    features: np.ndarray  # (T, D)
    masks: np.ndarray  # (T, A) bool
    targets: np.ndarray  # (T,) int


def compile_dialog(domain: Domain, dialog: CorpusDialog, index: int | None = None) -> CompiledDialog:
    from .features import assemble_features

    name_to_id = {t.name: t.id for t in domain.templates}
    store = domain.new_store()
    prev_action: int | None = None
    pending_api = np.zeros(domain.layout.n_api)
    mentions = []
    features, masks, targets = [], [], []
    label = f"dialog {index + 1}" if index is not None else "dialog"
    for pos, turn in enumerate(dialog.turns):
        if turn.speaker == "U":
            _, mentions = parse_markup(turn.text or "", domain.gazetteer)
            store = domain.entity_input(mentions, store)
            continue
        if turn.action not in name_to_id:
            raise CorpusError(f"{label} turn {pos + 1}: unknown action {turn.action!r}")
        target = name_to_id[turn.action]
        mask = np.asarray(domain.action_mask(store), dtype=bool)
        if not mask[target]:
            raise CorpusError(
                f"{label} turn {pos + 1}: action {turn.action!r} is masked at its own position"
            )
        x = assemble_features(
            domain.layout, mentions, domain.context_features(store), prev_action,
            pending_api, mask,
        )
        features.append(x)
        masks.append(mask)
        targets.append(target)
        prev_action = target
        mentions = []
        pending_api = np.zeros(domain.layout.n_api)
        template = domain.templates[target]
        if template.kind == "api":
            store, api_features = domain.api_call(template, store)
            pending_api = np.asarray(api_features, dtype=np.float64)
    return CompiledDialog(
        features=np.asarray(features),
        masks=np.asarray(masks),
        targets=np.asarray(targets, dtype=np.intp),
    )


def compile_corpus(domain: Domain, dialogs: list[CorpusDialog]) -> list[CompiledDialog]:
    return [compile_dialog(domain, d, i) for i, d in enumerate(dialogs)]
