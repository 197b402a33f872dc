"""Address-book dialing domain: entities, store, mask rules, the 14 action
templates, and the two API actions (placing a call, committing to the sole
available phone type)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..engine.actions import ActionTemplate
from ..engine.core import DomainError
from ..engine.corpus import CorpusDialog, parse_corpus
from ..engine.entities import EntityMention, Gazetteer
from ..engine.features import FeatureLayout

PHONETYPES = ("mobile", "work", "home")

PHONETYPE_SYNONYMS = {
    "mobile": "mobile",
    "cell": "mobile",
    "cellphone": "mobile",
    "cell phone": "mobile",
    "work": "work",
    "office": "work",
    "home": "home",
}

YES_SURFACES = ("yes", "yeah", "yep", "sure")
NO_SURFACES = ("no", "nope", "nah")

# Template ids are the policy's output alphabet; the order is fixed.
TEMPLATES: tuple[ActionTemplate, ...] = (
    ActionTemplate(0, "greeting", "text", "How can I help you?"),
    ActionTemplate(1, "ask_phonetype", "text", "Which type of phone: <phonetypesavail>?"),
    ActionTemplate(
        2, "announce_call", "text", "Calling <canonicalname>, <canonicalphonetype>",
        awaits_user=False,
    ),
    ActionTemplate(3, "PlaceCall", "api", "PlaceCall", awaits_user=False, terminal=True),
    ActionTemplate(4, "SavePhonetypeavail", "api", "SavePhonetypeavail", awaits_user=False),
    ActionTemplate(
        5, "offer_sole_type", "text",
        "Sorry, I don't have a <phonetype> number for <canonicalname>. "
        "I only have a <phonetypesavail> phone. Do you want to call that number?",
    ),
    ActionTemplate(
        6, "offer_other_types", "text",
        "Sorry, I don't have a <phonetype> number for <canonicalname>. "
        "I have <phonetypesavail>. Which would you like?",
    ),
    ActionTemplate(7, "sorry_goodbye", "text", "Oh, sorry about that. Goodbye.", terminal=True),
    ActionTemplate(
        8, "ask_disambiguate", "text",
        "There's more than one person named <name>. Can you say their full name?",
    ),
    ActionTemplate(
        9, "unknown_name", "text",
        "Sorry, I don't know of any names called <name>. Can you try again?",
    ),
    ActionTemplate(10, "ask_repeat", "text", "Sorry, could you say that again?"),
    ActionTemplate(11, "confirm_name", "text", "Did you want to call <canonicalname>?"),
    ActionTemplate(12, "goodbye", "text", "Goodbye.", terminal=True),
    ActionTemplate(13, "didnt_understand", "text", "Sorry, I didn't understand."),
)

N_ACTIONS = len(TEMPLATES)

# Context feature layout (one segment of the policy input):
#   match count {0,1,>1} | phone-type count {0,1,>1} | requested-type
#   present | requested-type available | type committed | user affirmed |
#   user denied
N_CONTEXT = 11
N_API_FEATURES = 2  # [call placed, phone type committed]


@dataclass(frozen=True)
class AddressBookEntry:
    canonical_name: str
    nicknames: tuple[str, ...]
    phones: dict[str, str]  # phonetype -> number

    @property
    def first_name(self) -> str:
        return self.canonical_name.split()[0]

    def available_types(self) -> tuple[str, ...]:
        return tuple(t for t in PHONETYPES if t in self.phones)


class AddressBook:
    def __init__(self, entries: list[AddressBookEntry], out_of_book_names: list[str]):
        if not entries:
            raise ValueError("address book needs at least one contact")
        for e in entries:
            if not e.phones:
                raise ValueError(f"{e.canonical_name} has no phone numbers")
            for t in e.phones:
                if t not in PHONETYPES:
                    raise ValueError(f"{e.canonical_name}: unknown phone type {t!r}")
        self.entries = tuple(entries)
        self.out_of_book_names = tuple(out_of_book_names)

    def lookup(self, surface: str) -> tuple[AddressBookEntry, ...]:
        s = surface.lower()
        return tuple(
            e
            for e in self.entries
            if s == e.canonical_name.lower()
            or s == e.first_name.lower()
            or s in (n.lower() for n in e.nicknames)
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "AddressBook":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            AddressBookEntry(
                canonical_name=c["name"],
                nicknames=tuple(c.get("nicknames", [])),
                phones=dict(c["phones"]),
            )
            for c in data["contacts"]
        ]
        return cls(entries, list(data.get("out_of_book_names", [])))

    def name_surfaces(self) -> list[str]:
        surfaces: list[str] = []
        for e in self.entries:
            surfaces.append(e.canonical_name)
            surfaces.append(e.first_name)
            surfaces.extend(e.nicknames)
        surfaces.extend(self.out_of_book_names)
        return surfaces


@dataclass(frozen=True)
class PlacedCall:
    canonical_name: str
    phonetype: str
    number: str
    via: str  # "requested" | "affirmed_offer" | "auto_single"


@dataclass
class PhoneStore:
    """Per-session entity memory.  Values are retained until replaced by a
    newer mention (last write wins)."""

    name_surface: str | None = None
    matched: tuple[AddressBookEntry, ...] = ()
    requested_type: str | None = None
    requested_surface: str | None = None
    api_committed: str | None = None
    last_yesno: str | None = None
    outcome: PlacedCall | None = None

    @property
    def unique(self) -> AddressBookEntry | None:
        return self.matched[0] if len(self.matched) == 1 else None

    @property
    def committed_type(self) -> str | None:
        entry = self.unique
        if entry is None:
            return None
        if self.requested_type is not None and self.requested_type in entry.phones:
            return self.requested_type
        return self.api_committed


def _join_types(types: tuple[str, ...]) -> str:
    if len(types) == 1:
        return types[0]
    return ", ".join(types[:-1]) + " or " + types[-1]


class PhoneDomain:
    """Domain hooks for the engine plus the packaged fixtures."""

    def __init__(self, book: AddressBook):
        self.book = book
        self.templates = TEMPLATES
        entries: dict[str, tuple[str, str]] = {}
        for surface in book.name_surfaces():
            entries[surface] = ("name", surface)
        for surface, canonical in PHONETYPE_SYNONYMS.items():
            entries[surface] = ("phonetype", canonical)
        for surface in YES_SURFACES:
            entries[surface] = ("yesno", "yes")
        for surface in NO_SURFACES:
            entries[surface] = ("yesno", "no")
        self.gazetteer = Gazetteer(entries)
        self.layout = FeatureLayout(
            entity_types=("name", "phonetype", "yesno"),
            n_context=N_CONTEXT,
            n_actions=N_ACTIONS,
            n_api=N_API_FEATURES,
        )

    # -- hooks -----------------------------------------------------------

    def new_store(self) -> PhoneStore:
        return PhoneStore()

    def entity_input(self, mentions: list[EntityMention], store: PhoneStore) -> PhoneStore:
        store = replace(store)
        for m in mentions:
            if m.entity_type == "name":
                store.name_surface = m.surface
                store.matched = self.book.lookup(m.surface)
                store.api_committed = None
            elif m.entity_type == "phonetype":
                canonical = m.resolved or PHONETYPE_SYNONYMS.get(m.surface.lower())
                if canonical is None:
                    continue
                store.requested_type = canonical
                store.requested_surface = m.surface
            elif m.entity_type == "yesno":
                value = m.resolved or ("yes" if m.surface.lower() in YES_SURFACES else "no")
                store.last_yesno = value
        return store

    def context_features(self, store: PhoneStore) -> np.ndarray:
        ctx = np.zeros(N_CONTEXT)
        if store.name_surface is not None:
            n = len(store.matched)
            ctx[min(n, 2)] = 1.0
        entry = store.unique
        if entry is not None:
            n_types = len(entry.phones)
            ctx[3 + min(n_types, 2)] = 1.0
        if store.requested_type is not None:
            ctx[6] = 1.0
            if entry is not None and store.requested_type in entry.phones:
                ctx[7] = 1.0
        if store.committed_type is not None:
            ctx[8] = 1.0
        if store.last_yesno == "yes":
            ctx[9] = 1.0
        elif store.last_yesno == "no":
            ctx[10] = 1.0
        return ctx

    def action_mask(self, store: PhoneStore) -> np.ndarray:
        """An action is allowed iff every entity its pattern needs can be
        populated from the store; actions without slots are always on."""
        mask = np.zeros(N_ACTIONS, dtype=bool)
        entry = store.unique
        committed = store.committed_type
        mask[0] = True  # greeting
        mask[1] = entry is not None and len(entry.phones) >= 1
        mask[2] = entry is not None and committed is not None
        mask[3] = entry is not None and committed is not None
        mask[4] = entry is not None and len(entry.phones) == 1 and committed is None
        has_request = store.requested_surface is not None
        mask[5] = entry is not None and has_request
        mask[6] = entry is not None and has_request
        mask[7] = True  # sorry_goodbye
        mask[8] = store.name_surface is not None
        mask[9] = store.name_surface is not None
        mask[10] = True  # ask_repeat
        mask[11] = entry is not None
        mask[12] = True  # goodbye
        mask[13] = True  # didnt_understand
        return mask

    def entity_output(self, template: ActionTemplate, store: PhoneStore) -> str:
        if template.kind != "text":
            raise DomainError(f"{template.name} is not a text action")
        text = template.pattern
        entry = store.unique
        if "<canonicalname>" in text:
            if entry is None:
                raise DomainError(f"{template.name}: no unique contact to name")
            text = text.replace("<canonicalname>", entry.canonical_name)
        if "<canonicalphonetype>" in text:
            if store.committed_type is None:
                raise DomainError(f"{template.name}: no committed phone type")
            text = text.replace("<canonicalphonetype>", store.committed_type)
        if "<phonetypesavail>" in text:
            if entry is None:
                raise DomainError(f"{template.name}: no unique contact for available types")
            text = text.replace("<phonetypesavail>", _join_types(entry.available_types()))
        if "<phonetype>" in text:
            if store.requested_surface is None:
                raise DomainError(f"{template.name}: no requested phone type")
            text = text.replace("<phonetype>", store.requested_surface)
        if "<name>" in text:
            if store.name_surface is None:
                raise DomainError(f"{template.name}: no recognized name")
            text = text.replace("<name>", store.name_surface)
        return text

    def api_call(self, template: ActionTemplate, store: PhoneStore) -> tuple[PhoneStore, np.ndarray]:
        if template.name == "PlaceCall":
            entry = store.unique
            committed = store.committed_type
            if entry is None or committed is None:
                raise DomainError("PlaceCall invoked without a unique contact and committed type")
            via = "requested"
            if committed != store.requested_type:
                via = (
                    "affirmed_offer"
                    if store.last_yesno == "yes" and store.requested_type is not None
                    else "auto_single"
                )
            store = replace(
                store,
                outcome=PlacedCall(
                    canonical_name=entry.canonical_name,
                    phonetype=committed,
                    number=entry.phones[committed],
                    via=via,
                ),
            )
            return store, np.array([1.0, 1.0])
        if template.name == "SavePhonetypeavail":
            entry = store.unique
            if entry is None:
                raise DomainError("SavePhonetypeavail invoked without a unique contact")
            types = entry.available_types()
            if len(types) != 1:
                raise DomainError("SavePhonetypeavail requires exactly one available phone type")
            if store.committed_type is not None:
                raise DomainError("phone type already committed")
            store = replace(store, api_committed=types[0])
            return store, np.array([0.0, 1.0])
        raise DomainError(f"unknown API action {template.name!r}")

    def outcome(self, store: PhoneStore) -> PlacedCall | None:
        return store.outcome


def _data_path(name: str) -> Path:
    return Path(str(resources.files("dialctl.phone").joinpath("data", name)))


def default_address_book() -> AddressBook:
    return AddressBook.from_json(_data_path("address_book.json"))


def default_domain() -> PhoneDomain:
    return PhoneDomain(default_address_book())


def default_corpus() -> list[CorpusDialog]:
    return parse_corpus(_data_path("corpus.txt").read_text(encoding="utf-8"))
