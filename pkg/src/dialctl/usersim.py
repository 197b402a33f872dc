"""Stochastic simulated user for the phone domain.

Samples a goal (possibly out of book, possibly wanting an unavailable
phone type), answers or ignores system prompts, volunteers information,
and can give up.  Also judges task success, which is the RL reward.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine.core import HANG_UP, Dialog, ExecutedAction, run_dialog
from .phone.domain import PHONETYPES, AddressBook, AddressBookEntry, PhoneDomain, PlacedCall
from .phone import scripted as T  # template id constants

TYPE_SURFACES = {
    "mobile": ("mobile", "cell", "cellphone"),
    "work": ("work", "office"),
    "home": ("home",),
}

FILLERS = ("Hmm", "Er hold on", "Let me see", "One moment")


@dataclass(frozen=True)
class UserGoal:
    target_name: str  # surface said when out of book, else the canonical name
    canonical_name: str | None  # None when the person is not in the book
    target_phonetype: str


@dataclass(frozen=True)
class SimParams:
    """Behavior probabilities of the simulated user.

    Defaults are tuned so that the corpus-trained policy scores well below
    the cooperative ceiling, leaving the headroom that reinforcement
    learning is supposed to claim.  A user whose goal was heard and then
    ignored loses patience: incoherent system moves multiply the per-turn
    give-up probability by ``ANNOYED_GIVE_UP_FACTOR``.
    """

    p_use_nickname: float = 0.5
    p_omit_phonetype: float = 0.98
    p_extra_info: float = 0.05
    p_ignore_question: float = 0.15
    p_give_up_per_turn: float = 0.10
    p_oov_name: float = 0.10
    p_unavailable_type: float = 0.45
    p_accept_offer: float = 0.65
    p_restate_goal: float = 0.3
    p_full_name_on_disambig: float = 0.8

    @classmethod
    def benign(cls) -> "SimParams":
        """No adversarial behavior: every goal is satisfiable and the user
        cooperates, so a correct policy completes every dialog."""
        return cls(
            p_ignore_question=0.0,
            p_give_up_per_turn=0.0,
            p_oov_name=0.0,
            p_unavailable_type=0.0,
            p_full_name_on_disambig=1.0,
        )

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, values: dict[str, float]) -> "SimParams":
        return replace(cls(), **{k: float(v) for k, v in values.items()})


def sample_goal(book: AddressBook, params: SimParams, rng: np.random.Generator) -> UserGoal:
    if book.out_of_book_names and rng.random() < params.p_oov_name:
        surface = book.out_of_book_names[rng.integers(len(book.out_of_book_names))]
        ptype = PHONETYPES[rng.integers(len(PHONETYPES))]
        return UserGoal(target_name=surface, canonical_name=None, target_phonetype=ptype)
    entry = book.entries[rng.integers(len(book.entries))]
    missing = tuple(t for t in PHONETYPES if t not in entry.phones)
    if missing and rng.random() < params.p_unavailable_type:
        ptype = missing[rng.integers(len(missing))]
    else:
        avail = entry.available_types()
        ptype = avail[rng.integers(len(avail))]
    return UserGoal(
        target_name=entry.canonical_name,
        canonical_name=entry.canonical_name,
        target_phonetype=ptype,
    )


def judge(outcome: PlacedCall | None, goal: UserGoal, book: AddressBook) -> bool:
    """Success iff a call was placed to the goal contact with the goal type,
    or, when the goal type is unavailable for that contact, with a type the
    user explicitly requested or accepted."""
    if outcome is None or goal.canonical_name is None:
        return False
    if outcome.canonical_name != goal.canonical_name:
        return False
    if outcome.phonetype == goal.target_phonetype:
        return True
    entry = next(e for e in book.entries if e.canonical_name == goal.canonical_name)
    if goal.target_phonetype not in entry.phones:
        return outcome.via in ("requested", "affirmed_offer")
    return False


ANNOYED_GIVE_UP_FACTOR = 10.0


class SimulatedUser:
    """One dialog's worth of user behavior; response rules are keyed on the
    system's template id, never its wording."""

    KNOWN_TEMPLATES = frozenset(range(14))
    AWAITING = frozenset(
        {T.GREETING, T.ASK_PHONETYPE, T.OFFER_SOLE, T.OFFER_OTHER, T.ASK_DISAMBIGUATE,
         T.UNKNOWN_NAME, T.ASK_REPEAT, T.CONFIRM_NAME, T.DIDNT_UNDERSTAND}
    )

    def __init__(self, book: AddressBook, params: SimParams, goal: UserGoal):
        self.book = book
        self.params = params
        self.goal = goal
        self._entry: AddressBookEntry | None = None
        if goal.canonical_name is not None:
            self._entry = next(
                e for e in book.entries if e.canonical_name == goal.canonical_name
            )
        self._last_surface: str | None = None
        self._said_goal = False
        self._ignored_last = False  # our own previous reply carried no information
        self._said_full_name = False
        self._answered_type = False  # answered the latest phone-type question

    def _is_annoying(self, template_id: int) -> bool:
        """A system move that ignores what the user said (or asks them to
        repeat before they said anything).  A patient policy never triggers
        these; a flailing one does constantly."""
        if self._ignored_last:
            return False  # our own fault, any re-prompt is fair
        if template_id == T.GREETING:
            return self._said_goal
        if template_id in (T.DIDNT_UNDERSTAND, T.ASK_REPEAT):
            return True  # either nothing was said yet, or the goal was clear
        if template_id == T.UNKNOWN_NAME:
            # we said a name the directory resolves; OOV goals are fair game
            return self._said_goal and self._entry is not None
        if template_id == T.ASK_DISAMBIGUATE:
            return self._said_full_name
        if template_id == T.ASK_PHONETYPE:
            return self._answered_type
        return False

    # -- surface choices --------------------------------------------------

    def _name_surface(self, rng: np.random.Generator) -> str:
        if self._entry is None:
            surface = self.goal.target_name
        elif rng.random() < self.params.p_use_nickname:
            informal = self._entry.nicknames + (self._entry.first_name,)
            surface = informal[rng.integers(len(informal))]
        else:
            surface = self._entry.canonical_name
        self._last_surface = surface
        self._said_full_name = (
            self._entry is not None and surface == self._entry.canonical_name
        )
        return surface

    def _type_surface(self, rng: np.random.Generator) -> str:
        surfaces = TYPE_SURFACES[self.goal.target_phonetype]
        return surfaces[rng.integers(len(surfaces))]

    def _goal_statement(self, rng: np.random.Generator) -> str:
        name = self._name_surface(rng)
        self._said_goal = True
        self._ignored_last = False
        if rng.random() < self.params.p_omit_phonetype:
            self._answered_type = False
            return f"Call {name}"
        self._answered_type = True
        return f"Call {name} on {self._type_surface(rng)}"

    def _filler(self, rng: np.random.Generator) -> str:
        self._ignored_last = True
        return FILLERS[rng.integers(len(FILLERS))]

    # -- main entry point ---------------------------------------------------

    def respond(self, actions: list[ExecutedAction], rng: np.random.Generator):
        if not actions:
            return HANG_UP
        template = actions[-1].template
        if template.id not in self.KNOWN_TEMPLATES:
            raise ValueError(f"simulated user cannot answer template id {template.id}")
        if template.id not in self.AWAITING:
            raise ValueError(f"template {template.name} does not await a user reply")
        give_up = self.params.p_give_up_per_turn
        if self._is_annoying(template.id):
            give_up = min(1.0, give_up * ANNOYED_GIVE_UP_FACTOR)
        if rng.random() < give_up:
            return HANG_UP
        rendered = actions[-1].rendered or ""

        if template.id in (T.GREETING, T.DIDNT_UNDERSTAND, T.ASK_REPEAT):
            if self._said_goal and rng.random() >= self.params.p_restate_goal:
                return HANG_UP
            return self._goal_statement(rng)

        if template.id == T.ASK_PHONETYPE:
            if rng.random() < self.params.p_ignore_question:
                return self._filler(rng)
            self._ignored_last = False
            self._answered_type = True
            answer = self._type_surface(rng)
            if rng.random() < self.params.p_extra_info:
                return f"{answer} for {self._name_surface(rng)}"
            return answer

        if template.id in (T.OFFER_SOLE, T.OFFER_OTHER):
            if rng.random() < self.params.p_ignore_question:
                return self._filler(rng)
            self._ignored_last = False
            self._answered_type = True
            if template.id == T.OFFER_SOLE:
                if self._entry is None:
                    return "no"
                sole = self._entry.available_types()[0]
                if sole == self.goal.target_phonetype:
                    return "yes"
                return "yes" if rng.random() < self.params.p_accept_offer else "no"
            if self._entry is None:
                return HANG_UP
            avail = self._entry.available_types()
            if self.goal.target_phonetype in avail:
                return self._type_surface(rng)
            if rng.random() < self.params.p_accept_offer:
                return avail[rng.integers(len(avail))]
            return HANG_UP

        if template.id == T.ASK_DISAMBIGUATE:
            if rng.random() < self.params.p_ignore_question:
                return self._filler(rng)
            self._ignored_last = False
            if self._entry is None:
                return self.goal.target_name
            if rng.random() < self.params.p_full_name_on_disambig:
                name = self._entry.canonical_name
                self._last_surface = name
                self._said_full_name = True
                if rng.random() < self.params.p_extra_info:
                    return f"{name} on {self._type_surface(rng)}"
                return name
            return self._last_surface or self._name_surface(rng)

        if template.id == T.UNKNOWN_NAME:
            if rng.random() < self.params.p_restate_goal:
                return self._goal_statement(rng)
            return HANG_UP

        # confirm_name: honest check against the goal contact
        self._ignored_last = False
        if self._entry is not None and self._entry.canonical_name in rendered:
            return "yes"
        return "no"


def run_sim_dialog(
    domain: PhoneDomain,
    policy,
    params: SimParams,
    rng: np.random.Generator,
    mode: str = "greedy",
    max_turns: int = 20,
) -> tuple[Dialog, UserGoal]:
    """One full dialog against a freshly sampled goal; the dialog's success
    verdict comes from :func:`judge`."""
    goal = sample_goal(domain.book, params, rng)
    user = SimulatedUser(domain.book, params, goal)
    dialog = run_dialog(
        domain,
        policy,
        user,
        mode=mode,
        rng=rng,
        max_turns=max_turns,
        judge=lambda outcome: judge(outcome, goal, domain.book),
    )
    return dialog, goal
