"""The operational loop: entity extraction -> entity input -> feature
assembly -> recurrent policy -> mask -> selection -> entity output / API
dispatch.

API actions loop without user input, feeding any returned features into
the next feature vector.  Text statements (e.g. a call announcement) also
keep the floor; the loop yields back to the user only when the chosen text
action awaits a reply, and the dialog ends on a terminal action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from ..nn import ModelParams, ModelState, forward_step, initial_state, softmax
from .actions import ActionTemplate, mask_and_renormalize, select_action
from .entities import EntityMention, Gazetteer, render_markup
from .features import FeatureLayout, assemble_features


class DomainError(Exception):
    """A domain hook failed; the current turn is aborted."""


class Domain(Protocol):
    """Developer-provided hooks plus the metadata the engine needs."""

    templates: tuple[ActionTemplate, ...]
    layout: FeatureLayout
    gazetteer: Gazetteer

    def new_store(self) -> Any: ...

    def entity_input(self, mentions: list[EntityMention], store: Any) -> Any: ...

    def context_features(self, store: Any) -> np.ndarray: ...

    def action_mask(self, store: Any) -> np.ndarray: ...

    def entity_output(self, template: ActionTemplate, store: Any) -> str: ...

    def api_call(self, template: ActionTemplate, store: Any) -> tuple[Any, np.ndarray]: ...

    def outcome(self, store: Any) -> Any: ...


@dataclass
class DialogState:
    """Per-session memory: the domain store, the previous action, the
    recurrent state, and the count of user inputs so far."""

    store: Any
    model_state: ModelState
    prev_action: int | None = None
    turn_index: int = 0
    pending_api: np.ndarray | None = None


@dataclass
class TurnRecord:
    """One policy decision: the features it saw, the masked distribution it
    produced, and the action it chose."""

    user_text: str | None
    mentions: list[EntityMention]
    features: np.ndarray
    mask: np.ndarray
    dist: np.ndarray
    action: int
    behavior_prob: float
    rendered: str | None = None  # text actions: what the user saw


@dataclass
class ExecutedAction:
    template: ActionTemplate
    rendered: str | None
    api_features: np.ndarray | None


@dataclass
class Dialog:
    turns: list[TurnRecord]
    terminal: bool
    success: bool | None = None
    outcome: Any = None

    def __len__(self) -> int:
        return len(self.turns)


class Policy(Protocol):
    """Action selection given a feature vector; the neural policy is the
    default, a scripted one can stand in for tests and oracles."""

    def begin(self) -> Any: ...

    def step(
        self, state: Any, x: np.ndarray, mask: np.ndarray, mode: str, rng: np.random.Generator
    ) -> tuple[Any, int, np.ndarray]: ...


class NeuralPolicy:
    def __init__(self, params: ModelParams):
        self.params = params

    def begin(self) -> ModelState:
        return initial_state(self.params)

    def step(self, state, x, mask, mode, rng):
        new_state, logits = forward_step(self.params, state, x)
        dist = mask_and_renormalize(softmax(logits), mask)
        action = select_action(dist, mode, rng)
        return new_state, action, dist


class DialogEngine:
    """A single dialog session.  Strictly sequential; share the underlying
    model read-only across engines, never one engine across threads."""

    def __init__(
        self,
        domain: Domain,
        policy: Policy | ModelParams,
        mode: str = "greedy",
        rng: np.random.Generator | None = None,
        max_turns: int = 20,
    ):
        self.domain = domain
        self.policy = NeuralPolicy(policy) if isinstance(policy, ModelParams) else policy
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.max_turns = max_turns
        self.records: list[TurnRecord] = []
        self.closed = False
        self.truncated = False
        self.state = DialogState(
            store=domain.new_store(),
            model_state=self.policy.begin(),
            pending_api=np.zeros(domain.layout.n_api),
        )

    def start(self) -> list[ExecutedAction]:
        """The opening system move (normally the greeting), taken before
        any user input."""
        if self.records:
            raise DomainError("session already started")
        return self._system_move(user_text=None, mentions=[])

    def run_turn(self, user_text: str) -> list[ExecutedAction]:
        """Feed one user utterance and run the loop until the system hands
        the floor back or the dialog ends."""
        if self.closed:
            raise DomainError("session closed")
        if not self.records:
            # tolerate callers that skip start(): open the dialog first
            self.start()
            if self.closed:
                return []
        mentions = self.domain.gazetteer.extract(user_text)
        self.state.store = self.domain.entity_input(mentions, self.state.store)
        self.state.turn_index += 1
        return self._system_move(user_text=user_text, mentions=mentions)

    def run_annotated_turn(self, text: str, mentions: list[EntityMention]) -> list[ExecutedAction]:
        """Like :meth:`run_turn` but with pre-annotated mentions (corpus
        replay), bypassing the extractor."""
        if self.closed:
            raise DomainError("session closed")
        self.state.store = self.domain.entity_input(mentions, self.state.store)
        self.state.turn_index += 1
        return self._system_move(user_text=text, mentions=mentions)

    def _system_move(self, user_text: str | None, mentions: list[EntityMention]) -> list[ExecutedAction]:
        domain = self.domain
        executed: list[ExecutedAction] = []
        step_text = user_text
        while True:
            if len(self.records) >= self.max_turns:
                self.closed = True
                self.truncated = True
                break
            context = domain.context_features(self.state.store)
            mask = np.asarray(domain.action_mask(self.state.store), dtype=bool)
            x = assemble_features(
                domain.layout, mentions, context, self.state.prev_action,
                self.state.pending_api, mask,
            )
            new_state, action, dist = self.policy.step(
                self.state.model_state, x, mask, self.mode, self.rng
            )
            self.records.append(
                TurnRecord(
                    user_text=step_text,
                    mentions=mentions,
                    features=x,
                    mask=mask,
                    dist=dist,
                    action=action,
                    behavior_prob=float(dist[action]),
                )
            )
            self.state.model_state = new_state
            self.state.prev_action = action
            self.state.pending_api = np.zeros(domain.layout.n_api)
            mentions = []
            step_text = None

            template = domain.templates[action]
            if template.kind == "api":
                new_store, api_features = domain.api_call(template, self.state.store)
                self.state.store = new_store
                self.state.pending_api = np.asarray(api_features, dtype=np.float64)
                executed.append(ExecutedAction(template, None, self.state.pending_api.copy()))
                if template.terminal:
                    self.closed = True
                    break
                continue
            rendered = domain.entity_output(template, self.state.store)
            self.records[-1].rendered = rendered
            executed.append(ExecutedAction(template, rendered, None))
            if template.terminal:
                self.closed = True
                break
            if template.awaits_user:
                break
        return executed

    def transcript_markup(self) -> list[tuple[str, str]]:
        """The session as (speaker, line) pairs with user entities re-marked
        up, suitable for building a training dialog from a live session."""
        lines: list[tuple[str, str]] = []
        for rec in self.records:
            if rec.user_text is not None:
                lines.append(("U", render_markup(rec.user_text, rec.mentions)))
            lines.append(("S", self.domain.templates[rec.action].name))
        return lines


HANG_UP = object()


class UserAgent(Protocol):
    """Supplies an utterance per system prompt, or hangs up."""

    def respond(self, actions: list[ExecutedAction], rng: np.random.Generator) -> str | object: ...


def run_dialog(
    domain: Domain,
    policy: Policy | ModelParams,
    user: UserAgent,
    mode: str = "greedy",
    rng: np.random.Generator | None = None,
    max_turns: int = 20,
    judge: Callable[[Any], bool] | None = None,
) -> Dialog:
    """Run one complete dialog against a user agent.

    Ends on a terminal action, a user hang-up, or the max-turns guard.
    ``judge`` (outcome -> bool) sets the success verdict when given.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = DialogEngine(domain, policy, mode=mode, rng=rng, max_turns=max_turns)
    if max_turns > 0:
        actions = engine.start()
        while not engine.closed:
            reply = user.respond(actions, rng)
            if reply is HANG_UP:
                break
            actions = engine.run_turn(str(reply))
    outcome = domain.outcome(engine.state.store)
    dialog = Dialog(
        turns=engine.records,
        terminal=engine.closed and not engine.truncated,
        outcome=outcome,
    )
    if judge is not None:
        dialog.success = bool(judge(outcome))
    return dialog
