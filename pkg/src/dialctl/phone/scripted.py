"""Hand-written reference policy for the phone domain.

Reads only the engine's feature vector (plus a one-bit memory of whether a
question was already repeated), so it doubles as evidence that the feature
encoding carries enough signal for the learned policy.  Used as the oracle
for simulator and judge tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine.features import FeatureLayout

GREETING = 0
ASK_PHONETYPE = 1
ANNOUNCE = 2
PLACE_CALL = 3
SAVE_PHONETYPE = 4
OFFER_SOLE = 5
OFFER_OTHER = 6
SORRY_GOODBYE = 7
ASK_DISAMBIGUATE = 8
UNKNOWN_NAME = 9
ASK_REPEAT = 10
CONFIRM_NAME = 11
GOODBYE = 12
DIDNT_UNDERSTAND = 13


@dataclass(frozen=True)
class _Memory:
    reasked: bool = False


class ScriptedPhonePolicy:
    def __init__(self, layout: FeatureLayout):
        self.layout = layout

    def begin(self) -> _Memory:
        return _Memory()

    def step(self, state: _Memory, x: np.ndarray, mask: np.ndarray, mode: str, rng):
        action, new_state = self._decide(state, x)
        if not mask[action]:
            raise AssertionError(f"scripted policy chose masked action {action}")
        dist = np.zeros(self.layout.n_actions)
        dist[action] = 1.0
        return new_state, action, dist

    def _decide(self, state: _Memory, x: np.ndarray) -> tuple[int, _Memory]:
        lay = self.layout
        name_now, type_now, yesno_now = (v > 0.5 for v in x[lay.entity_slice])
        ctx = x[lay.context_slice]
        m0, m1, m_many = (v > 0.5 for v in ctx[0:3])
        t1 = ctx[4] > 0.5
        req_present, req_avail, committed, affirm, deny = (v > 0.5 for v in ctx[6:11])
        prev_onehot = x[lay.prev_action_slice]
        prev = int(np.argmax(prev_onehot))
        if prev == lay.n_actions:  # the "none" slot: dialog start
            return GREETING, state

        if prev == ANNOUNCE:
            return PLACE_CALL, state
        if prev == SAVE_PHONETYPE:
            return ANNOUNCE, state

        if yesno_now and prev == OFFER_SOLE:
            return (SAVE_PHONETYPE if affirm else SORRY_GOODBYE), _Memory()
        if yesno_now and prev == CONFIRM_NAME:
            if deny:
                return GOODBYE, _Memory()
            if committed:
                return ANNOUNCE, _Memory()
            return (SAVE_PHONETYPE if t1 else ASK_PHONETYPE), _Memory()
        if yesno_now and deny and prev == UNKNOWN_NAME:
            return GOODBYE, _Memory()

        if name_now:
            if m0:
                return UNKNOWN_NAME, _Memory()
            if m_many:
                return ASK_DISAMBIGUATE, _Memory()
            if prev == DIDNT_UNDERSTAND and not type_now and not committed:
                return CONFIRM_NAME, _Memory()
            return self._unique_contact_flow(ctx), _Memory()
        if type_now and m1:
            return self._unique_contact_flow(ctx), _Memory()

        # nothing usable in this utterance
        if prev == GREETING:
            return DIDNT_UNDERSTAND, state
        if prev == DIDNT_UNDERSTAND:
            return ASK_REPEAT, state
        if prev in (ASK_PHONETYPE, OFFER_SOLE, OFFER_OTHER):
            if state.reasked:
                return SORRY_GOODBYE, state
            return prev, _Memory(reasked=True)
        if prev == UNKNOWN_NAME:
            return GOODBYE, state
        return SORRY_GOODBYE, state

    @staticmethod
    def _unique_contact_flow(ctx: np.ndarray) -> int:
        t1 = ctx[4] > 0.5
        req_present, req_avail, committed = (v > 0.5 for v in ctx[6:9])
        if committed:
            return ANNOUNCE
        if req_present and not req_avail:
            return OFFER_SOLE if t1 else OFFER_OTHER
        if t1:
            return SAVE_PHONETYPE
        return ASK_PHONETYPE
