"""Feature vector assembly.

Every policy input is a fixed-width vector with five ordered segments:

    [ entity-type flags | domain context | previous-action one-hot (A+1,
      last slot = "none") | API-returned features | action-mask bits (A) ]

The mask is part of the input so the policy knows which actions are
currently available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entities import EntityMention


@dataclass(frozen=True)
class FeatureLayout:
    entity_types: tuple[str, ...]
    n_context: int
    n_actions: int
    n_api: int

    @property
    def dim(self) -> int:
        return len(self.entity_types) + self.n_context + (self.n_actions + 1) + self.n_api + self.n_actions

    @property
    def entity_slice(self) -> slice:
        return slice(0, len(self.entity_types))

    @property
    def context_slice(self) -> slice:
        base = len(self.entity_types)
        return slice(base, base + self.n_context)

    @property
    def prev_action_slice(self) -> slice:
        base = len(self.entity_types) + self.n_context
        return slice(base, base + self.n_actions + 1)

    @property
    def api_slice(self) -> slice:
        base = len(self.entity_types) + self.n_context + self.n_actions + 1
        return slice(base, base + self.n_api)

    @property
    def mask_slice(self) -> slice:
        base = len(self.entity_types) + self.n_context + self.n_actions + 1 + self.n_api
        return slice(base, base + self.n_actions)


def assemble_features(
    layout: FeatureLayout,
    mentions: list[EntityMention],
    context: np.ndarray,
    prev_action: int | None,
    api_features: np.ndarray,
    mask: np.ndarray,
) -> np.ndarray:
    context = np.asarray(context, dtype=np.float64)
    api_features = np.asarray(api_features, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if context.shape != (layout.n_context,):
        raise ValueError(f"context length {context.shape} != declared {layout.n_context}")
    if api_features.shape != (layout.n_api,):
        raise ValueError(f"api feature length {api_features.shape} != declared {layout.n_api}")
    if mask.shape != (layout.n_actions,):
        raise ValueError(f"mask length {mask.shape} != declared {layout.n_actions}")
    x = np.zeros(layout.dim)
    seen = {m.entity_type for m in mentions}
    for idx, etype in enumerate(layout.entity_types):
        if etype in seen:
            x[idx] = 1.0
    x[layout.context_slice] = context
    prev_slot = layout.n_actions if prev_action is None else prev_action
    x[layout.prev_action_slice.start + prev_slot] = 1.0
    x[layout.api_slice] = api_features
    x[layout.mask_slice] = mask.astype(np.float64)
    return x
