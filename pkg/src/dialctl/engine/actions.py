"""Action templates, mask application, and action selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaskError(Exception):
    pass


@dataclass(frozen=True)
class ActionTemplate:
    """A system action with entity values abstracted to slots.

    ``kind`` is ``"text"`` (rendered to the user) or ``"api"`` (invokes a
    domain call).  ``awaits_user`` marks text actions that hand the floor
    back to the user; statements such as a call announcement keep it, so
    the policy immediately chooses the next action.  ``terminal`` actions
    end the dialog.
    """

    id: int
    name: str
    kind: str
    pattern: str
    awaits_user: bool = True
    terminal: bool = False


def mask_and_renormalize(dist: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Clamp masked entries to exactly zero and linearly rescale the rest.

    If every allowed entry of ``dist`` is zero the result is uniform over
    the allowed actions.
    """
    dist = np.asarray(dist, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if dist.shape != mask.shape:
        raise ValueError(f"distribution shape {dist.shape} != mask shape {mask.shape}")
    n_allowed = int(mask.sum())
    if n_allowed == 0:
        raise MaskError("action mask permits no actions")
    out = np.where(mask, dist, 0.0)
    total = out.sum()
    if total <= 0.0:
        out = mask.astype(np.float64) / n_allowed
    else:
        out /= total
    return out


def select_action(dist: np.ndarray, mode: str, rng: np.random.Generator | None = None) -> int:
    """Pick an action id from a masked distribution.

    ``greedy`` takes the lowest-index argmax; ``sample`` draws by inverse
    CDF over the strictly positive entries, so a zero-probability action
    can never be returned.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if mode == "greedy":
        return int(np.argmax(dist))
    if mode != "sample":
        raise ValueError(f"unknown selection mode {mode!r}")
    if rng is None:
        raise ValueError("sample mode requires an rng")
    support = np.flatnonzero(dist > 0.0)
    if support.size == 0:
        raise ValueError("cannot sample from an all-zero distribution")
    cum = np.cumsum(dist[support])
    r = rng.random() * cum[-1]
    return int(support[min(np.searchsorted(cum, r, side="right"), support.size - 1)])
