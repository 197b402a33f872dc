"""Policy-gradient optimization against the simulated user.

Each dialog yields one gradient step along ``(sum_t grad log pi(a_t)) *
(R - b)``, applied with AdaDelta in the ascent direction.  ``b`` is a
weighted-importance-sampling estimate of the average return over the last
100 dialogs.  A small constant added to the action probabilities keeps the
log defined under the action mask, and after every step the policy is
repaired with supervised learning if it no longer reconstructs the
training corpus.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .engine.core import Dialog, Domain
from .engine.corpus import CompiledDialog, CorpusDialog
from .nn import (
    AdaDeltaState,
    ModelParams,
    adadelta_apply,
    backward_sequence,
    forward_sequence,
    forward_step,
    init_adadelta,
    init_model,
    initial_state,
)
from .sl import MAX_EPOCHS, _ensure_compiled, masked_probs, reconstructs, train_sl
from .usersim import SimParams, run_sim_dialog

GAMMA = 0.95
MASK_EPSILON = 1e-8
WIS_CLIP = 10.0
BASELINE_WINDOW = 100


def compute_return(reward: float, n_steps: int, gamma: float = GAMMA) -> float:
    """Terminal-only reward discounted by dialog length: R = gamma^(T-1) * r."""
    if n_steps < 1:
        raise ValueError("a dialog must contain at least one decision")
    return float(gamma ** (n_steps - 1) * reward)


@dataclass(eq=False)
class Episode:
    features: np.ndarray  # (T, D)
    masks: np.ndarray  # (T, A) bool
    actions: np.ndarray  # (T,)
    step_probs: np.ndarray  # (T,) behavior probability of each chosen action
    reward: float
    ret: float

    @property
    def behavior_prob(self) -> float:
        return float(np.prod(self.step_probs))


def episode_from_dialog(dialog: Dialog, gamma: float = GAMMA) -> Episode:
    if not dialog.turns:
        raise ValueError("cannot build an episode from an empty dialog")
    reward = 1.0 if dialog.success else 0.0
    return Episode(
        features=np.stack([t.features for t in dialog.turns]),
        masks=np.stack([t.mask for t in dialog.turns]),
        actions=np.array([t.action for t in dialog.turns], dtype=np.intp),
        step_probs=np.array([t.behavior_prob for t in dialog.turns]),
        reward=reward,
        ret=compute_return(reward, len(dialog.turns), gamma),
    )


class BaselineBuffer:
    """Ring buffer of the most recent episodes (capacity 100, FIFO)."""

    def __init__(self, capacity: int = BASELINE_WINDOW):
        self.episodes: deque[Episode] = deque(maxlen=capacity)

    def add(self, episode: Episode) -> None:
        self.episodes.append(episode)

    def __len__(self) -> int:
        return len(self.episodes)


def estimate_baseline(
    buffer: BaselineBuffer, params: ModelParams, clip: float = WIS_CLIP
) -> float:
    """b = sum(w_i R_i) / sum(w_i) with w_i the product of per-step
    probability ratios current/behavior, clipped to [0, clip].

    Stored features and masks are replayed through the current model in one
    batch across episodes.
    """
    episodes = list(buffer.episodes)
    if not episodes:
        return 0.0
    n = len(episodes)
    lengths = np.array([len(e.actions) for e in episodes])
    t_max = int(lengths.max())
    x = np.zeros((n, t_max, params.input_dim))
    masks = np.zeros((n, t_max, params.n_actions), dtype=bool)
    masks[:, :, 0] = True
    for i, e in enumerate(episodes):
        x[i, : lengths[i]] = e.features
        masks[i, : lengths[i]] = e.masks
    state = initial_state(params, batch=n)
    ratios = np.ones(n)
    for t in range(t_max):
        state, logits = forward_step(params, state, x[:, t, :])
        p = masked_probs(logits, masks[:, t, :])
        for i, e in enumerate(episodes):
            if t < lengths[i]:
                cur = p[i, e.actions[t]]
                ratios[i] *= cur / max(e.step_probs[t], 1e-300)
    weights = np.clip(ratios, 0.0, clip)
    total = weights.sum()
    if total <= 0.0:
        return 0.0
    returns = np.array([e.ret for e in episodes])
    return float(np.sum(weights * returns) / total)


def _log_prob_grads(
    params: ModelParams, episode: Episode, scale: float, eps: float = MASK_EPSILON
) -> dict[str, np.ndarray]:
    """Gradient of scale * sum_t log(masked_probs + eps)[a_t].

    Masked logits receive exactly zero gradient; the epsilon bounds the
    log's slope so zero-probability actions cannot produce NaN or Inf.
    """
    logits = forward_sequence(params, episode.features)
    p = masked_probs(logits, episode.masks)
    steps = np.arange(len(episode.actions))
    chosen = p[steps, episode.actions]
    coeff = scale * chosen / (chosen + eps)
    dlogits = -p * coeff[:, None]
    dlogits[steps, episode.actions] += coeff
    return backward_sequence(params, episode.features, dlogits)


def policy_gradient_update(
    params: ModelParams,
    opt: AdaDeltaState,
    episode: Episode,
    baseline: float,
    alpha: float = 1.0,
    eps: float = MASK_EPSILON,
) -> tuple[ModelParams, AdaDeltaState]:
    """One ascent step on alpha * (R - b) * sum_t log pi(a_t); a non-finite
    gradient aborts the update and keeps the model."""
    grads = _log_prob_grads(params, episode, scale=alpha * (episode.ret - baseline), eps=eps)
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        return params, opt
    return adadelta_apply(opt, params, grads, direction="ascend")


@dataclass
class GuardReport:
    repaired: bool = False
    sl_epochs: int = 0
    rolled_back: bool = False


def guarded_update(
    params: ModelParams,
    opt: AdaDeltaState,
    episode: Episode,
    domain: Domain,
    corpus: list[CorpusDialog] | list[CompiledDialog],
    baseline: float,
    alpha: float = 1.0,
    sl_max_epochs: int = MAX_EPOCHS,
) -> tuple[ModelParams, AdaDeltaState, GuardReport]:
    """Policy-gradient step followed by the reconstruction guard: if the
    updated policy no longer reconstructs the corpus, supervised learning
    repairs it.  If repair fails the update is rolled back."""
    compiled = _ensure_compiled(domain, corpus)
    new_params, new_opt = policy_gradient_update(params, opt, episode, baseline, alpha=alpha)
    report = GuardReport()
    if not compiled:
        return new_params, new_opt, report
    if reconstructs(new_params, domain, compiled):
        return new_params, new_opt, report
    result = train_sl(
        new_params, domain, compiled, max_epochs=sl_max_epochs, opt=new_opt
    )
    if not result.reconstructed:
        return params, opt, GuardReport(repaired=False, sl_epochs=result.epochs, rolled_back=True)
    return result.params, result.opt, GuardReport(repaired=True, sl_epochs=result.epochs)


def evaluate_policy(
    domain: Domain,
    params: ModelParams,
    sim_params: SimParams,
    n_dialogs: int,
    seed,
    max_turns: int = 20,
) -> float:
    """Greedy task completion rate over freshly sampled goals; bitwise
    reproducible for a given seed and frozen model."""
    rng = np.random.default_rng(seed)
    wins = 0
    for _ in range(n_dialogs):
        dialog, _ = run_sim_dialog(domain, params, sim_params, rng, mode="greedy", max_turns=max_turns)
        wins += 1 if dialog.success else 0
    return wins / n_dialogs if n_dialogs else 0.0


@dataclass
class RlRunResult:
    n_sl: int
    checkpoints: list[int]  # RL dialog counts, starting at 0 (post-SL)
    tcr: np.ndarray  # (n_runs, n_checkpoints)
    repairs: int = 0

    @property
    def mean(self) -> np.ndarray:
        return self.tcr.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.tcr.std(axis=0)


def rl_experiment(
    domain: Domain,
    corpus: list[CorpusDialog],
    sim_params: SimParams,
    n_sl: int,
    n_rl_dialogs: int,
    n_runs: int = 10,
    eval_every: int = 10,
    eval_dialogs: int = 500,
    seed: int = 0,
    arch: str = "lstm",
    hidden: int = 32,
    alpha: float = 1.0,
    gamma: float = GAMMA,
    max_turns: int = 20,
    sl_max_epochs: int = MAX_EPOCHS,
    assert_guard: bool = False,
    progress=None,
) -> RlRunResult:
    """The full protocol: per run, pretrain on ``n_sl`` randomly sampled
    dialogs, then alternate sampled-mode RL dialogs and guarded updates,
    freezing the policy at every checkpoint for a greedy evaluation.

    Every run evaluates against the same goal sequence (per run seed), so
    an alpha=0 run produces a perfectly flat curve.
    """
    d, a = domain.layout.dim, domain.layout.n_actions
    checkpoints = [0] + [k for k in range(eval_every, n_rl_dialogs + 1, eval_every)]
    tcr = np.zeros((n_runs, len(checkpoints)))
    repairs = 0
    for run in range(n_runs):
        rng = np.random.default_rng([seed, run, 0])
        params = init_model(arch, d, hidden, a, seed=int(rng.integers(2**31)))
        opt = init_adadelta(params)
        if n_sl > 0:
            picks = rng.choice(len(corpus), size=n_sl, replace=False)
            subset = [corpus[i] for i in sorted(picks)]
        else:
            subset = []
        compiled = _ensure_compiled(domain, subset)
        if compiled:
            result = train_sl(params, domain, compiled, opt=opt)
            params, opt = result.params, result.opt
        buffer = BaselineBuffer()
        eval_seed = [seed, run, 1]
        col = 0
        tcr[run, col] = evaluate_policy(domain, params, sim_params, eval_dialogs, eval_seed, max_turns)
        col += 1
        for k in range(1, n_rl_dialogs + 1):
            dialog, _ = run_sim_dialog(domain, params, sim_params, rng, mode="sample", max_turns=max_turns)
            if dialog.turns:
                episode = episode_from_dialog(dialog, gamma)
                b = estimate_baseline(buffer, params)
                params, opt, report = guarded_update(
                    params, opt, episode, domain, compiled, b, alpha=alpha,
                    sl_max_epochs=sl_max_epochs,
                )
                repairs += 1 if report.repaired else 0
                if assert_guard and compiled and not reconstructs(params, domain, compiled):
                    raise AssertionError(f"guard failed after update {k} of run {run}")
                buffer.add(episode)
            if k % eval_every == 0:
                tcr[run, col] = evaluate_policy(
                    domain, params, sim_params, eval_dialogs, eval_seed, max_turns
                )
                col += 1
                if progress is not None:
                    progress(run, k, tcr[run, col - 1])
    return RlRunResult(n_sl=n_sl, checkpoints=checkpoints, tcr=tcr, repairs=repairs)
