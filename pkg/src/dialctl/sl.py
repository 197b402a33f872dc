"""Supervised imitation of the corpus: training to reconstruction,
leave-one-out evaluation, architecture comparison, and the ROC data behind
uncertainty-driven labeling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine.core import Domain
from .engine.corpus import CompiledDialog, CorpusDialog, compile_corpus
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

MAX_EPOCHS = 2000
PLATEAU_PATIENCE = 100


def _ensure_compiled(
    domain: Domain, corpus: list[CorpusDialog] | list[CompiledDialog]
) -> list[CompiledDialog]:
    if corpus and isinstance(corpus[0], CompiledDialog):
        return corpus  # type: ignore[return-value]
    return compile_corpus(domain, corpus)  # type: ignore[arg-type]


def masked_probs(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Masked renormalized softmax, computed as softmax over the allowed
    logits (identical to mask-then-rescale, but in one stable pass)."""
    z = np.where(masks, logits, -np.inf)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _dialog_loss_grads(params: ModelParams, c: CompiledDialog) -> tuple[float, dict]:
    logits = forward_sequence(params, c.features)
    p = masked_probs(logits, c.masks)
    steps = np.arange(len(c.targets))
    chosen = p[steps, c.targets]
    loss = float(-np.sum(np.log(np.maximum(chosen, 1e-300))))
    dlogits = p.copy()
    dlogits[steps, c.targets] -= 1.0
    return loss, backward_sequence(params, c.features, dlogits)


def greedy_actions(params: ModelParams, compiled: list[CompiledDialog]) -> list[np.ndarray]:
    """Greedy masked action per turn for every dialog, replaying recorded
    (teacher-forced) history; batched across dialogs for speed."""
    if not compiled:
        return []
    n = len(compiled)
    lengths = np.array([len(c.targets) for c in compiled])
    t_max = int(lengths.max())
    d = params.input_dim
    x = np.zeros((n, t_max, d))
    masks = np.zeros((n, t_max, params.n_actions), dtype=bool)
    masks[:, :, 0] = True  # harmless filler for padded steps
    for i, c in enumerate(compiled):
        x[i, : lengths[i]] = c.features
        masks[i, : lengths[i]] = c.masks
    state = initial_state(params, batch=n)
    out = np.zeros((n, t_max), dtype=np.intp)
    for t in range(t_max):
        state, logits = forward_step(params, state, x[:, t, :])
        z = np.where(masks[:, t, :], logits, -np.inf)
        out[:, t] = np.argmax(z, axis=-1)
    return [out[i, : lengths[i]] for i in range(n)]


def reconstructs(
    params: ModelParams, domain: Domain, corpus: list[CorpusDialog] | list[CompiledDialog]
) -> bool:
    """True iff greedy masked selection reproduces every recorded action."""
    compiled = _ensure_compiled(domain, corpus)
    for c, actions in zip(compiled, greedy_actions(params, compiled)):
        if not np.array_equal(actions, c.targets):
            return False
    return True


@dataclass
class TrainResult:
    params: ModelParams
    opt: AdaDeltaState
    epochs: int
    reconstructed: bool
    losses: list[float]


def train_sl(
    params: ModelParams,
    domain: Domain,
    corpus: list[CorpusDialog] | list[CompiledDialog],
    max_epochs: int = MAX_EPOCHS,
    stop: str = "reconstruction",
    opt: AdaDeltaState | None = None,
    plateau_patience: int = PLATEAU_PATIENCE,
) -> TrainResult:
    """Per-dialog BPTT on the masked cross entropy, with AdaDelta.

    ``stop="reconstruction"`` runs until greedy replay reproduces the
    corpus (or max_epochs); ``stop="plateau"`` additionally stops once the
    epoch loss has not improved for ``plateau_patience`` epochs.
    """
    if stop not in ("reconstruction", "plateau"):
        raise ValueError(f"unknown stop rule {stop!r}")
    compiled = _ensure_compiled(domain, corpus)
    opt = opt if opt is not None else init_adadelta(params)
    if not compiled or reconstructs(params, domain, compiled):
        return TrainResult(params, opt, 0, True, [])
    losses: list[float] = []
    best = np.inf
    since_best = 0
    reconstructed = False
    epochs = 0
    for epoch in range(1, max_epochs + 1):
        epochs = epoch
        total = 0.0
        for c in compiled:
            loss, grads = _dialog_loss_grads(params, c)
            params, opt = adadelta_apply(opt, params, grads, "descend")
            total += loss
        losses.append(total)
        if reconstructs(params, domain, compiled):
            reconstructed = True
            break
        if stop == "plateau":
            if total < best - 1e-9:
                best = total
                since_best = 0
            else:
                since_best += 1
                if since_best >= plateau_patience:
                    break
    return TrainResult(params, opt, epochs, reconstructed, losses)


@dataclass
class LooResult:
    sizes: tuple[int, ...]
    per_turn: dict[int, float]
    whole_dialog: dict[int, float]
    per_fold_turn: dict[int, np.ndarray]
    per_fold_dialog: dict[int, np.ndarray]


def _eval_accuracy(params: ModelParams, held: CompiledDialog) -> tuple[float, bool]:
    actions = greedy_actions(params, [held])[0]
    hits = actions == held.targets
    return float(np.mean(hits)), bool(np.all(hits))


def loo_eval(
    domain: Domain,
    corpus: list[CorpusDialog],
    sizes: tuple[int, ...] = (1, 2, 5, 10, 20),
    seed: int = 0,
    arch: str = "lstm",
    hidden: int = 32,
    max_epochs: int = MAX_EPOCHS,
) -> LooResult:
    """Leave-one-out protocol: per fold, hold out one dialog, train fresh
    models on nested random subsets of the rest, and score the held-out
    dialog per turn and per whole dialog."""
    compiled = compile_corpus(domain, corpus)
    n = len(compiled)
    if max(sizes) > n - 1:
        raise ValueError(f"train size {max(sizes)} exceeds pool of {n - 1}")
    d, a = domain.layout.dim, domain.layout.n_actions
    turn_acc = {s: np.zeros(n) for s in sizes}
    dialog_acc = {s: np.zeros(n) for s in sizes}
    for fold in range(n):
        rng = np.random.default_rng([seed, fold])
        pool = [compiled[i] for i in range(n) if i != fold]
        order = rng.permutation(n - 1)
        for size in sizes:
            subset = [pool[i] for i in order[:size]]
            model = init_model(arch, d, hidden, a, seed=int(rng.integers(2**31)))
            result = train_sl(model, domain, subset, max_epochs=max_epochs)
            pt, whole = _eval_accuracy(result.params, compiled[fold])
            turn_acc[size][fold] = pt
            dialog_acc[size][fold] = float(whole)
    return LooResult(
        sizes=tuple(sizes),
        per_turn={s: float(np.mean(turn_acc[s])) for s in sizes},
        whole_dialog={s: float(np.mean(dialog_acc[s])) for s in sizes},
        per_fold_turn=turn_acc,
        per_fold_dialog=dialog_acc,
    )


def compare_architectures(
    domain: Domain,
    corpus: list[CorpusDialog],
    sizes: tuple[int, ...] = (1, 10, 21),
    archs: tuple[str, ...] = ("dnn", "rnn", "lstm"),
    seed: int = 0,
    hidden: int = 32,
    max_epochs: int = MAX_EPOCHS,
    plateau_patience: int = PLATEAU_PATIENCE,
) -> dict[str, dict[int, bool]]:
    """Whether each architecture can reproduce training sets of the first
    1, 10, and all 21 dialogs, under the reconstruct-or-plateau stop rule."""
    compiled = compile_corpus(domain, corpus)
    d, a = domain.layout.dim, domain.layout.n_actions
    table: dict[str, dict[int, bool]] = {}
    for arch in archs:
        table[arch] = {}
        for size in sizes:
            model = init_model(arch, d, hidden, a, seed=seed)
            result = train_sl(
                model, domain, compiled[:size], max_epochs=max_epochs,
                stop="plateau", plateau_patience=plateau_patience,
            )
            table[arch][size] = result.reconstructed
    return table


@dataclass
class RocResult:
    scores: list[tuple[float, bool]]  # (masked prob of greedy action, correct?)
    points: list[tuple[float, float, float]]  # (threshold, fpr, tpr)
    auc: float
    n_correct: int
    n_incorrect: int
    low20_incorrect_frac: float


def _rank_auc(scores: np.ndarray, correct: np.ndarray) -> float:
    """P(score of a correct action > score of an incorrect one), ties at
    half credit; identical to the area under the step ROC."""
    pos = scores[correct]
    neg = scores[~correct]
    if len(pos) == 0 or len(neg) == 0:
        return 1.0
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks over ties
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    r_pos = np.sum(ranks[correct])
    u = r_pos - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def roc_data(
    domain: Domain,
    corpus: list[CorpusDialog],
    n_repeats: int = 10,
    split: tuple[int, int] = (11, 10),
    seed: int = 0,
    arch: str = "lstm",
    hidden: int = 32,
    max_epochs: int = MAX_EPOCHS,
) -> RocResult:
    """Repeated random split/train/score: the score of each test-set action
    is the masked probability of the greedy choice, logged with its
    correctness.  FPR/TPR count incorrect/correct actions above a moving
    threshold."""
    compiled = compile_corpus(domain, corpus)
    n = len(compiled)
    if split[0] + split[1] > n:
        raise ValueError(f"split {split} exceeds corpus size {n}")
    d, a = domain.layout.dim, domain.layout.n_actions
    pairs: list[tuple[float, bool]] = []
    for rep in range(n_repeats):
        rng = np.random.default_rng([seed, rep])
        order = rng.permutation(n)
        train = [compiled[i] for i in order[: split[0]]]
        test = [compiled[i] for i in order[split[0] : split[0] + split[1]]]
        model = init_model(arch, d, hidden, a, seed=int(rng.integers(2**31)))
        result = train_sl(model, domain, train, max_epochs=max_epochs)
        for c in test:
            logits = forward_sequence(result.params, c.features)
            p = masked_probs(logits, c.masks)
            greedy = np.argmax(np.where(c.masks, logits, -np.inf), axis=-1)
            for t in range(len(c.targets)):
                pairs.append((float(p[t, greedy[t]]), bool(greedy[t] == c.targets[t])))
    scores = np.array([s for s, _ in pairs])
    correct = np.array([c for _, c in pairs], dtype=bool)
    n_pos, n_neg = int(correct.sum()), int((~correct).sum())
    points = []
    for thr in sorted(set(scores), reverse=True):
        above = scores >= thr
        fpr = float((above & ~correct).sum() / n_neg) if n_neg else 0.0
        tpr = float((above & correct).sum() / n_pos) if n_pos else 1.0
        points.append((float(thr), fpr, tpr))
    lowest = np.argsort(scores, kind="mergesort")[:20]
    low20 = float(np.mean(~correct[lowest])) if len(lowest) else 0.0
    return RocResult(
        scores=pairs,
        points=points,
        auc=_rank_auc(scores, correct),
        n_correct=n_pos,
        n_incorrect=n_neg,
        low20_incorrect_frac=low20,
    )
