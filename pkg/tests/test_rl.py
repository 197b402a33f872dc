"""Policy-gradient machinery: returns, WIS baseline, gradient direction,
the reconstruction guard, and mask-epsilon safety."""

import numpy as np
import pytest

from dialctl.engine import compile_corpus
from dialctl.engine.corpus import CompiledDialog
from dialctl.nn import forward_sequence, init_adadelta, init_model
from dialctl.phone import default_corpus, default_domain
from dialctl.rl import (
    BaselineBuffer,
    Episode,
    compute_return,
    episode_from_dialog,
    estimate_baseline,
    evaluate_policy,
    guarded_update,
    policy_gradient_update,
    rl_experiment,
)
from dialctl.sl import masked_probs, reconstructs, train_sl
from dialctl.usersim import SimParams, run_sim_dialog


@pytest.fixture(scope="module")
def domain():
    return default_domain()


@pytest.fixture(scope="module")
def corpus():
    return default_corpus()


def fresh_model(domain, seed=0, hidden=16):
    return init_model("lstm", domain.layout.dim, hidden, domain.layout.n_actions, seed)


def make_episode(domain, model, seed=0, mode="sample"):
    rng = np.random.default_rng(seed)
    dialog, _ = run_sim_dialog(domain, model, SimParams(), rng, mode=mode, max_turns=11)
    return episode_from_dialog(dialog)


class TestReturn:
    def test_immediate_success(self):
        assert compute_return(1.0, 1) == 1.0

    def test_discount_closed_form(self):
        assert abs(compute_return(1.0, 5) - 0.95**4) < 1e-12
        assert compute_return(1.0, 5) == pytest.approx(0.81450625)

    def test_failure_zero(self):
        for steps in (1, 3, 10):
            assert compute_return(0.0, steps) == 0.0

    def test_bounds_and_monotonicity(self):
        returns = [compute_return(1.0, n) for n in range(1, 12)]
        assert all(0.0 <= r <= 1.0 for r in returns)
        assert all(a > b for a, b in zip(returns, returns[1:]))

    def test_empty_dialog_rejected(self):
        with pytest.raises(ValueError):
            compute_return(1.0, 0)


def synthetic_episode(domain, actions, step_probs, reward, features=None):
    n = len(actions)
    d, a = domain.layout.dim, domain.layout.n_actions
    feats = features if features is not None else np.zeros((n, d))
    return Episode(
        features=feats,
        masks=np.ones((n, a), dtype=bool),
        actions=np.asarray(actions, dtype=np.intp),
        step_probs=np.asarray(step_probs, dtype=float),
        reward=reward,
        ret=compute_return(reward, n),
    )


class TestBaseline:
    def test_empty_buffer_zero(self, domain):
        assert estimate_baseline(BaselineBuffer(), fresh_model(domain)) == 0.0

    def test_identity_weights_give_mean_return(self, domain):
        # behavior probabilities recorded from the same model: ratios are 1
        model = fresh_model(domain, seed=4)
        buffer = BaselineBuffer()
        for seed in range(6):
            buffer.add(make_episode(domain, model, seed=seed))
        b = estimate_baseline(buffer, model)
        want = np.mean([e.ret for e in buffer.episodes])
        assert abs(b - want) < 1e-9

    def test_hand_computed_weighted_average(self, domain):
        # one-step episodes; current-policy probabilities replayed from the
        # model, behavior probabilities chosen by hand
        model = fresh_model(domain, seed=5)
        x = np.zeros((1, domain.layout.dim))
        logits = forward_sequence(model, x)
        p = masked_probs(logits, np.ones((1, domain.layout.n_actions), bool))[0]
        episodes = [
            synthetic_episode(domain, [0], [p[0] / 2.0], 1.0, features=x),  # w = 2
            synthetic_episode(domain, [1], [p[1] * 2.0], 1.0, features=x),  # w = 0.5
            synthetic_episode(domain, [2], [p[2]], 0.0, features=x),  # w = 1
        ]
        buffer = BaselineBuffer()
        for e in episodes:
            buffer.add(e)
        b = estimate_baseline(buffer, model)
        want = (2.0 * 1.0 + 0.5 * 1.0 + 1.0 * 0.0) / 3.5
        assert abs(b - want) < 1e-9

    def test_weights_clipped_at_ten(self, domain):
        model = fresh_model(domain, seed=6)
        x = np.zeros((1, domain.layout.dim))
        logits = forward_sequence(model, x)
        p = masked_probs(logits, np.ones((1, domain.layout.n_actions), bool))[0]
        episodes = [
            synthetic_episode(domain, [0], [p[0] / 1000.0], 1.0, features=x),  # w -> 10
            synthetic_episode(domain, [1], [p[1]], 0.0, features=x),  # w = 1
        ]
        buffer = BaselineBuffer()
        for e in episodes:
            buffer.add(e)
        b = estimate_baseline(buffer, model)
        assert abs(b - 10.0 / 11.0) < 1e-9

    def test_order_invariance(self, domain):
        model = fresh_model(domain, seed=7)
        episodes = [make_episode(domain, model, seed=s) for s in range(5)]
        forward = BaselineBuffer()
        backward = BaselineBuffer()
        for e in episodes:
            forward.add(e)
        for e in reversed(episodes):
            backward.add(e)
        assert abs(
            estimate_baseline(forward, model) - estimate_baseline(backward, model)
        ) < 1e-12

    def test_capacity_fifo(self, domain):
        buffer = BaselineBuffer()
        model = fresh_model(domain, seed=8)
        first = make_episode(domain, model, seed=0)
        buffer.add(first)
        for s in range(1, 101):
            buffer.add(make_episode(domain, model, seed=s))
        assert len(buffer) == 100
        assert first not in buffer.episodes


class TestPolicyGradient:
    def test_zero_advantage_keeps_params(self, domain):
        model = fresh_model(domain, seed=9)
        opt = init_adadelta(model)
        episode = make_episode(domain, model, seed=1)
        new_model, _ = policy_gradient_update(model, opt, episode, baseline=episode.ret)
        for name in model.tensors:
            assert np.array_equal(new_model.tensors[name], model.tensors[name])

    def test_single_step_log_softmax_matches_finite_differences(self, domain):
        model = fresh_model(domain, seed=10, hidden=4)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(1, domain.layout.dim))
        episode = synthetic_episode(domain, [3], [0.5], 1.0, features=x)
        from dialctl.rl import _log_prob_grads

        grads = _log_prob_grads(model, episode, scale=1.0)

        def objective(m):
            logits = forward_sequence(m, x)
            p = masked_probs(logits, episode.masks)
            return float(np.log(p[0, 3] + 1e-8))

        delta = 1e-5
        for name in ("w_out", "b_out", "w_x"):
            flat = grads[name].ravel()
            for idx in range(0, flat.size, max(1, flat.size // 40)):
                plus = model.copy()
                plus.tensors[name].flat[idx] += delta
                minus = model.copy()
                minus.tensors[name].flat[idx] -= delta
                fd = (objective(plus) - objective(minus)) / (2 * delta)
                denom = max(abs(fd), abs(flat[idx]), 1e-8)
                assert abs(flat[idx] - fd) / denom < 1e-4

    def test_successful_episode_raises_taken_action_probs(self, domain):
        model = fresh_model(domain, seed=11)
        opt = init_adadelta(model)
        episode = None
        for seed in range(200):
            cand = make_episode(domain, model, seed=seed)
            if cand.reward > 0:
                episode = cand
                break
        assert episode is not None, "no successful sampled dialog found"
        new_model, _ = policy_gradient_update(model, opt, episode, baseline=0.0, alpha=1e-3)

        def step_probs(m):
            logits = forward_sequence(m, episode.features)
            p = masked_probs(logits, episode.masks)
            return p[np.arange(len(episode.actions)), episode.actions]

        before = step_probs(model)
        after = step_probs(new_model)
        assert np.all(after >= before - 1e-12)

    def test_no_nan_under_zero_probability_masks(self, domain):
        # fuzz: masked distributions with exact zeros never produce
        # non-finite gradients thanks to the epsilon correction
        from dialctl.rl import _log_prob_grads

        rng = np.random.default_rng(12)
        model = fresh_model(domain, seed=13, hidden=6)
        d, a = domain.layout.dim, domain.layout.n_actions
        for _ in range(100):
            n = int(rng.integers(1, 6))
            feats = rng.normal(size=(n, d)) * 5
            masks = rng.random((n, a)) < 0.4
            masks[np.arange(n), rng.integers(0, a, n)] = True
            actions = np.array([rng.choice(np.flatnonzero(m)) for m in masks])
            episode = Episode(
                features=feats,
                masks=masks,
                actions=actions,
                step_probs=np.full(n, 0.5),
                reward=1.0,
                ret=compute_return(1.0, n),
            )
            grads = _log_prob_grads(model, episode, scale=1.0)
            for g in grads.values():
                assert np.all(np.isfinite(g))


class TestGuardedUpdate:
    def test_empty_corpus_pure_rl(self, domain):
        model = fresh_model(domain, seed=14)
        opt = init_adadelta(model)
        episode = make_episode(domain, model, seed=2)
        new_model, _, report = guarded_update(
            model, opt, episode, domain, [], baseline=0.0
        )
        assert not report.repaired and not report.rolled_back

    def test_reconstruction_restored_after_updates(self, domain, corpus):
        compiled = compile_corpus(domain, corpus)[:5]
        result = train_sl(fresh_model(domain, seed=15), domain, compiled)
        model, opt = result.params, result.opt
        rng = np.random.default_rng(3)
        repaired = 0
        for k in range(30):
            dialog, _ = run_sim_dialog(domain, model, SimParams(), rng, mode="sample", max_turns=11)
            episode = episode_from_dialog(dialog)
            model, opt, report = guarded_update(
                model, opt, episode, domain, compiled, baseline=0.0
            )
            repaired += 1 if report.repaired else 0
            assert reconstructs(model, domain, compiled)
        assert repaired >= 1  # sampled exploration must have broken it at least once


class TestExperiment:
    def test_alpha_zero_flat_curve(self, domain, corpus):
        result = rl_experiment(
            domain, corpus, SimParams(), n_sl=2, n_rl_dialogs=40, n_runs=1,
            eval_every=20, eval_dialogs=40, seed=5, alpha=0.0, hidden=16, max_turns=11,
        )
        assert result.tcr.shape == (1, 3)
        assert np.all(result.tcr[0] == result.tcr[0, 0])

    def test_experiment_reproducible(self, domain, corpus):
        kwargs = dict(
            n_sl=1, n_rl_dialogs=20, n_runs=1, eval_every=10, eval_dialogs=30,
            seed=8, hidden=16, max_turns=11,
        )
        a = rl_experiment(domain, corpus, SimParams(), **kwargs)
        b = rl_experiment(domain, corpus, SimParams(), **kwargs)
        assert np.array_equal(a.tcr, b.tcr)

    def test_evaluate_policy_reproducible(self, domain):
        model = fresh_model(domain, seed=16)
        a = evaluate_policy(domain, model, SimParams(), 50, seed=[1, 2])
        b = evaluate_policy(domain, model, SimParams(), 50, seed=[1, 2])
        assert a == b
