"""Supervised trainer: reconstruction, stop rules, and the evaluation
protocols at reduced scale (the full-scale runs live in the acceptance
suite)."""

import numpy as np
import pytest

from dialctl.engine import compile_corpus
from dialctl.nn import init_model
from dialctl.phone import default_corpus, default_domain
from dialctl.sl import (
    greedy_actions,
    loo_eval,
    masked_probs,
    reconstructs,
    roc_data,
    train_sl,
)


@pytest.fixture(scope="module")
def domain():
    return default_domain()


@pytest.fixture(scope="module")
def corpus():
    return default_corpus()


@pytest.fixture(scope="module")
def compiled(domain, corpus):
    return compile_corpus(domain, corpus)


def fresh_model(domain, arch="lstm", seed=0, hidden=32):
    return init_model(arch, domain.layout.dim, hidden, domain.layout.n_actions, seed)


class TestReconstructs:
    def test_empty_corpus_true(self, domain):
        assert reconstructs(fresh_model(domain), domain, [])

    def test_tie_break_consequence(self, domain, compiled):
        # a uniform model picks the lowest-index allowed action, so any
        # dialog whose first target is not the lowest allowed index fails
        model = fresh_model(domain)
        for name in model.tensors:
            model.tensors[name][:] = 0.0
        one = [compiled[0]]
        lowest_allowed = int(np.argmax(compiled[0].masks[0]))
        expected = lowest_allowed == compiled[0].targets[0] and len(compiled[0].targets) == 1
        if not expected:
            assert not reconstructs(model, domain, one)

    def test_batched_greedy_matches_sequential(self, domain, compiled):
        model = fresh_model(domain, seed=11)
        batched = greedy_actions(model, compiled[:6])
        from dialctl.nn import forward_sequence

        for c, got in zip(compiled[:6], batched):
            logits = forward_sequence(model, c.features)
            want = np.argmax(np.where(c.masks, logits, -np.inf), axis=-1)
            assert np.array_equal(got, want)


class TestTrainSl:
    def test_single_dialog_reconstructs_quickly(self, domain, compiled):
        result = train_sl(fresh_model(domain, seed=1), domain, compiled[:1])
        assert result.reconstructed
        assert 0 < result.epochs < 50

    def test_already_reconstructing_returns_immediately(self, domain, compiled):
        result = train_sl(fresh_model(domain, seed=2), domain, compiled[:1])
        again = train_sl(result.params, domain, compiled[:1], opt=result.opt)
        assert again.epochs == 0
        assert again.reconstructed

    def test_full_corpus_lstm_reconstructs(self, domain, compiled):
        result = train_sl(fresh_model(domain, seed=3), domain, compiled)
        assert result.reconstructed
        assert reconstructs(result.params, domain, compiled)

    def test_loss_trend_downward(self, domain, compiled):
        result = train_sl(fresh_model(domain, seed=4), domain, compiled)
        assert len(result.losses) >= 2
        assert result.losses[-1] < result.losses[0]
        drops = sum(
            1 for a, b in zip(result.losses, result.losses[1:]) if b < a
        )
        assert drops / (len(result.losses) - 1) >= 0.9 or len(result.losses) < 10

    def test_plateau_stop_rule(self, domain):
        # two identical one-step dialogs with different targets cannot both
        # be fit; the loss settles at its floor and the patience rule fires
        from dialctl.engine.corpus import CompiledDialog

        d, a = domain.layout.dim, domain.layout.n_actions
        x = np.zeros((1, d))
        x[0, :3] = 1.0
        mask = np.ones((1, a), dtype=bool)
        conflict = [
            CompiledDialog(features=x.copy(), masks=mask.copy(), targets=np.array([1])),
            CompiledDialog(features=x.copy(), masks=mask.copy(), targets=np.array([7])),
        ]
        model = fresh_model(domain, arch="dnn", seed=5, hidden=8)
        result = train_sl(
            model, domain, conflict, max_epochs=3000, stop="plateau", plateau_patience=100
        )
        assert not result.reconstructed
        assert result.epochs < 3000

    def test_determinism(self, domain, compiled):
        a = train_sl(fresh_model(domain, seed=6), domain, compiled[:5])
        b = train_sl(fresh_model(domain, seed=6), domain, compiled[:5])
        assert a.epochs == b.epochs
        for name in a.params.tensors:
            assert np.array_equal(a.params.tensors[name], b.params.tensors[name])


class TestMaskedProbs:
    def test_matches_mask_and_renormalize(self, domain):
        from dialctl.engine import mask_and_renormalize
        from dialctl.nn import softmax

        rng = np.random.default_rng(0)
        for _ in range(50):
            logits = rng.normal(size=domain.layout.n_actions) * 3
            mask = rng.random(domain.layout.n_actions) < 0.5
            if not mask.any():
                mask[0] = True
            a = masked_probs(logits, mask)
            b = mask_and_renormalize(softmax(logits), mask)
            assert np.allclose(a, b, atol=1e-12)


class TestLooSmall:
    def test_small_loo_shapes_and_ordering(self, domain, corpus):
        result = loo_eval(domain, corpus, sizes=(1, 5), seed=0, hidden=16)
        assert set(result.per_turn) == {1, 5}
        for size in (1, 5):
            assert 0.0 <= result.whole_dialog[size] <= result.per_turn[size] <= 1.0
        assert result.per_fold_turn[1].shape == (21,)

    def test_oversized_split_rejected(self, domain, corpus):
        with pytest.raises(ValueError):
            loo_eval(domain, corpus, sizes=(21,))


class TestRocSmall:
    def test_roc_output_contract(self, domain, corpus):
        result = roc_data(domain, corpus, n_repeats=2, seed=0)
        assert result.n_correct + result.n_incorrect == len(result.scores)
        assert 0.0 <= result.auc <= 1.0
        fprs = [p[1] for p in result.points]
        tprs = [p[2] for p in result.points]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)

    def test_shuffled_scores_auc_near_half(self):
        from dialctl.sl import _rank_auc

        rng = np.random.default_rng(5)
        scores = rng.random(4000)
        correct = rng.random(4000) < 0.5
        assert abs(_rank_auc(scores, correct) - 0.5) < 0.05

    def test_perfect_separation_auc_one(self):
        from dialctl.sl import _rank_auc

        scores = np.concatenate([np.full(50, 0.9), np.full(50, 0.1)])
        correct = np.concatenate([np.ones(50, bool), np.zeros(50, bool)])
        assert _rank_auc(scores, correct) == 1.0
