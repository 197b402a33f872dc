"""Model math against independent oracles: a step-by-step recurrence coded
separately from the library, and central finite differences for BPTT."""

import numpy as np
import pytest

from dialctl.nn import (
    KINDS,
    backward_sequence,
    forward_sequence,
    forward_step,
    init_model,
    initial_state,
    softmax,
    zero_grads,
)
from dialctl.sl import masked_probs


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def oracle_forward(params, xs):
    """Independent loop-and-index implementation of all three recurrences."""
    t = params.tensors
    hdim = params.hidden
    h = np.zeros(hdim)
    c = np.zeros(hdim)
    logits = []
    for x in xs:
        if params.kind == "lstm":
            z = x @ t["w_x"] + h @ t["w_h"] + t["b"]
            i, f = _sig(z[:hdim]), _sig(z[hdim : 2 * hdim])
            g, o = np.tanh(z[2 * hdim : 3 * hdim]), _sig(z[3 * hdim :])
            c = f * c + i * g
            h = o * np.tanh(c)
        elif params.kind == "rnn":
            h = np.tanh(x @ t["w_x"] + h @ t["w_h"] + t["b"])
        else:
            h = np.tanh(x @ t["w_x"] + t["b"])
        logits.append(h @ t["w_out"] + t["b_out"])
    return np.asarray(logits)


def seq_loss(params, xs, targets):
    """Plain cross entropy on unmasked softmax; the scalar used for
    finite-difference checks."""
    logits = forward_sequence(params, xs)
    p = softmax(logits)
    return -float(np.sum(np.log(p[np.arange(len(targets)), targets])))


def ce_dlogits(params, xs, targets):
    logits = forward_sequence(params, xs)
    p = softmax(logits)
    d = p.copy()
    d[np.arange(len(targets)), targets] -= 1.0
    return d


def fd_grad(params, xs, targets, name, idx, delta=1e-5):
    plus = params.copy()
    plus.tensors[name].flat[idx] += delta
    minus = params.copy()
    minus.tensors[name].flat[idx] -= delta
    return (seq_loss(plus, xs, targets) - seq_loss(minus, xs, targets)) / (2 * delta)


class TestInit:
    def test_paper_scale_shapes(self):
        params = init_model("lstm", 112, 32, 14, seed=0)
        assert params.tensors["w_x"].shape == (112, 4 * 32)
        assert params.tensors["w_h"].shape == (32, 4 * 32)
        assert params.tensors["w_out"].shape == (32, 14)

    def test_same_seed_bitwise_identical(self):
        a = init_model("lstm", 7, 5, 3, seed=42)
        b = init_model("lstm", 7, 5, 3, seed=42)
        for name in a.tensors:
            assert np.array_equal(a.tensors[name], b.tensors[name])

    def test_forget_gate_bias_zero(self):
        params = init_model("lstm", 7, 5, 3, seed=1)
        hdim = params.hidden
        assert np.all(params.tensors["b"][hdim : 2 * hdim] == 0.0)
        assert np.all(params.tensors["b"] == 0.0)  # all biases start at zero

    def test_bad_dimensions_rejected(self):
        with pytest.raises(ValueError):
            init_model("lstm", 0, 5, 3, seed=0)
        with pytest.raises(ValueError):
            init_model("gru", 4, 5, 3, seed=0)

    def test_glorot_bounds(self):
        params = init_model("rnn", 30, 20, 10, seed=3)
        limit = np.sqrt(6.0 / (30 + 20))
        w = params.tensors["w_x"]
        assert np.all(np.abs(w) <= limit)
        assert np.max(np.abs(w)) > 0.5 * limit


class TestForward:
    def test_zero_params_uniform_softmax(self):
        params = init_model("lstm", 6, 4, 5, seed=0)
        for name in params.tensors:
            params.tensors[name][:] = 0.0
        state = initial_state(params)
        _, logits = forward_step(params, state, np.ones(6))
        assert np.all(logits == 0.0)
        assert np.allclose(softmax(logits), 0.2)

    @pytest.mark.parametrize("kind", KINDS)
    def test_matches_independent_oracle(self, kind):
        rng = np.random.default_rng(5)
        params = init_model(kind, 5, 4, 3, seed=9)
        xs = rng.normal(size=(6, 5))
        got = forward_sequence(params, xs)
        want = oracle_forward(params, xs)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_dnn_ignores_history(self):
        params = init_model("dnn", 5, 4, 3, seed=2)
        x = np.linspace(-1, 1, 5)
        history_a = np.vstack([np.ones((3, 5)), x])
        history_b = np.vstack([-np.ones((6, 5)), x])
        assert np.allclose(forward_sequence(params, history_a)[-1],
                           forward_sequence(params, history_b)[-1])

    @pytest.mark.parametrize("kind", ["lstm", "rnn"])
    def test_recurrent_kinds_depend_on_history(self, kind):
        params = init_model(kind, 5, 4, 3, seed=2)
        x = np.linspace(-1, 1, 5)
        history_a = np.vstack([np.ones((3, 5)), x])
        history_b = np.vstack([-np.ones((3, 5)), x])
        assert not np.allclose(forward_sequence(params, history_a)[-1],
                               forward_sequence(params, history_b)[-1])

    def test_forward_step_pure(self):
        params = init_model("lstm", 5, 4, 3, seed=2)
        state = initial_state(params)
        x = np.ones(5)
        s1, l1 = forward_step(params, state, x)
        s2, l2 = forward_step(params, state, x)
        assert np.array_equal(l1, l2)
        assert np.array_equal(s1.h, s2.h)
        assert np.all(state.h == 0.0)  # input state untouched

    def test_batched_matches_single(self):
        params = init_model("lstm", 5, 4, 3, seed=8)
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(3, 7, 5))
        singles = np.stack([forward_sequence(params, xs[i]) for i in range(3)])
        state = initial_state(params, batch=3)
        batched = np.zeros((3, 7, 3))
        for t in range(7):
            state, batched[:, t, :] = forward_step(params, state, xs[:, t, :])
        assert np.max(np.abs(singles - np.swapaxes(batched, 0, 1).swapaxes(0, 1))) < 1e-12

    def test_dimension_mismatch(self):
        params = init_model("rnn", 5, 4, 3, seed=2)
        with pytest.raises(ValueError):
            forward_step(params, initial_state(params), np.ones(6))


class TestSoftmax:
    def test_uniform(self):
        assert np.allclose(softmax(np.zeros(3)), [1 / 3, 1 / 3, 1 / 3])

    def test_closed_form(self):
        assert np.allclose(softmax(np.array([np.log(2.0), 0.0])), [2 / 3, 1 / 3])

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=9)
        assert np.allclose(softmax(z), softmax(z + 123.456))

    def test_sums_to_one_with_extreme_logits(self):
        z = np.array([1000.0, -1000.0, 0.0])
        p = softmax(z)
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.all(p >= 0)


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        params = init_model("lstm", 5, 4, 3, seed=7)
        xs = np.random.default_rng(0).normal(size=(4, 5))
        grads = backward_sequence(params, xs, np.zeros((4, 3)))
        for g in grads.values():
            assert np.all(g == 0.0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_finite_differences(self, kind):
        rng = np.random.default_rng(11)
        params = init_model(kind, 5, 4, 3, seed=13)
        xs = rng.normal(size=(3, 5))
        targets = rng.integers(0, 3, size=3)
        grads = backward_sequence(params, xs, ce_dlogits(params, xs, targets))
        for name, g in grads.items():
            flat = g.ravel()
            for idx in range(flat.size):
                fd = fd_grad(params, xs, targets, name, idx)
                denom = max(abs(fd), abs(flat[idx]), 1e-8)
                assert abs(flat[idx] - fd) / denom < 1e-4, (kind, name, idx)

    def test_dnn_gradients_sum_over_steps(self):
        # stateless model: a 2-step sequence is exactly two independent steps
        params = init_model("dnn", 4, 3, 2, seed=3)
        rng = np.random.default_rng(4)
        xs = rng.normal(size=(2, 4))
        ds = rng.normal(size=(2, 2))
        whole = backward_sequence(params, xs, ds)
        g1 = backward_sequence(params, xs[:1], ds[:1])
        g2 = backward_sequence(params, xs[1:], ds[1:])
        for name in whole:
            assert np.allclose(whole[name], g1[name] + g2[name])

    def test_recurrent_tail_with_zero_upstream_is_inert(self):
        # zero upstream gradient at the tail step contributes nothing
        params = init_model("rnn", 4, 3, 2, seed=3)
        rng = np.random.default_rng(4)
        xs = rng.normal(size=(2, 4))
        d1 = rng.normal(size=(1, 2))
        padded = np.vstack([d1, np.zeros((1, 2))])
        whole = backward_sequence(params, xs, padded)
        head = backward_sequence(params, xs[:1], d1)
        for name in whole:
            assert np.allclose(whole[name], head[name])

    def test_length_mismatch(self):
        params = init_model("rnn", 4, 3, 2, seed=3)
        with pytest.raises(ValueError):
            backward_sequence(params, np.zeros((3, 4)), np.zeros((2, 2)))


class TestMaskedGradientSanity:
    def test_masked_entries_get_zero_gradient(self):
        params = init_model("lstm", 5, 4, 4, seed=1)
        xs = np.random.default_rng(2).normal(size=(3, 5))
        logits = forward_sequence(params, xs)
        mask = np.array([[True, True, False, False]] * 3)
        p = masked_probs(logits, mask)
        assert np.all(p[:, 2:] == 0.0)
        d = p.copy()
        d[np.arange(3), [0, 1, 0]] -= 1.0
        assert np.all(d[:, 2:] == 0.0)
