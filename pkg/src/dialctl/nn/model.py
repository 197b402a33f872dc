"""Dense sequence models with a softmax head, in plain float64 numpy.

Three architectures share one parameter container and one training surface:

* ``lstm`` -- gated recurrence, gate order (input, forget, cell, output);
  the forget-gate bias is the slice ``b[H:2H]``.
* ``rnn``  -- tanh recurrence.
* ``dnn``  -- one tanh hidden layer, no recurrent state.

Parameters live in a name -> ndarray dict so the optimizer, the gradient
code, and the checkpoint format can treat them uniformly.  All operations
are pure: they never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("dnn", "rnn", "lstm")


@dataclass
class ModelParams:
    kind: str
    input_dim: int
    hidden: int
    n_actions: int
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            input_dim=self.input_dim,
            hidden=self.hidden,
            n_actions=self.n_actions,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )

    def tensor_names(self) -> list[str]:
        return sorted(self.tensors)


@dataclass
class ModelState:
    """Recurrent activations carried between steps.

    ``h``/``c`` have shape (H,) for a single session or (N, H) for a batch
    of parallel replays.  The DNN carries no state; both arrays are empty.
    """

    h: np.ndarray
    c: np.ndarray | None = None


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(kind: str, input_dim: int, hidden: int, n_actions: int, seed: int) -> ModelParams:
    """Glorot-uniform weights, all biases zero (including the forget gate)."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind: {kind!r}")
    if input_dim < 1 or hidden < 1 or n_actions < 1:
        raise ValueError(f"dimensions must be >= 1, got D={input_dim} H={hidden} A={n_actions}")
    rng = np.random.default_rng(seed)
    d, h, a = input_dim, hidden, n_actions
    tensors: dict[str, np.ndarray] = {}
    if kind == "lstm":
        tensors["w_x"] = _glorot(rng, d, 4 * h, (d, 4 * h))
        tensors["w_h"] = _glorot(rng, h, 4 * h, (h, 4 * h))
        tensors["b"] = np.zeros(4 * h)
    elif kind == "rnn":
        tensors["w_x"] = _glorot(rng, d, h, (d, h))
        tensors["w_h"] = _glorot(rng, h, h, (h, h))
        tensors["b"] = np.zeros(h)
    else:  # dnn
        tensors["w_x"] = _glorot(rng, d, h, (d, h))
        tensors["b"] = np.zeros(h)
    tensors["w_out"] = _glorot(rng, h, a, (h, a))
    tensors["b_out"] = np.zeros(a)
    return ModelParams(kind=kind, input_dim=d, hidden=h, n_actions=a, tensors=tensors)


def initial_state(params: ModelParams, batch: int | None = None) -> ModelState:
    """Zero state at dialog start; empty arrays for the stateless DNN."""
    h = params.hidden if params.kind != "dnn" else 0
    shape = (h,) if batch is None else (batch, h)
    if params.kind == "lstm":
        return ModelState(h=np.zeros(shape), c=np.zeros(shape))
    return ModelState(h=np.zeros(shape), c=None)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max subtraction)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _check_input(params: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input width {x.shape[-1]} != model input_dim {params.input_dim}")
    return x


def forward_step(
    params: ModelParams, state: ModelState, x: np.ndarray
) -> tuple[ModelState, np.ndarray]:
    """One step of the recurrence; returns (new state, pre-softmax logits).

    ``x`` may be a (D,) vector or an (N, D) batch; the state must match.
    """
    x = _check_input(params, x)
    t = params.tensors
    if params.kind == "lstm":
        hdim = params.hidden
        z = x @ t["w_x"] + state.h @ t["w_h"] + t["b"]
        i = _sigmoid(z[..., :hdim])
        f = _sigmoid(z[..., hdim : 2 * hdim])
        g = np.tanh(z[..., 2 * hdim : 3 * hdim])
        o = _sigmoid(z[..., 3 * hdim :])
        c = f * state.c + i * g
        h = o * np.tanh(c)
        new_state = ModelState(h=h, c=c)
    elif params.kind == "rnn":
        h = np.tanh(x @ t["w_x"] + state.h @ t["w_h"] + t["b"])
        new_state = ModelState(h=h, c=None)
    else:  # dnn ignores state entirely
        h = np.tanh(x @ t["w_x"] + t["b"])
        new_state = ModelState(h=np.zeros(x.shape[:-1] + (0,)), c=None)
    logits = h @ t["w_out"] + t["b_out"]
    return new_state, logits


def forward_sequence(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Run a whole (T, D) sequence from a zero state; returns (T, A) logits."""
    inputs = _check_input(params, np.atleast_2d(inputs))
    state = initial_state(params)
    logits = np.empty((inputs.shape[0], params.n_actions))
    for step, x in enumerate(inputs):
        state, logits[step] = forward_step(params, state, x)
    return logits


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def backward_sequence(
    params: ModelParams, inputs: np.ndarray, dlogits: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact BPTT gradients for one sequence started from the zero state.

    ``inputs`` is (T, D); ``dlogits`` is (T, A), the gradient of a summed
    per-step scalar loss with respect to each step's logits.  Returns the
    gradient for every parameter tensor.
    """
    inputs = _check_input(params, np.atleast_2d(inputs))
    dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
    if inputs.shape[0] != dlogits.shape[0]:
        raise ValueError(f"{inputs.shape[0]} inputs but {dlogits.shape[0]} upstream gradients")
    if dlogits.shape[1] != params.n_actions:
        raise ValueError(f"upstream width {dlogits.shape[1]} != n_actions {params.n_actions}")
    t = params.tensors
    hdim = params.hidden
    steps = inputs.shape[0]
    grads = zero_grads(params)

    if params.kind == "dnn":
        for step in range(steps):
            x = inputs[step]
            a = np.tanh(x @ t["w_x"] + t["b"])
            dl = dlogits[step]
            grads["w_out"] += np.outer(a, dl)
            grads["b_out"] += dl
            da = (t["w_out"] @ dl) * (1.0 - a * a)
            grads["w_x"] += np.outer(x, da)
            grads["b"] += da
        return grads

    if params.kind == "rnn":
        hs = np.zeros((steps + 1, hdim))
        for step in range(steps):
            hs[step + 1] = np.tanh(inputs[step] @ t["w_x"] + hs[step] @ t["w_h"] + t["b"])
        dh_next = np.zeros(hdim)
        for step in range(steps - 1, -1, -1):
            dl = dlogits[step]
            grads["w_out"] += np.outer(hs[step + 1], dl)
            grads["b_out"] += dl
            dh = t["w_out"] @ dl + dh_next
            dz = dh * (1.0 - hs[step + 1] * hs[step + 1])
            grads["w_x"] += np.outer(inputs[step], dz)
            grads["w_h"] += np.outer(hs[step], dz)
            grads["b"] += dz
            dh_next = t["w_h"] @ dz
        return grads

    # lstm: cache every gate activation on the forward pass
    i_g = np.zeros((steps, hdim))
    f_g = np.zeros((steps, hdim))
    g_g = np.zeros((steps, hdim))
    o_g = np.zeros((steps, hdim))
    cs = np.zeros((steps + 1, hdim))
    hs = np.zeros((steps + 1, hdim))
    for step in range(steps):
        z = inputs[step] @ t["w_x"] + hs[step] @ t["w_h"] + t["b"]
        i_g[step] = _sigmoid(z[:hdim])
        f_g[step] = _sigmoid(z[hdim : 2 * hdim])
        g_g[step] = np.tanh(z[2 * hdim : 3 * hdim])
        o_g[step] = _sigmoid(z[3 * hdim :])
        cs[step + 1] = f_g[step] * cs[step] + i_g[step] * g_g[step]
        hs[step + 1] = o_g[step] * np.tanh(cs[step + 1])

    dh_next = np.zeros(hdim)
    dc_next = np.zeros(hdim)
    for step in range(steps - 1, -1, -1):
        dl = dlogits[step]
        grads["w_out"] += np.outer(hs[step + 1], dl)
        grads["b_out"] += dl
        dh = t["w_out"] @ dl + dh_next
        tc = np.tanh(cs[step + 1])
        do = dh * tc
        dc = dh * o_g[step] * (1.0 - tc * tc) + dc_next
        di = dc * g_g[step]
        df = dc * cs[step]
        dg = dc * i_g[step]
        dz = np.concatenate(
            [
                di * i_g[step] * (1.0 - i_g[step]),
                df * f_g[step] * (1.0 - f_g[step]),
                dg * (1.0 - g_g[step] * g_g[step]),
                do * o_g[step] * (1.0 - o_g[step]),
            ]
        )
        grads["w_x"] += np.outer(inputs[step], dz)
        grads["w_h"] += np.outer(hs[step], dz)
        grads["b"] += dz
        dh_next = t["w_h"] @ dz
        dc_next = dc * f_g[step]
    return grads
