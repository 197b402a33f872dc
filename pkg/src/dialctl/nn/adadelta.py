"""AdaDelta with per-tensor accumulators, usable for descent (supervised
loss) and ascent (policy-gradient objective)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams


@dataclass
class AdaDeltaState:
    rho: float
    eps: float
    acc_grad_sq: dict[str, np.ndarray]
    acc_delta_sq: dict[str, np.ndarray]

    def copy(self) -> "AdaDeltaState":
        return AdaDeltaState(
            rho=self.rho,
            eps=self.eps,
            acc_grad_sq={k: v.copy() for k, v in self.acc_grad_sq.items()},
            acc_delta_sq={k: v.copy() for k, v in self.acc_delta_sq.items()},
        )


def init_adadelta(params: ModelParams, rho: float = 0.95, eps: float = 1e-6) -> AdaDeltaState:
    return AdaDeltaState(
        rho=rho,
        eps=eps,
        acc_grad_sq={k: np.zeros_like(v) for k, v in params.tensors.items()},
        acc_delta_sq={k: np.zeros_like(v) for k, v in params.tensors.items()},
    )


def adadelta_apply(
    opt: AdaDeltaState,
    params: ModelParams,
    grads: dict[str, np.ndarray],
    direction: str = "descend",
) -> tuple[ModelParams, AdaDeltaState]:
    """One AdaDelta update; returns fresh (params, opt) without mutation.

    ``descend`` steps against the gradient, ``ascend`` along it.
    """
    if direction not in ("descend", "ascend"):
        raise ValueError(f"direction must be 'descend' or 'ascend', got {direction!r}")
    sign = 1.0 if direction == "descend" else -1.0
    if set(grads) != set(params.tensors):
        raise ValueError("gradient tensors do not match parameter tensors")
    new_params = params.copy()
    new_opt = opt.copy()
    for name, g in grads.items():
        if g.shape != params.tensors[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        eg = new_opt.acc_grad_sq[name]
        ed = new_opt.acc_delta_sq[name]
        eg[:] = opt.rho * eg + (1.0 - opt.rho) * g * g
        delta = -sign * (np.sqrt(ed + opt.eps) / np.sqrt(eg + opt.eps)) * g
        ed[:] = opt.rho * ed + (1.0 - opt.rho) * delta * delta
        new_params.tensors[name] += delta
    return new_params, new_opt
