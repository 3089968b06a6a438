"""AdamW, RMSprop, and SGD with decoupled weight decay, plus the linear
learning-rate schedule.

Weight decay is decoupled for all three optimizers, not just AdamW, so the
decay axis of the hyperparameter search means the same thing everywhere:
one step with zero gradient multiplies every parameter by (1 - lr * wd).
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import ConfigError, NonFiniteGradient

ADAMW = "adamw"
RMSPROP = "rmsprop"
SGD = "sgd"
OPTIMIZER_KINDS = (ADAMW, RMSPROP, SGD)

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
RMS_ALPHA = 0.99


@dataclass(frozen=True)
class TrialConfig:
    """One hyperparameter sample: the four searched axes plus its seed."""

    learning_rate: float
    batch_size: int
    optimizer: str
    weight_decay: float
    trial_seed: int = 0


@dataclass(frozen=True)
class LrSchedule:
    lr0: float
    total_steps: int

    def __post_init__(self):
        if self.lr0 <= 0 or self.total_steps < 1:
            raise ConfigError("schedule needs lr0 > 0 and total_steps >= 1")


def lr_at(schedule: LrSchedule, t: int) -> float:
    """Linear decay, no warmup: lr0 * max(0, 1 - t/T)."""
    return schedule.lr0 * max(0.0, 1.0 - t / schedule.total_steps)


@dataclass
class OptimizerState:
    kind: str
    weight_decay: float
    t: int = 0
    # per-parameter moment buffers, keyed "m.<param>" / "v.<param>" / "sq.<param>"
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)

    def _buf(self, prefix: str, name: str, like: np.ndarray) -> np.ndarray:
        key = f"{prefix}.{name}"
        if key not in self.buffers:
            self.buffers[key] = np.zeros_like(like)
        return self.buffers[key]


def make_optimizer(kind: str, weight_decay: float) -> OptimizerState:
    if kind not in OPTIMIZER_KINDS:
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    if weight_decay < 0:
        raise ConfigError("weight_decay must be >= 0")
    return OptimizerState(kind=kind, weight_decay=weight_decay)


def step(state: OptimizerState, params: Dict[str, np.ndarray],
         grads: Dict[str, np.ndarray], lr: float) -> None:
    """One in-place update of every parameter.

    Raises :class:`NonFiniteGradient` before touching anything if any
    gradient carries NaN or inf, so a failed trial leaves no partial update.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name!r}")
    state.t += 1
    wd = state.weight_decay
    if state.kind == SGD:
        for name, g in grads.items():
            p = params[name]
            p -= lr * g + lr * wd * p
    elif state.kind == ADAMW:
        bc1 = 1.0 - BETA1 ** state.t
        bc2 = 1.0 - BETA2 ** state.t
        for name, g in grads.items():
            p = params[name]
            m = state._buf("m", name, p)
            v = state._buf("v", name, p)
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p -= lr * (m_hat / (np.sqrt(v_hat) + EPS)) + lr * wd * p
    else:  # RMSPROP
        for name, g in grads.items():
            p = params[name]
            sq = state._buf("sq", name, p)
            sq *= RMS_ALPHA
            sq += (1.0 - RMS_ALPHA) * g * g
            p -= lr * (g / (np.sqrt(sq) + EPS)) + lr * wd * p


def state_to_payload(state: OptimizerState) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Checkpoint-embeddable form: (metadata, named arrays)."""
    meta = dict(kind=state.kind, weight_decay=state.weight_decay, t=state.t)
    return meta, dict(state.buffers)


def state_from_payload(meta: dict, arrays: Dict[str, np.ndarray]) -> OptimizerState:
    return OptimizerState(kind=meta["kind"], weight_decay=meta["weight_decay"],
                          t=meta["t"], buffers=dict(arrays))


def total_steps(n_train: int, batch_size: int, max_epochs: int) -> int:
    return max_epochs * math.ceil(n_train / batch_size)
