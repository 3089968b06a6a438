"""Epoch loop with shuffled mini-batches, per-epoch validation, early
stopping on validation loss, and best-checkpoint restoration."""

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import AddressSample, DatasetSplits, TagSchema
from .encoding import Vocabulary, encode_batch
from .errors import ConfigError
from .model import TRAIN, ModelBundle, copy_params, loss_and_grads, forward, token_nll
from .optim import LrSchedule, TrialConfig, lr_at, make_optimizer, step, total_steps


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 10
    patience: int = 2
    batch_size: Optional[int] = None  # None: take the trial's batch size
    seed: Optional[int] = None  # None: take the trial's seed

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("max_epochs and patience must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    wall_time: float = field(compare=False, default=0.0)


@dataclass
class TrainLog:
    records: List[EpochRecord]
    stopped_epoch: int
    best_epoch: int

    @property
    def best_val_loss(self) -> float:
        return self.records[self.best_epoch - 1].val_loss

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,lr\n"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.lr!r}\n")
        return "".join(lines)


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without a strict decrease."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; True means training should stop now."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.bad = 0
        else:
            self.bad += 1
        return self.bad >= self.patience


def epoch_batches(perm: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Split a permutation into consecutive mini-batch index groups."""
    return [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]


def evaluate_loss(bundle: ModelBundle, samples: Sequence[AddressSample],
                  vocab: Vocabulary, schema: TagSchema, batch_size: int = 64) -> float:
    """Mean token cross-entropy in EVAL mode; batch-size independent."""
    if not samples:
        raise ConfigError("evaluate_loss needs at least one sample")
    nll = 0.0
    count = 0.0
    for start in range(0, len(samples), batch_size):
        batch = encode_batch(samples[start:start + batch_size], vocab, schema)
        logits, _ = forward(bundle, batch)
        s, n, _ = token_nll(logits, batch.tag_ids, batch.mask)
        nll += s
        count += n
    return float(nll / count)


def train(bundle: ModelBundle, splits: DatasetSplits, vocab: Vocabulary,
          schema: TagSchema, trial: TrialConfig,
          tc: TrainConfig = TrainConfig()):
    """Train until max_epochs or early stop; return (best model, log).

    The passed-in bundle is updated in place while training runs; the
    returned bundle carries the parameters from the best validation epoch.
    Everything is deterministic given the seed: shuffle order and dropout
    draws come from one generator.
    """
    if not splits.train or not splits.validation:
        raise ConfigError("train and validation splits must be non-empty")
    batch_size = tc.batch_size or trial.batch_size
    seed = tc.seed if tc.seed is not None else trial.trial_seed
    rng = np.random.default_rng(seed)
    opt = make_optimizer(trial.optimizer, trial.weight_decay)
    schedule = LrSchedule(trial.learning_rate,
                          total_steps(len(splits.train), batch_size, tc.max_epochs))

    stopper = EarlyStopper(tc.patience)
    best_params: Dict[str, np.ndarray] = copy_params(bundle.params)
    records: List[EpochRecord] = []
    global_step = 0
    stopped_epoch = 0

    for epoch in range(1, tc.max_epochs + 1):
        t0 = time.perf_counter()
        perm = rng.permutation(len(splits.train))
        nll = 0.0
        count = 0.0
        epoch_lr = lr_at(schedule, global_step)
        for idx in epoch_batches(perm, batch_size):
            batch = encode_batch([splits.train[j] for j in idx], vocab, schema)
            lr = lr_at(schedule, global_step)
            loss, grads = loss_and_grads(bundle, batch, mode=TRAIN, rng=rng)
            step(opt, bundle.params, grads, lr)
            global_step += 1
            nll += loss * batch.n_tokens
            count += batch.n_tokens
        val_loss = evaluate_loss(bundle, splits.validation, vocab, schema)
        records.append(EpochRecord(epoch=epoch, train_loss=float(nll / count),
                                   val_loss=val_loss, lr=epoch_lr,
                                   wall_time=time.perf_counter() - t0))
        stopped_epoch = epoch
        should_stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_params = copy_params(bundle.params)
        if should_stop:
            break

    log = TrainLog(records=records, stopped_epoch=stopped_epoch,
                   best_epoch=stopper.best_epoch)
    best_bundle = replace(bundle, params=best_params)
    return best_bundle, log
