"""Random-search hyperparameter optimization over the four searched axes.

Each trial owns an index-derived seed, so trials can run in any order (or in
parallel) and the study outcome only depends on the master seed. Pruning is
whatever early stopping the trainer applies; there is no cross-trial pruning.
"""

import math
import random
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .data import DatasetSplits, TagSchema
from .encoding import Vocabulary
from .errors import NonFiniteGradient, StudyFailed
from .model import EncoderConfig, HeadConfig, init_model
from .optim import ADAMW, RMSPROP, SGD, TrialConfig
from .trainer import TrainConfig, TrainLog, train

FAILED = "failed"
COMPLETED = "completed"


@dataclass(frozen=True)
class SearchSpace:
    lr_min: float = 5e-5
    lr_max: float = 1e-2
    batch_sizes: Tuple[int, ...] = (8, 16, 32, 64)
    optimizers: Tuple[str, ...] = (ADAMW, RMSPROP, SGD)
    weight_decays: Tuple[float, ...] = (1e-3, 1e-2, 1e-4)
    log_uniform_lr: bool = True  # switch to linear-uniform sampling if False

    def contains(self, cfg: TrialConfig) -> bool:
        return (self.lr_min <= cfg.learning_rate <= self.lr_max
                and cfg.batch_size in self.batch_sizes
                and cfg.optimizer in self.optimizers
                and cfg.weight_decay in self.weight_decays)


def sample_trial(space: SearchSpace, rng: random.Random, trial_seed: int = 0) -> TrialConfig:
    """Draw one configuration: log-uniform learning rate, uniform choices."""
    if space.log_uniform_lr:
        lr = math.exp(rng.uniform(math.log(space.lr_min), math.log(space.lr_max)))
        lr = min(max(lr, space.lr_min), space.lr_max)
    else:
        lr = rng.uniform(space.lr_min, space.lr_max)
    return TrialConfig(
        learning_rate=lr,
        batch_size=rng.choice(space.batch_sizes),
        optimizer=rng.choice(space.optimizers),
        weight_decay=rng.choice(space.weight_decays),
        trial_seed=trial_seed,
    )


def derive_trial_seed(master_seed: int, index: int) -> int:
    # index-derived, not sequence-derived: trial order must not matter
    return (master_seed * 1_000_003 + index * 7919 + 1) & 0x7FFFFFFF


def trial_rng(master_seed: int, index: int) -> random.Random:
    return random.Random(f"{master_seed}:{index}:config")


@dataclass
class TrialRecord:
    index: int
    config: TrialConfig
    status: str
    best_val_loss: float  # nan when failed
    log: Optional[TrainLog]


@dataclass
class StudyResult:
    records: List[TrialRecord]
    best_trial: int

    def completed(self) -> List[TrialRecord]:
        return [r for r in self.records if r.status == COMPLETED]


def run_study(ec: EncoderConfig, hc: HeadConfig, splits: DatasetSplits,
              vocab: Vocabulary, schema: TagSchema,
              space: SearchSpace = SearchSpace(), n_trials: int = 40,
              master_seed: int = 0, tc: TrainConfig = TrainConfig(),
              progress=None) -> StudyResult:
    """Run ``n_trials`` independent trials of one (encoder, head) variant.

    Trials that abort on a non-finite gradient are recorded as failed and
    excluded from best-trial selection; the aggregate is a pure function of
    the master seed.
    """
    if n_trials < 1:
        raise StudyFailed("n_trials must be >= 1")
    records: List[TrialRecord] = []
    for i in range(n_trials):
        cfg = sample_trial(space, trial_rng(master_seed, i),
                           trial_seed=derive_trial_seed(master_seed, i))
        bundle = init_model(ec, hc, schema, vocab, seed=cfg.trial_seed)
        try:
            _, log = train(bundle, splits, vocab, schema, cfg, tc)
            rec = TrialRecord(index=i, config=cfg, status=COMPLETED,
                              best_val_loss=log.best_val_loss, log=log)
        except NonFiniteGradient:
            rec = TrialRecord(index=i, config=cfg, status=FAILED,
                              best_val_loss=float("nan"), log=None)
        records.append(rec)
        if progress is not None:
            progress(rec)
    best = _best_index(records)
    return StudyResult(records=records, best_trial=best)


def _best_index(records: List[TrialRecord]) -> int:
    best = None
    best_loss = float("inf")
    for r in records:
        if r.status == COMPLETED and r.best_val_loss < best_loss:
            best = r.index
            best_loss = r.best_val_loss
    if best is None:
        raise StudyFailed("every trial failed")
    return best


def best_config(sr: StudyResult) -> TrialConfig:
    """Configuration of the winning trial; ties go to the lowest index."""
    return sr.records[_best_index(sr.records)].config


def study_csv(sr: StudyResult) -> str:
    lines = ["trial,lr,batch,optimizer,wd,status,best_val_loss\n"]
    for r in sr.records:
        c = r.config
        loss = "" if math.isnan(r.best_val_loss) else repr(r.best_val_loss)
        lines.append(f"{r.index},{c.learning_rate!r},{c.batch_size},"
                     f"{c.optimizer},{c.weight_decay!r},{r.status},{loss}\n")
    return "".join(lines)
