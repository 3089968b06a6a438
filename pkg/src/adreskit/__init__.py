"""Desk-scale Turkish address parsing toolkit.

IOB token classification over CoNLL data with a small from-scratch
transformer encoder, linear vs. two-hidden-layer MLP classification heads,
random-search hyperparameter optimization, and token-level evaluation
metrics (per-sample and per-token accuracy, macro precision/recall/F1).
"""

from .data import (
    AddressSample,
    DatasetSplits,
    TagSchema,
    default_schema,
    generate_dataset,
    label_histogram,
    parse_conll,
    split_dataset,
    validate_iob,
    write_conll,
)
from .encoding import Batch, Vocabulary, build_vocab, encode_batch
from .evalmetrics import (
    ConfusionMatrix,
    EvalReport,
    confusion,
    evaluate,
    macro_scores,
    sample_accuracy,
    token_accuracy,
)
from .hpo import SearchSpace, StudyResult, best_config, run_study, sample_trial
from .model import (
    EncoderConfig,
    HeadConfig,
    ModelBundle,
    VARIANTS,
    forward,
    init_model,
    load_checkpoint,
    loss_and_grads,
    predict_tags,
    save_checkpoint,
)
from .optim import LrSchedule, OptimizerState, TrialConfig, lr_at, make_optimizer, step
from .report import ComparisonTable, ExperimentManifest, pca_projection
from .trainer import TrainConfig, TrainLog, evaluate_loss, train
from .turkish_text import normalize_sample, turkish_lowercase

__version__ = "0.1.0"
