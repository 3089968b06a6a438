"""The five evaluation metrics over a tag-level confusion matrix.

Scoring is token-level over the full IOB tag inventory (not entity-span
level). Per-sample accuracy is all-or-nothing per query; per-token accuracy
pools tokens across queries; precision/recall/F1 are computed per tag and
macro-averaged with the label count as denominator, counting tags that never
occur (their scores are 0 under the zero-division convention).
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from .data import TagSchema
from .errors import AlignmentError, EmptyEval

TagSeq = Sequence[Union[int, str]]


def _to_ids(seqs: Sequence[TagSeq], schema: TagSchema) -> List[List[int]]:
    index = schema.tag_index
    out = []
    for seq in seqs:
        out.append([t if isinstance(t, int) else index[t] for t in seq])
    return out


def _check_aligned(gold: Sequence[TagSeq], pred: Sequence[TagSeq]) -> None:
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold sequences vs {len(pred)} predicted")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise AlignmentError(f"sequence {i}: {len(g)} gold tags vs {len(p)} predicted")


@dataclass
class ConfusionMatrix:
    """Counts indexed [gold tag, predicted tag] over the schema inventory."""

    matrix: np.ndarray
    tags: Tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def tp(self, i: int) -> int:
        return int(self.matrix[i, i])

    def fp(self, i: int) -> int:
        return int(self.matrix[:, i].sum() - self.matrix[i, i])

    def fn(self, i: int) -> int:
        return int(self.matrix[i, :].sum() - self.matrix[i, i])


def confusion(gold: Sequence[TagSeq], pred: Sequence[TagSeq],
              schema: TagSchema) -> ConfusionMatrix:
    """Tally every token into the gold-row, predicted-column cell."""
    _check_aligned(gold, pred)
    tags = schema.tags
    n = len(tags)
    m = np.zeros((n, n), dtype=np.int64)
    for g_seq, p_seq in zip(_to_ids(gold, schema), _to_ids(pred, schema)):
        for g, p in zip(g_seq, p_seq):
            m[g, p] += 1
    return ConfusionMatrix(matrix=m, tags=tags)


def sample_accuracy(gold: Sequence[TagSeq], pred: Sequence[TagSeq]) -> float:
    """Percentage of queries whose every token is labeled correctly."""
    _check_aligned(gold, pred)
    if not gold:
        raise EmptyEval("no samples to evaluate")
    correct = sum(1 for g, p in zip(gold, pred) if all(a == b for a, b in zip(g, p)))
    return 100.0 * correct / len(gold)


def token_accuracy(gold: Sequence[TagSeq], pred: Sequence[TagSeq]) -> float:
    """Percentage of correctly labeled tokens, pooled across queries."""
    _check_aligned(gold, pred)
    total = sum(len(g) for g in gold)
    if total == 0:
        raise EmptyEval("no tokens to evaluate")
    correct = sum(sum(1 for a, b in zip(g, p) if a == b) for g, p in zip(gold, pred))
    return 100.0 * correct / total


class TagScore(NamedTuple):
    tag: str
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    precision_defined: bool
    recall_defined: bool
    f1_defined: bool


def macro_scores(cm: ConfusionMatrix):
    """Per-tag precision/recall/F1 and their unweighted means over all tags.

    Zero denominators yield 0 with the matching ``*_defined`` flag cleared;
    the macro means always divide by the full label count.
    """
    table: List[TagScore] = []
    for i, tag in enumerate(cm.tags):
        tp, fp, fn = cm.tp(i), cm.fp(i), cm.fn(i)
        p_def, r_def = tp + fp > 0, tp + fn > 0
        p = tp / (tp + fp) if p_def else 0.0
        r = tp / (tp + fn) if r_def else 0.0
        f_def = p + r > 0
        f = 2.0 * p * r / (p + r) if f_def else 0.0
        table.append(TagScore(tag, tp, fp, fn, p, r, f, p_def, r_def, f_def))
    n = len(cm.tags)
    macro_p = sum(s.precision for s in table) / n
    macro_r = sum(s.recall for s in table) / n
    macro_f1 = sum(s.f1 for s in table) / n
    return macro_p, macro_r, macro_f1, table


@dataclass
class EvalReport:
    sample_accuracy: float  # percent
    token_accuracy: float  # percent
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_tag: List[TagScore]
    confusion: ConfusionMatrix
    n_samples: int
    n_tokens: int
    n_labels: int


def evaluate(gold: Sequence[TagSeq], pred: Sequence[TagSeq],
             schema: TagSchema) -> EvalReport:
    """Full report: both accuracies, macro scores, and the confusion matrix.

    Tags may be given as names or schema ids, mixed freely between the two
    arguments; everything is mapped to ids before comparison.
    """
    _check_aligned(gold, pred)
    gold = _to_ids(gold, schema)
    pred = _to_ids(pred, schema)
    cm = confusion(gold, pred, schema)
    macro_p, macro_r, macro_f1, table = macro_scores(cm)
    return EvalReport(
        sample_accuracy=sample_accuracy(gold, pred),
        token_accuracy=token_accuracy(gold, pred),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        per_tag=table,
        confusion=cm,
        n_samples=len(gold),
        n_tokens=cm.total,
        n_labels=len(schema.tags),
    )


def report_csv(report: EvalReport) -> str:
    """One row per tag plus summary rows."""
    lines = ["row,tag,tp,fp,fn,precision,recall,f1\n"]
    for s in report.per_tag:
        lines.append(f"tag,{s.tag},{s.tp},{s.fp},{s.fn},"
                     f"{s.precision!r},{s.recall!r},{s.f1!r}\n")
    lines.append(f"summary,macro_precision,,,,{report.macro_precision!r},,\n")
    lines.append(f"summary,macro_recall,,,,,{report.macro_recall!r},\n")
    lines.append(f"summary,macro_f1,,,,,,{report.macro_f1!r}\n")
    lines.append(f"summary,sample_accuracy_pct,,,,{report.sample_accuracy!r},,\n")
    lines.append(f"summary,token_accuracy_pct,,,,{report.token_accuracy!r},,\n")
    return "".join(lines)


def report_markdown(report: EvalReport, name: str = "model") -> str:
    """Single-row table in the comparison-table column layout."""
    header = ("| Model | Precision (macro) | Recall (macro) | F1 (macro) "
              "| Accuracy (Per Sample) | Accuracy (Per Token) |\n"
              "|---|---|---|---|---|---|\n")
    row = (f"| {name} | {report.macro_precision:.3f} | {report.macro_recall:.3f} "
           f"| {report.macro_f1:.3f} | {report.sample_accuracy / 100.0:.3f} "
           f"| {report.token_accuracy / 100.0:.3f} |\n")
    return header + row
