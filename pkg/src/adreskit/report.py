"""Comparison tables, SVG charts, PCA projection, and the experiment manifest.

All emission is deterministic down to the byte: charts are hand-built SVG
strings with fixed number formatting, and tables use repr() for full-precision
values, so identical inputs always serialize identically.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInput, EmptyInput, PairingError
from .evalmetrics import EvalReport

_PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#d62728",
    "#2ca02c", "#9467bd", "#8c564b", "#17becf",
]


def _svg_doc(width: float, height: float, body: List[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
            f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">\n')
    return head + "".join(body) + "</svg>\n"


def _rect(x, y, w, h, color) -> str:
    return (f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{color}"/>\n')


def _text(x, y, s, size=11, anchor="middle", rotate=None) -> str:
    transform = f' transform="rotate(-45 {x:.2f} {y:.2f})"' if rotate else ""
    return (f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}"{transform}>{s}</text>\n')


def _line(x1, y1, x2, y2) -> str:
    return (f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="#333" stroke-width="1"/>\n')


def entity_histogram(hist: Dict[str, int]) -> Dict[str, int]:
    """Collapse IOB tag counts to entity-type counts; O stays its own bucket."""
    out: Dict[str, int] = {}
    for tag, count in hist.items():
        key = tag if tag == "O" else tag[2:]
        out[key] = out.get(key, 0) + count
    return out


def plot_label_histogram(hist: Dict[str, int]) -> str:
    """Descending bar chart of label frequencies, one bar per entity type."""
    if not hist:
        raise EmptyInput("histogram is empty")
    counts = sorted(entity_histogram(hist).items(), key=lambda kv: (-kv[1], kv[0]))
    top = max(c for _, c in counts)
    bar_w, gap = 30.0, 12.0
    left, bottom, ch = 56.0, 96.0, 240.0
    width = left + len(counts) * (bar_w + gap) + 20.0
    height = 20.0 + ch + bottom
    body: List[str] = []
    body.append(_line(left, 20.0, left, 20.0 + ch))
    body.append(_line(left, 20.0 + ch, width - 20.0, 20.0 + ch))
    body.append(_text(left - 6.0, 26.0, str(top), anchor="end"))
    body.append(_text(left - 6.0, 20.0 + ch, "0", anchor="end"))
    for j, (name, count) in enumerate(counts):
        x = left + gap / 2.0 + j * (bar_w + gap)
        h = ch * count / top
        body.append(_rect(x, 20.0 + ch - h, bar_w, h, _PALETTE[0]))
        body.append(_text(x + bar_w / 2.0, 14.0 + ch - h, str(count), size=9))
        body.append(_text(x + bar_w / 2.0, 36.0 + ch, name, size=10,
                          anchor="end", rotate=True))
    return _svg_doc(width, height, body)


# ---------------------------------------------------------------------------
# Comparison table
# ---------------------------------------------------------------------------


@dataclass
class ComparisonRow:
    variant: str
    head: str
    macro_precision: float
    macro_recall: float
    macro_f1: float
    sample_accuracy: float  # fraction in [0, 1]
    token_accuracy: float  # fraction in [0, 1]


@dataclass
class ComparisonTable:
    rows: List[ComparisonRow] = field(default_factory=list)

    def variants(self) -> List[str]:
        seen: List[str] = []
        for r in self.rows:
            if r.variant not in seen:
                seen.append(r.variant)
        return seen

    def find(self, variant: str, head: str) -> Optional[ComparisonRow]:
        for r in self.rows:
            if r.variant == variant and r.head == head:
                return r
        return None

    def to_csv(self) -> str:
        lines = ["variant,head,precision_macro,recall_macro,f1_macro,"
                 "accuracy_per_sample,accuracy_per_token\n"]
        for r in self.rows:
            lines.append(f"{r.variant},{r.head},{r.macro_precision!r},"
                         f"{r.macro_recall!r},{r.macro_f1!r},"
                         f"{r.sample_accuracy!r},{r.token_accuracy!r}\n")
        return "".join(lines)

    def to_markdown(self) -> str:
        lines = ["| Model | Precision (macro) | Recall (macro) | F1 (macro) "
                 "| Accuracy (Per Sample) | Accuracy (Per Token) |\n",
                 "|---|---|---|---|---|---|\n"]
        for r in self.rows:
            lines.append(f"| {r.variant}_{r.head} | {r.macro_precision:.3f} "
                         f"| {r.macro_recall:.3f} | {r.macro_f1:.3f} "
                         f"| {r.sample_accuracy:.3f} | {r.token_accuracy:.3f} |\n")
        return "".join(lines)


def comparison_row(variant: str, head: str, report: EvalReport) -> ComparisonRow:
    return ComparisonRow(
        variant=variant,
        head=head,
        macro_precision=report.macro_precision,
        macro_recall=report.macro_recall,
        macro_f1=report.macro_f1,
        sample_accuracy=report.sample_accuracy / 100.0,
        token_accuracy=report.token_accuracy / 100.0,
    )


def head_observation(table: ComparisonTable, variant_order: Sequence[str]) -> str:
    """Plain-language note on MLP vs linear heads; reported, never asserted."""
    lines = ["Observation (reported, not a pass/fail check):"]
    ordered = [v for v in variant_order if v in table.variants()]
    for v in ordered:
        lin, mlp = table.find(v, "linear"), table.find(v, "mlp")
        if lin is None or mlp is None:
            continue
        verdict = ("outperforms" if mlp.token_accuracy > lin.token_accuracy
                   else "does not outperform")
        lines.append(
            f"  {v}: MLP head per-token accuracy {mlp.token_accuracy:.3f} "
            f"{verdict} the linear head at {lin.token_accuracy:.3f}.")
    if ordered:
        v0 = ordered[0]
        lin, mlp = table.find(v0, "linear"), table.find(v0, "mlp")
        if lin is not None and mlp is not None:
            trend = "holds" if mlp.token_accuracy > lin.token_accuracy else "does not hold"
            lines.append(f"  For the smallest variant ({v0}), the double-layer-"
                         f"beats-single-layer trend {trend} on this run.")
    return "\n".join(lines) + "\n"


def plot_head_comparison(table: ComparisonTable) -> str:
    """Grouped bars of per-token accuracy, linear vs MLP per variant."""
    variants = table.variants()
    pairs = []
    for v in variants:
        lin, mlp = table.find(v, "linear"), table.find(v, "mlp")
        if lin is None or mlp is None:
            raise PairingError(f"variant {v!r} is missing one head kind")
        pairs.append((v, lin.token_accuracy, mlp.token_accuracy))
    if not pairs:
        raise PairingError("table has no variants")
    bar_w, gap, group_gap = 26.0, 4.0, 26.0
    left, ch = 56.0, 240.0
    group_w = 2 * bar_w + gap
    width = left + len(pairs) * (group_w + group_gap) + 120.0
    height = 20.0 + ch + 60.0
    body: List[str] = []
    body.append(_line(left, 20.0, left, 20.0 + ch))
    body.append(_line(left, 20.0 + ch, width - 110.0, 20.0 + ch))
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = 20.0 + ch * (1.0 - frac)
        body.append(_text(left - 6.0, y + 4.0, f"{frac:.2f}", anchor="end", size=10))
    for j, (name, lin_acc, mlp_acc) in enumerate(pairs):
        x0 = left + group_gap / 2.0 + j * (group_w + group_gap)
        for k, (acc, color) in enumerate(((lin_acc, _PALETTE[0]), (mlp_acc, _PALETTE[1]))):
            clamped = min(max(acc, 0.0), 1.0)
            h = ch * clamped
            x = x0 + k * (bar_w + gap)
            body.append(_rect(x, 20.0 + ch - h, bar_w, h, color))
            body.append(_text(x + bar_w / 2.0, 14.0 + ch - h, f"{clamped:.3f}", size=9))
        body.append(_text(x0 + group_w / 2.0, 40.0 + ch, name, size=11))
    lx = width - 100.0
    body.append(_rect(lx, 24.0, 12.0, 12.0, _PALETTE[0]))
    body.append(_text(lx + 18.0, 34.0, "linear", anchor="start"))
    body.append(_rect(lx, 44.0, 12.0, 12.0, _PALETTE[1]))
    body.append(_text(lx + 18.0, 54.0, "mlp", anchor="start"))
    return _svg_doc(width, height, body)


# ---------------------------------------------------------------------------
# PCA projection
# ---------------------------------------------------------------------------


def pca_projection(reps: np.ndarray, tags: Sequence[str]) -> Tuple[np.ndarray, str]:
    """Project token representations onto the top-2 principal components.

    Components are sign-fixed so each one's largest-magnitude loading is
    positive, which makes the output invariant under row permutation. Returns
    the [N, 2] coordinates and an SVG scatter colored by entity type.
    """
    reps = np.asarray(reps, dtype=np.float64)
    if reps.ndim != 2 or reps.shape[0] < 3 or reps.shape[1] < 2:
        raise ValueError("need at least 3 rows and 2 columns")
    if len(tags) != reps.shape[0]:
        raise ValueError("one tag per row required")
    centered = reps - reps.mean(axis=0)
    if not np.any(np.abs(centered) > 0.0):
        raise DegenerateInput("all rows identical; no variance to project")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2].copy()
    for k in range(2):
        j = int(np.argmax(np.abs(comps[k])))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    coords = centered @ comps.T
    return coords, _pca_svg(coords, tags)


def _pca_svg(coords: np.ndarray, tags: Sequence[str]) -> str:
    types = sorted({t if t == "O" else t[2:] for t in tags})
    color = {t: _PALETTE[i % len(_PALETTE)] for i, t in enumerate(types)}
    span = float(np.max(np.abs(coords)))
    span = span if span > 0 else 1.0
    size, margin = 420.0, 40.0
    scale = (size / 2.0 - margin) / span
    cx = cy = size / 2.0
    body: List[str] = []
    body.append(_line(margin, cy, size - margin, cy))
    body.append(_line(cx, margin, cx, size - margin))
    for (x, y), tag in zip(coords, tags):
        t = tag if tag == "O" else tag[2:]
        body.append(f'<circle cx="{cx + x * scale:.2f}" cy="{cy - y * scale:.2f}" '
                    f'r="3" fill="{color[t]}" fill-opacity="0.75"/>\n')
    for i, t in enumerate(types):
        y = 20.0 + 16.0 * i
        body.append(_rect(size + 10.0, y - 9.0, 10.0, 10.0, color[t]))
        body.append(_text(size + 26.0, y, t, anchor="start", size=10))
    return _svg_doc(size + 130.0, size, body)


# ---------------------------------------------------------------------------
# Experiment manifest
# ---------------------------------------------------------------------------


@dataclass
class ExperimentManifest:
    """Everything a comparison run needs; determines every output byte."""

    generator_seed: int = 42
    size: int = 1248
    split_seed: int = 42
    schema_path: Optional[str] = None
    train_path: Optional[str] = None
    validation_path: Optional[str] = None
    test_path: Optional[str] = None
    variants: Tuple[str, ...] = ("small", "distil", "base")
    heads: Tuple[str, ...] = ("linear", "mlp")
    trials: int = 0  # 0 runs the fixed config below instead of a study
    learning_rate: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adamw"
    weight_decay: float = 1e-4
    master_seed: int = 7
    max_epochs: int = 10
    patience: int = 2
    min_count: int = 1
    out_dir: str = "out"


_MANIFEST_KEYS = {
    ("data", "seed"): ("generator_seed", int),
    ("data", "size"): ("size", int),
    ("data", "split_seed"): ("split_seed", int),
    ("data", "schema"): ("schema_path", str),
    ("data", "train"): ("train_path", str),
    ("data", "validation"): ("validation_path", str),
    ("data", "test"): ("test_path", str),
    ("variants", "names"): ("variants", "csv"),
    ("variants", "heads"): ("heads", "csv"),
    ("train", "trials"): ("trials", int),
    ("train", "learning_rate"): ("learning_rate", float),
    ("train", "batch_size"): ("batch_size", int),
    ("train", "optimizer"): ("optimizer", str),
    ("train", "weight_decay"): ("weight_decay", float),
    ("train", "master_seed"): ("master_seed", int),
    ("train", "max_epochs"): ("max_epochs", int),
    ("train", "patience"): ("patience", int),
    ("train", "min_count"): ("min_count", int),
    ("output", "dir"): ("out_dir", str),
}


def parse_manifest(text: str) -> ExperimentManifest:
    """Line-oriented key=value format with [section] headers."""
    man = ExperimentManifest()
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"manifest line {line_no}: expected key=value, got {raw!r}")
        key, value = key.strip(), value.strip()
        try:
            attr, conv = _MANIFEST_KEYS[(section, key)]
        except KeyError:
            raise ValueError(f"manifest line {line_no}: unknown key "
                             f"{key!r} in section {section!r}") from None
        if conv == "csv":
            parsed = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            parsed = conv(value)
        setattr(man, attr, parsed)
    return man


def load_manifest(path) -> ExperimentManifest:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))
