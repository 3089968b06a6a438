"""Command-line entry points: generate, train, hpo, evaluate, compare, plot.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from .data import (
    DatasetSplits,
    TagSchema,
    default_schema,
    dump_schema,
    generate_dataset,
    label_histogram,
    load_schema,
    parse_conll,
    split_dataset,
    write_conll,
)
from .encoding import build_vocab, dump_vocab, load_vocab
from .errors import AdreskitError
from .evalmetrics import evaluate, report_csv, report_markdown
from .hpo import SearchSpace, best_config, run_study, study_csv
from .model import (
    VARIANTS,
    HeadConfig,
    export_representations,
    init_model,
    load_checkpoint,
    predict_tags,
    representations_csv,
    save_checkpoint,
)
from .optim import OPTIMIZER_KINDS, TrialConfig
from .report import (
    ComparisonRow,
    ComparisonTable,
    ExperimentManifest,
    comparison_row,
    head_observation,
    load_manifest,
    pca_projection,
    plot_head_comparison,
    plot_label_histogram,
)
from .trainer import TrainConfig, train

LINEAGE_FILE = "lineage.txt"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))


def _schema_from_arg(path: Optional[str]) -> TagSchema:
    if path is None or path == "default":
        return default_schema()
    return load_schema(Path(path).read_text(encoding="utf-8"))


def _read_splits(data_dir: Path, schema: TagSchema) -> DatasetSplits:
    def read(name: str):
        return parse_conll(Path(data_dir, name).read_text(encoding="utf-8"), schema)

    return DatasetSplits(train=read("train.conll"),
                         validation=read("validation.conll"),
                         test=read("test.conll"))


def _histogram_csv(hist: dict) -> str:
    rows = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))
    return "tag,count\n" + "".join(f"{t},{c}\n" for t, c in rows)


def _read_histogram_csv(text: str) -> dict:
    hist = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        tag, _, count = line.partition(",")
        hist[tag] = int(count)
    return hist


def _split_role(gold_path: Path) -> Optional[str]:
    lineage = gold_path.parent / LINEAGE_FILE
    if not lineage.exists():
        return None
    for line in lineage.read_text(encoding="utf-8").splitlines():
        name, _, role = line.partition("\t")
        if name == gold_path.name:
            return role
    return None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    schema = _schema_from_arg(args.schema)
    samples = generate_dataset(args.seed, args.size, schema)
    splits = split_dataset(samples, args.split_seed if args.split_seed is not None else args.seed)
    out = Path(args.out)
    _write(out / "train.conll", write_conll(splits.train))
    _write(out / "validation.conll", write_conll(splits.validation))
    _write(out / "test.conll", write_conll(splits.test))
    _write(out / "histogram.csv", _histogram_csv(label_histogram(samples)))
    _write(out / "schema.txt", dump_schema(schema))
    _write(out / LINEAGE_FILE,
           "train.conll\ttrain\nvalidation.conll\tvalidation\ntest.conll\ttest\n")
    print(f"wrote {len(splits.train)}/{len(splits.validation)}/{len(splits.test)} "
          f"samples to {out}")
    return 0


def _trial_from_args(args) -> TrialConfig:
    return TrialConfig(learning_rate=args.lr, batch_size=args.batch_size,
                       optimizer=args.optimizer, weight_decay=args.weight_decay,
                       trial_seed=args.seed)


def cmd_train(args) -> int:
    schema = _schema_from_arg(args.schema)
    splits = _read_splits(Path(args.data), schema)
    vocab = build_vocab(splits.train, args.min_count)
    trial = _trial_from_args(args)
    bundle = init_model(VARIANTS[args.variant], HeadConfig(kind=args.head),
                        schema, vocab, seed=args.seed)
    tc = TrainConfig(max_epochs=args.epochs, patience=args.patience)
    best, log = train(bundle, splits, vocab, schema, trial, tc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(best, out / "best.ckpt")
    _write(out / "trainlog.csv", log.to_csv())
    _write(out / "vocab.txt", dump_vocab(vocab))
    print(f"best epoch {log.best_epoch} of {log.stopped_epoch}, "
          f"val loss {log.best_val_loss:.4f}; artifacts in {out}")
    return 0


def cmd_hpo(args) -> int:
    schema = _schema_from_arg(args.schema)
    splits = _read_splits(Path(args.data), schema)
    vocab = build_vocab(splits.train, args.min_count)
    tc = TrainConfig(max_epochs=args.epochs, patience=args.patience)

    def progress(rec):
        loss = "failed" if rec.status == "failed" else f"{rec.best_val_loss:.4f}"
        print(f"  trial {rec.index:2d}: {loss}")

    sr = run_study(VARIANTS[args.variant], HeadConfig(kind=args.head), splits,
                   vocab, schema, SearchSpace(), n_trials=args.trials,
                   master_seed=args.master_seed, tc=tc,
                   progress=progress if args.verbose else None)
    out = Path(args.out)
    _write(out / "study.csv", study_csv(sr))
    cfg = best_config(sr)
    _write(out / "best_trial.txt",
           f"trial={sr.best_trial}\nlearning_rate={cfg.learning_rate!r}\n"
           f"batch_size={cfg.batch_size}\noptimizer={cfg.optimizer}\n"
           f"weight_decay={cfg.weight_decay!r}\ntrial_seed={cfg.trial_seed}\n")
    print(f"best trial {sr.best_trial}: val loss "
          f"{sr.records[sr.best_trial].best_val_loss:.4f}; study in {out}")
    return 0


def cmd_evaluate(args) -> int:
    schema = _schema_from_arg(args.schema)
    gold_path = Path(args.gold)
    role = _split_role(gold_path)
    if role == "train":
        print(f"error: {gold_path} is tagged as a train split in "
              f"{LINEAGE_FILE}; evaluation on training data is refused",
              file=sys.stderr)
        return 2
    gold = parse_conll(gold_path.read_text(encoding="utf-8"), schema)
    gold_tags = [list(s.tags) for s in gold]

    if args.pred is not None:
        pred = parse_conll(Path(args.pred).read_text(encoding="utf-8"))
        pred_tags: List[list] = [list(s.tags) for s in pred]
    else:
        if args.checkpoint is None:
            print("error: need --pred or --checkpoint", file=sys.stderr)
            return 1
        bundle, _ = load_checkpoint(args.checkpoint)
        vocab_path = Path(args.vocab) if args.vocab else Path(args.checkpoint).parent / "vocab.txt"
        vocab = load_vocab(vocab_path.read_text(encoding="utf-8"))
        if vocab.content_hash() != bundle.vocab_hash:
            print(f"error: vocabulary {vocab_path} does not match the checkpoint",
                  file=sys.stderr)
            return 2
        pred_tags = predict_tags(bundle, gold, vocab, schema)
        if args.export_reps:
            reps, rep_tags = export_representations(bundle, gold, vocab, schema)
            _write(Path(args.export_reps), representations_csv(reps, rep_tags))

    report = evaluate(gold_tags, pred_tags, schema)
    out = Path(args.out)
    _write(out / "report.csv", report_csv(report))
    _write(out / "report.md", report_markdown(report, name=args.name))
    print(f"sample accuracy {report.sample_accuracy:.2f}% | "
          f"token accuracy {report.token_accuracy:.2f}% | "
          f"macro P/R/F1 {report.macro_precision:.3f}/"
          f"{report.macro_recall:.3f}/{report.macro_f1:.3f}")
    return 0


def run_comparison(man: ExperimentManifest) -> Tuple[ComparisonTable, str]:
    """Train every (variant, head) pair per the manifest and emit artifacts."""
    schema = _schema_from_arg(man.schema_path)
    if man.train_path:
        splits = DatasetSplits(
            train=parse_conll(Path(man.train_path).read_text(encoding="utf-8"), schema),
            validation=parse_conll(Path(man.validation_path).read_text(encoding="utf-8"), schema),
            test=parse_conll(Path(man.test_path).read_text(encoding="utf-8"), schema),
        )
    else:
        samples = generate_dataset(man.generator_seed, man.size, schema)
        splits = split_dataset(samples, man.split_seed)
    vocab = build_vocab(splits.train, man.min_count)
    out = Path(man.out_dir)
    _write(out / "vocab.txt", dump_vocab(vocab))
    tc = TrainConfig(max_epochs=man.max_epochs, patience=man.patience)

    table = ComparisonTable()
    gold_tags = [list(s.tags) for s in splits.test]
    for variant in man.variants:
        ec = VARIANTS[variant]
        for head in man.heads:
            hc = HeadConfig(kind=head)
            run_name = f"{variant}_{head}"
            if man.trials > 0:
                sr = run_study(ec, hc, splits, vocab, schema, SearchSpace(),
                               n_trials=man.trials, master_seed=man.master_seed, tc=tc)
                cfg = best_config(sr)
                trial_id = f"t{sr.best_trial:02d}"
                _write(out / "runs" / run_name / "study.csv", study_csv(sr))
            else:
                cfg = TrialConfig(learning_rate=man.learning_rate,
                                  batch_size=man.batch_size,
                                  optimizer=man.optimizer,
                                  weight_decay=man.weight_decay,
                                  trial_seed=man.master_seed)
                trial_id = "fixed"
            bundle = init_model(ec, hc, schema, vocab, seed=cfg.trial_seed)
            best, log = train(bundle, splits, vocab, schema, cfg, tc)
            run_dir = out / "runs" / run_name / trial_id
            run_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(best, run_dir / "best.ckpt")
            _write(run_dir / "trainlog.csv", log.to_csv())
            pred = predict_tags(best, splits.test, vocab, schema)
            rep = evaluate(gold_tags, pred, schema)
            _write(run_dir / "report.csv", report_csv(rep))
            table.rows.append(comparison_row(variant, head, rep))
            print(f"{run_name}: token accuracy {rep.token_accuracy / 100.0:.3f}")

    observation = head_observation(table, man.variants)
    _write(out / "comparison.csv", table.to_csv())
    _write(out / "comparison.md", table.to_markdown() + "\n" + observation)
    _write(out / "observations.txt", observation)
    if all(table.find(v, "linear") and table.find(v, "mlp") for v in table.variants()):
        _write(out / "head_comparison.svg", plot_head_comparison(table))
    return table, observation


def cmd_compare(args) -> int:
    if args.manifest:
        man = load_manifest(args.manifest)
    else:
        man = ExperimentManifest(
            generator_seed=args.seed, size=args.size, split_seed=args.seed,
            schema_path=args.schema, variants=tuple(args.variants.split(",")),
            heads=tuple(args.heads.split(",")), trials=args.trials,
            learning_rate=args.lr, batch_size=args.batch_size,
            optimizer=args.optimizer, weight_decay=args.weight_decay,
            master_seed=args.master_seed, max_epochs=args.epochs,
            patience=args.patience, min_count=args.min_count, out_dir=args.out,
        )
        if args.data:
            man.train_path = str(Path(args.data) / "train.conll")
            man.validation_path = str(Path(args.data) / "validation.conll")
            man.test_path = str(Path(args.data) / "test.conll")
    _, observation = run_comparison(man)
    print(observation, end="")
    return 0


def cmd_plot(args) -> int:
    text = Path(args.infile).read_text(encoding="utf-8")
    if args.kind == "histogram":
        svg = plot_label_histogram(_read_histogram_csv(text))
    elif args.kind == "heads":
        rows = []
        for line in text.splitlines()[1:]:
            if not line.strip():
                continue
            v, h, p, r, f1, sa, ta = line.split(",")
            rows.append(ComparisonRow(v, h, float(p), float(r), float(f1),
                                      float(sa), float(ta)))
        svg = plot_head_comparison(ComparisonTable(rows))
    else:  # pca
        import numpy as np

        lines = [ln for ln in text.splitlines()[1:] if ln.strip()]
        reps = np.array([[float(v) for v in ln.split(",")[:-1]] for ln in lines])
        tags = [ln.split(",")[-1] for ln in lines]
        _, svg = pca_projection(reps, tags)
    _write(Path(args.out), svg)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adreskit",
        description="Turkish address parsing toolkit: data generation, "
                    "training, hyperparameter search, evaluation, plots.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic CoNLL dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=1248)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--schema", default=None, help="schema file (default: built-in)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one (variant, head) model")
    p.add_argument("--data", required=True, help="directory with the three CoNLL splits")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="base")
    p.add_argument("--head", choices=["linear", "mlp"], default="linear")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--optimizer", choices=OPTIMIZER_KINDS, default="adamw")
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hpo", help="random-search study over the search space")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=sorted(VARIANTS), default="base")
    p.add_argument("--head", choices=["linear", "mlp"], default="linear")
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--schema", default=None)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("evaluate", help="score predictions against gold tags")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", default=None, help="predicted CoNLL file")
    p.add_argument("--checkpoint", default=None, help="model checkpoint to predict with")
    p.add_argument("--vocab", default=None, help="vocab file (default: next to checkpoint)")
    p.add_argument("--export-reps", default=None, help="also write token representations CSV")
    p.add_argument("--schema", default=None)
    p.add_argument("--name", default="model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="train all variant/head pairs and tabulate")
    p.add_argument("--manifest", default=None, help="experiment manifest file")
    p.add_argument("--data", default=None, help="existing split directory (else generated)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=1248)
    p.add_argument("--variants", default="small,distil,base")
    p.add_argument("--heads", default="linear,mlp")
    p.add_argument("--trials", type=int, default=0, help="HPO trials per pair (0: fixed config)")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--optimizer", choices=OPTIMIZER_KINDS, default="adamw")
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--master-seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render an SVG chart from a CSV artifact")
    p.add_argument("--kind", choices=["histogram", "heads", "pca"], required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def cli_run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except AdreskitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_run(sys.argv[1:]))


if __name__ == "__main__":
    main()
