import random

import numpy as np
import pytest

from adreskit.data import TagSchema
from adreskit.errors import AlignmentError, EmptyEval
from adreskit.evalmetrics import (
    confusion,
    evaluate,
    macro_scores,
    report_csv,
    report_markdown,
    sample_accuracy,
    token_accuracy,
)
from oracles import naive_metrics


def _random_instance(rng, schema, n_samples=40, max_len=8):
    tags = schema.tags
    gold, pred = [], []
    for _ in range(n_samples):
        n = rng.randint(1, max_len)
        g = [rng.choice(tags) for _ in range(n)]
        # predictions agree with gold part of the time so TP cells fill up
        p = [t if rng.random() < 0.6 else rng.choice(tags) for t in g]
        gold.append(g)
        pred.append(p)
    return gold, pred


class TestConfusion:
    def test_perfect_agreement_is_diagonal(self, schema):
        gold = [["B-POI", "I-POI", "O"]]
        cm = confusion(gold, gold, schema)
        assert cm.total == 3
        assert np.array_equal(cm.matrix, np.diag(np.diag(cm.matrix)))

    def test_single_error_cell(self, schema):
        cm = confusion([["B-CITY"]], [["O"]], schema)
        i, j = schema.tag_index["B-CITY"], schema.tag_index["O"]
        assert cm.matrix[i, j] == 1
        assert cm.fp(j) == 1
        assert cm.fn(i) == 1
        assert cm.tp(i) == 0

    def test_matches_naive_tally(self, schema):
        rng = random.Random(0)
        gold, pred = _random_instance(rng, schema, n_samples=40, max_len=5)
        cm = confusion(gold, pred, schema)
        assert cm.total == sum(len(g) for g in gold)
        for i, tag in enumerate(schema.tags):
            tp = sum(1 for g, p in zip(_flat(gold), _flat(pred)) if g == tag and p == tag)
            fp = sum(1 for g, p in zip(_flat(gold), _flat(pred)) if g != tag and p == tag)
            fn = sum(1 for g, p in zip(_flat(gold), _flat(pred)) if g == tag and p != tag)
            assert (cm.tp(i), cm.fp(i), cm.fn(i)) == (tp, fp, fn)

    def test_marginals(self, schema):
        rng = random.Random(1)
        gold, pred = _random_instance(rng, schema)
        cm = confusion(gold, pred, schema)
        for i in range(len(schema.tags)):
            assert cm.tp(i) + cm.fn(i) == cm.matrix[i, :].sum()
            assert cm.tp(i) + cm.fp(i) == cm.matrix[:, i].sum()

    def test_alignment_checked(self, schema):
        with pytest.raises(AlignmentError):
            confusion([["O"]], [["O", "O"]], schema)
        with pytest.raises(AlignmentError):
            confusion([["O"]], [], schema)


def _flat(seqs):
    return [t for s in seqs for t in s]


class TestAccuracies:
    def test_eight_of_ten_samples(self):
        gold = [["O", "O"]] * 10
        pred = [["O", "O"]] * 8 + [["O", "B-X"], ["B-X", "O"]]
        assert sample_accuracy(gold, pred) == 80.0

    def test_all_samples_perfect(self):
        gold = [["O"], ["B-POI", "I-POI"]]
        assert sample_accuracy(gold, gold) == 100.0

    def test_one_wrong_token_zeroes_the_sample(self):
        gold = [["O", "O", "O"]]
        pred = [["O", "B-X", "O"]]
        assert sample_accuracy(gold, pred) == 0.0

    def test_five_of_ten_tokens(self):
        gold = [["A"] * 6, ["A"] * 4]
        pred = [["A", "A", "A", "B", "B", "B"], ["A", "A", "B", "B"]]
        assert token_accuracy(gold, pred) == 50.0

    def test_identical_sequences(self):
        gold = [["A", "B", "C"]]
        assert token_accuracy(gold, gold) == 100.0

    def test_disjoint_predictions(self):
        assert token_accuracy([["A", "A"]], [["B", "B"]]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyEval):
            sample_accuracy([], [])
        with pytest.raises(EmptyEval):
            token_accuracy([], [])


class TestMacro:
    def test_perfect_diagonal_with_every_tag_present(self, schema):
        gold = [list(schema.tags)]  # one sequence containing every tag once
        cm = confusion(gold, gold, schema)
        macro_p, macro_r, macro_f1, _ = macro_scores(cm)
        assert macro_p == macro_r == macro_f1 == 1.0

    def test_two_tag_toy_hand_values(self):
        toy = TagSchema(entity_types=("A", "B"), multi_token=frozenset())
        gold = [["B-A", "B-A", "B-B", "B-B"]]
        pred = [["B-A", "B-B", "B-B", "B-B"]]
        cm = confusion(gold, pred, toy)
        _, _, _, table = macro_scores(cm)
        scores = {s.tag: s for s in table}
        a, b = scores["B-A"], scores["B-B"]
        assert (a.tp, a.fn, a.fp) == (1, 1, 0)
        assert a.precision == pytest.approx(1.0)
        assert a.recall == pytest.approx(0.5)
        assert a.f1 == pytest.approx(2.0 / 3.0)
        assert (b.tp, b.fp) == (2, 1)
        assert b.precision == pytest.approx(2.0 / 3.0)
        assert b.recall == pytest.approx(1.0)
        assert b.f1 == pytest.approx(0.8)

    def test_macro_f1_is_mean_of_per_tag_f1(self, schema):
        rng = random.Random(2)
        gold, pred = _random_instance(rng, schema)
        cm = confusion(gold, pred, schema)
        macro_p, macro_r, macro_f1, table = macro_scores(cm)
        assert macro_f1 == pytest.approx(sum(s.f1 for s in table) / 25, abs=1e-15)
        harmonic = 2 * macro_p * macro_r / (macro_p + macro_r)
        assert macro_f1 != pytest.approx(harmonic, abs=1e-6)

    def test_zero_division_convention(self, schema):
        # only O appears; the other 24 tags have empty rows and columns
        cm = confusion([["O"]], [["O"]], schema)
        macro_p, _, macro_f1, table = macro_scores(cm)
        absent = [s for s in table if s.tag != "O"]
        assert all(s.precision == s.recall == s.f1 == 0.0 for s in absent)
        assert all(not s.precision_defined and not s.f1_defined for s in absent)
        assert macro_p == pytest.approx(1.0 / 25)
        assert macro_f1 == pytest.approx(1.0 / 25)


class TestReport:
    def test_matches_independent_oracle(self, schema):
        rng = random.Random(3)
        for trial in range(30):
            gold, pred = _random_instance(rng, schema)
            report = evaluate(gold, pred, schema)
            want = naive_metrics(gold, pred, schema.tags)
            assert report.sample_accuracy == pytest.approx(want["sample_accuracy"], abs=1e-12)
            assert report.token_accuracy == pytest.approx(want["token_accuracy"], abs=1e-12)
            assert report.macro_precision == pytest.approx(want["macro_precision"], abs=1e-12)
            assert report.macro_recall == pytest.approx(want["macro_recall"], abs=1e-12)
            assert report.macro_f1 == pytest.approx(want["macro_f1"], abs=1e-12)

    def test_token_accuracy_equals_trace_over_total(self, schema):
        rng = random.Random(4)
        gold, pred = _random_instance(rng, schema)
        report = evaluate(gold, pred, schema)
        cm = report.confusion
        assert report.token_accuracy == pytest.approx(
            100.0 * np.trace(cm.matrix) / cm.total, abs=1e-12)

    def test_permutation_invariance(self, schema):
        rng = random.Random(5)
        gold, pred = _random_instance(rng, schema)
        a = evaluate(gold, pred, schema)
        order = list(range(len(gold)))
        random.Random(6).shuffle(order)
        b = evaluate([gold[i] for i in order], [pred[i] for i in order], schema)
        assert a.sample_accuracy == b.sample_accuracy
        assert a.token_accuracy == b.token_accuracy
        assert a.macro_precision == b.macro_precision
        assert a.macro_recall == b.macro_recall
        assert a.macro_f1 == b.macro_f1

    def test_accepts_ids_and_names_mixed(self, schema):
        gold = [["B-CITY", "O"]]
        pred_ids = [[schema.tag_index["B-CITY"], schema.tag_index["O"]]]
        report = evaluate(gold, pred_ids, schema)
        assert report.token_accuracy == 100.0

    def test_csv_has_tag_rows_and_summary(self, schema):
        report = evaluate([["O"]], [["O"]], schema)
        lines = report_csv(report).splitlines()
        assert lines[0] == "row,tag,tp,fp,fn,precision,recall,f1"
        assert sum(1 for ln in lines if ln.startswith("tag,")) == 25
        assert sum(1 for ln in lines if ln.startswith("summary,")) == 5

    def test_markdown_layout(self, schema):
        report = evaluate([["O"]], [["O"]], schema)
        md = report_markdown(report, name="tiny")
        assert "Accuracy (Per Token)" in md
        assert "| tiny |" in md
