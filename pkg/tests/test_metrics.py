import numpy as np
import pytest

from setfusion.metrics import MetricSet, compute_metrics
from setfusion.rng import SeededRng


def oracle_metrics(scores, positive_class=1):
    """Independent reference: explicit confusion table and pair counting."""
    tp = fp = fn = tn = 0
    for p, y in scores:
        predicted_pos = p >= 0.5
        actually_pos = y == positive_class
        if predicted_pos and actually_pos:
            tp += 1
        elif predicted_pos:
            fp += 1
        elif actually_pos:
            fn += 1
        else:
            tn += 1
    n = len(scores)
    out = {"accuracy": (tp + tn) / n}
    out["precision"] = tp / (tp + fp) if tp + fp else 0.0
    out["recall"] = tp / (tp + fn) if tp + fn else 0.0
    if (tp + fp) and (tp + fn) and (out["precision"] + out["recall"]):
        out["f1"] = 2 * out["precision"] * out["recall"] / (out["precision"] + out["recall"])
    else:
        out["f1"] = 0.0
    pos = [p for p, y in scores if y == positive_class]
    neg = [p for p, y in scores if y != positive_class]
    if pos and neg:
        wins = sum(1.0 if pp > pn else 0.5 if pp == pn else 0.0 for pp in pos for pn in neg)
        out["auc"] = wins / (len(pos) * len(neg))
    else:
        out["auc"] = 0.0
    return out


class TestHandValues:
    def test_perfect_scores(self):
        scores = [(0.9, 1), (0.8, 1), (0.1, 0), (0.2, 0)]
        m = compute_metrics(scores)
        assert (m.accuracy, m.auc, m.f1, m.precision, m.recall) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_inverted_scores_auc_zero(self):
        m = compute_metrics([(0.9, 0), (0.1, 1)])
        assert m.auc == 0.0

    def test_worked_example(self):
        scores = [(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]
        m = compute_metrics(scores)
        assert m.auc == pytest.approx(0.75)
        assert m.accuracy == pytest.approx(0.75)
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(1.0)
        assert m.f1 == pytest.approx(0.8)

    def test_single_class_truth_flags_auc_undefined(self):
        m = compute_metrics([(0.9, 1), (0.8, 1)])
        assert not m.auc_defined and m.auc == 0.0
        assert m.accuracy == 1.0 and m.recall == 1.0

    def test_no_positive_predictions_flags_precision(self):
        m = compute_metrics([(0.1, 1), (0.2, 0)])
        assert not m.precision_defined and m.precision == 0.0
        assert m.recall_defined and m.recall == 0.0
        assert not m.f1_defined

    def test_ties_share_midranks(self):
        # one tied pos/neg pair counts half
        m = compute_metrics([(0.5, 1), (0.5, 0)])
        assert m.auc == pytest.approx(0.5)

    def test_empty_and_multiclass_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics([])
        with pytest.raises(ValueError):
            compute_metrics([(0.5, 0), (0.5, 1), (0.5, 2)])

    def test_positive_class_zero(self):
        m = compute_metrics([(0.9, 0), (0.1, 1)], positive_class=0)
        assert m.accuracy == 1.0 and m.auc == 1.0


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(100))
    def test_exact_match_on_random_fixtures(self, seed):
        rng = SeededRng(seed)
        n = int(rng.integers(2, 201))
        # quantized probabilities produce plenty of exact ties
        probs = np.round(rng.uniform(0.0, 1.0, n), 2)
        labels = rng.integers(0, 2, n)
        scores = list(zip(probs.tolist(), labels.tolist()))
        m = compute_metrics(scores)
        ref = oracle_metrics(scores)
        for name, value in ref.items():
            assert m.value(name) == value, f"{name} mismatch at seed {seed}"

    @pytest.mark.parametrize("seed", range(20))
    def test_f1_harmonic_identity(self, seed):
        rng = SeededRng((seed, "f1"))
        n = int(rng.integers(5, 100))
        scores = list(zip(rng.uniform(0, 1, n).tolist(), rng.integers(0, 2, n).tolist()))
        m = compute_metrics(scores)
        if m.f1_defined:
            assert m.f1 == pytest.approx(
                2 * m.precision * m.recall / (m.precision + m.recall), abs=1e-15
            )


class TestMetricSetInvariants:
    def test_values_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            MetricSet(accuracy=1.2, auc=0, f1=0, precision=0, recall=0,
                      n_eval=1, positive_class=1)
