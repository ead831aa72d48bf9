import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lungqa.classify_eval import (
    ConfusionMatrix,
    MetricsRow,
    PredictionFileError,
    confusion,
    metrics,
    read_predictions,
    reconstruct_counts,
)

labels = st.sampled_from(["normal", "abnormal"])
pairs = st.lists(st.tuples(labels, labels), min_size=1, max_size=60)


def test_all_correct():
    preds = [("abnormal", "abnormal")] * 3 + [("normal", "normal")] * 2
    assert confusion(preds) == ConfusionMatrix(tp=3, fp=0, fn=0, tn=2)


def test_all_flipped():
    cm = confusion([("abnormal", "normal"), ("normal", "abnormal"), ("Normal", "ABNORMAL")])
    assert cm.tp == cm.tn == 0
    assert (cm.fn, cm.fp) == (1, 2)


def test_mixed_twenty_hand_count():
    # hand-tallied: TP 6, FN 3, FP 4, TN 7
    preds = (
        [("abnormal", "abnormal")] * 6 + [("abnormal", "normal")] * 3
        + [("normal", "abnormal")] * 4 + [("normal", "normal")] * 7
    )
    random.Random(4).shuffle(preds)
    assert confusion(preds) == ConfusionMatrix(tp=6, fp=4, fn=3, tn=7)


def test_confusion_errors():
    with pytest.raises(ValueError):
        confusion([])
    with pytest.raises(ValueError):
        confusion([("covid", "normal")])


def test_metrics_perfect():
    m = metrics(ConfusionMatrix(10, 0, 0, 10))
    assert m.as_tuple() == (1.0, 1.0, 1.0, 1.0)
    assert m.undefined == ()


def test_metrics_arithmetic():
    m = metrics(ConfusionMatrix(tp=8, fp=2, fn=1, tn=9))
    assert m.precision == pytest.approx(0.8, abs=1e-12)
    assert m.sensitivity == pytest.approx(8 / 9, abs=1e-12)
    assert m.f1 == pytest.approx(16 / 19, abs=1e-12)
    assert m.accuracy == pytest.approx(0.85, abs=1e-12)
    assert round(m.sensitivity, 4) == 0.8889 and round(m.f1, 4) == 0.8421


def test_f1_from_published_precision_and_sensitivity():
    # the harmonic mean of the already-rounded values gives 0.93849; the
    # published 0.939 comes from the underlying counts
    p, s = 0.942, 0.935
    assert abs(2 * p * s / (p + s) - 0.939) <= 0.001
    assert round(metrics(ConfusionMatrix(649, 40, 45, 845)).f1, 3) == 0.939


def test_zero_denominators_flagged():
    m = metrics(ConfusionMatrix(0, 0, 0, 5))
    assert m.as_tuple() == (1.0, 0.0, 0.0, 0.0)
    assert set(m.undefined) == {"sensitivity", "precision", "f1"}
    with pytest.raises(ValueError):
        metrics(ConfusionMatrix(0, 0, 0, 0))


@given(pairs, st.randoms())
def test_permutation_invariance(preds, rnd):
    shuffled = list(preds)
    rnd.shuffle(shuffled)
    assert metrics(confusion(preds)) == metrics(confusion(shuffled))


@given(pairs)
def test_accuracy_invariant_under_relabeling(preds):
    flip = {"normal": "abnormal", "abnormal": "normal"}
    swapped = [(flip[t], flip[p]) for t, p in preds]
    cm, cm2 = confusion(preds), confusion(swapped)
    assert metrics(cm).accuracy == metrics(cm2).accuracy
    assert (cm2.tp, cm2.tn, cm2.fp, cm2.fn) == (cm.tn, cm.tp, cm.fn, cm.fp)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_between_precision_and_sensitivity(tp, fp, fn, tn):
    if tp + fp + fn + tn == 0:
        return
    m = metrics(ConfusionMatrix(tp, fp, fn, tn))
    if not m.undefined:
        assert min(m.precision, m.sensitivity) - 1e-12 <= m.f1 <= max(m.precision, m.sensitivity) + 1e-12
        if m.precision + m.sensitivity > 0:
            assert abs(m.f1 - 2 * m.precision * m.sensitivity / (m.precision + m.sensitivity)) <= 1e-12


def test_reconstruct_perfect_row():
    assert reconstruct_counts((1, 1, 1, 1), 694, 885) == ConfusionMatrix(694, 0, 0, 885)


def test_reconstruct_published_row():
    cm = reconstruct_counts(MetricsRow(0.946, 0.935, 0.942, 0.939), 694, 885)
    assert cm == ConfusionMatrix(tp=649, fp=40, fn=45, tn=845)


def test_reconstruct_infeasible():
    assert reconstruct_counts((0.5, 1.0, 1.0, 1.0), 10, 10) is None
    assert reconstruct_counts((0.5, 1.0, 1.0, 1.0), 694, 885) is None


def test_read_predictions(tmp_path):
    p = tmp_path / "preds.csv"
    p.write_text("image_id,truth,predicted\na,Abnormal,abnormal\nb, normal ,ABNORMAL\n")
    assert read_predictions(p) == [("a", "abnormal", "abnormal"), ("b", "normal", "abnormal")]


@pytest.mark.parametrize(
    "text, msg",
    [
        ("image_id,truth\na,normal\n", "missing column"),
        ("image_id,truth,predicted\na,normal,sick\n", ":2:"),
        ("image_id,truth,predicted\n", "no predictions"),
    ],
)
def test_read_predictions_errors(tmp_path, text, msg):
    p = tmp_path / "preds.csv"
    p.write_text(text)
    with pytest.raises(PredictionFileError, match=msg):
        read_predictions(p)
