"""Calibration error, accuracy, and Spearman against brute-force oracles."""

import itertools
import math

import numpy as np
import pytest

from memmeter.metrics import (
    PredictionRecord,
    midranks,
    rms_calibration_error,
    spearman,
    top1_accuracy,
)
from memmeter.rng import make_rng


def record(image_id, confidence, correct, classes=2):
    """Two-way record with the given top confidence; class 0 is predicted."""
    probs = np.full(classes, (1.0 - confidence) / (classes - 1))
    probs[0] = confidence
    return PredictionRecord(image_id, probs, true_class=0 if correct else 1)


# --- calibration ---------------------------------------------------------------

def oracle_calibration(records, bin_count=None):
    """Naive two-pass oracle materializing every bin explicitly."""
    ordered = sorted(records, key=lambda r: (float(max(r.probs)), r.image_id))
    n = len(ordered)
    b = bin_count if bin_count is not None else min(math.ceil(math.sqrt(n)), n)
    sizes = []
    base, rem = divmod(n, b)
    for k in range(b):
        sizes.append(base + 1 if k < rem else base)
    bins = []
    cursor = 0
    for size in sizes:
        bins.append(ordered[cursor : cursor + size])
        cursor += size
    total = 0.0
    for members in bins:
        confs = [float(max(r.probs)) for r in members]
        accs = [1.0 if int(np.argmax(r.probs)) == r.true_class else 0.0 for r in members]
        gap = sum(confs) / len(confs) - sum(accs) / len(accs)
        total += (len(members) / n) * gap * gap
    return math.sqrt(total)


def test_perfect_confidence_and_accuracy_is_zero():
    records = [record(f"i{k}", 1.0, True) for k in range(8)]
    assert rms_calibration_error(records).rms_error == 0.0


def test_single_bin_half_correct_is_half():
    records = [record(f"i{k}", 1.0, k < 2) for k in range(4)]
    report = rms_calibration_error(records, bin_count=1)
    assert report.rms_error == pytest.approx(0.5)
    assert report.bin_count == 1
    assert report.bins == [(4, 1.0, 0.5)]


def test_matches_naive_oracle_on_random_sets():
    rng = make_rng("calibration-oracle")
    for trial in range(300):
        n = int(rng.integers(1, 60))
        records = [
            record(f"r{trial}_{k}", float(rng.uniform(0.5, 1.0)), bool(rng.random() < 0.7))
            for k in range(n)
        ]
        report = rms_calibration_error(records)
        assert report.rms_error == pytest.approx(oracle_calibration(records), abs=1e-12)
        assert sum(size for size, _, _ in report.bins) == n


def test_perfectly_calibrated_bins_give_zero():
    # each bin's mean confidence equals its empirical accuracy
    records = []
    for k in range(10):
        records.append(record(f"a{k}", 0.8, k < 8))  # conf 0.8, 8/10 correct
    report = rms_calibration_error(records, bin_count=1)
    assert report.rms_error < 1e-12


def test_error_bounded_and_order_invariant():
    rng = make_rng("calibration-permute")
    records = [
        record(f"i{k}", float(rng.uniform(0.5, 1.0)), bool(rng.random() < 0.5)) for k in range(40)
    ]
    baseline = rms_calibration_error(records).rms_error
    assert 0.0 <= baseline <= 1.0
    for _ in range(10):
        shuffled = [records[i] for i in rng.permutation(len(records))]
        assert rms_calibration_error(shuffled).rms_error == baseline


def test_calibration_input_validation():
    with pytest.raises(ValueError, match="at least one"):
        rms_calibration_error([])
    with pytest.raises(ValueError, match="true_class"):
        rms_calibration_error([PredictionRecord("x", np.array([0.6, 0.4]))])


def test_prediction_record_validation_and_tie_break():
    with pytest.raises(ValueError, match="sum to 1"):
        PredictionRecord("x", np.array([0.5, 0.4]))
    tied = PredictionRecord("x", np.array([0.5, 0.5]))
    assert tied.predicted_class == 0  # lowest index wins


# --- accuracy ---------------------------------------------------------------------

def test_top1_accuracy_values():
    assert top1_accuracy([record(f"i{k}", 0.9, True) for k in range(5)]) == 1.0
    assert top1_accuracy([record(f"i{k}", 0.9, False) for k in range(5)]) == 0.0
    mixed = [record(f"i{k}", 0.9, k != 0) for k in range(5)]
    assert top1_accuracy(mixed) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        top1_accuracy([])


# --- spearman ----------------------------------------------------------------------

def oracle_midranks(values):
    """O(n^2) counting oracle: rank = #less + (#equal + 1) / 2."""
    out = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        out.append(less + (equal + 1) / 2.0)
    return np.array(out)


def oracle_spearman(xs, ys):
    rx = oracle_midranks(list(xs))
    ry = oracle_midranks(list(ys))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float((dx * dx).sum())
    syy = float((dy * dy).sum())
    if sxx == 0.0 or syy == 0.0:
        return None
    return float((dx * dy).sum() / math.sqrt(sxx * syy))


def test_monotone_agreement_and_reversal():
    xs = [1.0, 2.0, 5.0, 9.0]
    assert spearman(xs, [10.0, 20.0, 21.0, 30.0]) == 1.0
    assert spearman(xs, [4.0, 3.0, 2.0, 1.0]) == -1.0


def test_tied_example_matches_oracle():
    xs, ys = [1.0, 2.0, 2.0, 3.0], [1.0, 3.0, 2.0, 4.0]
    assert spearman(xs, ys) == oracle_spearman(xs, ys)


def test_constant_input_returns_none():
    assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert spearman([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None


def test_length_validation():
    with pytest.raises(ValueError):
        spearman([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        spearman([1.0, 2.0], [1.0, 2.0])


def test_exhaustive_small_integer_vectors_match_oracle_exactly():
    # lengths 3 and 4: both sides exhaustive over {0,1,2}
    for length in (3, 4):
        for xs in itertools.product((0, 1, 2), repeat=length):
            for ys in itertools.product((0, 1, 2), repeat=length):
                assert spearman(xs, ys) == oracle_spearman(xs, ys)


def test_exhaustive_longer_vectors_with_random_partner():
    # lengths 5..8: exhaustive xs over {0,1,2}, seeded random partner
    rng = make_rng("spearman-partner")
    for length in (5, 6, 7, 8):
        for xs in itertools.product((0, 1, 2), repeat=length):
            ys = tuple(int(v) for v in rng.integers(0, 3, size=length))
            assert spearman(xs, ys) == oracle_spearman(xs, ys)


def test_random_real_vectors_match_oracle():
    rng = make_rng("spearman-reals")
    for _ in range(10_000):
        n = int(rng.integers(3, 40))
        xs = rng.normal(size=n)
        ys = rng.normal(size=n)
        ours = spearman(xs, ys)
        oracle = oracle_spearman(xs, ys)
        assert ours == pytest.approx(oracle, abs=1e-12)


def test_monotone_transform_invariance_is_bitwise_on_ranks():
    rng = make_rng("spearman-monotone")
    for _ in range(200):
        xs = rng.integers(0, 10, size=12).astype(float)
        for transform in (lambda v: 2.0 * v + 1.0, np.exp, lambda v: v * 0.5 - 3.0):
            assert np.array_equal(midranks(xs), midranks(transform(xs)))
    ys = rng.normal(size=12)
    base = spearman(rng.integers(0, 10, size=12).astype(float), ys)
    assert base is None or -1.0 <= base <= 1.0
