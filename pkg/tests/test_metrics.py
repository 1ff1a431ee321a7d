"""Outcome accounting tests: a brute-force oracle plus policy and
variant behaviour."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowfi.errors import ConfigurationError, MetricUndefinedError
from flowfi.metrics import (
    OUTCOME_DUE,
    OUTCOME_MASKED,
    OUTCOME_SDC,
    BaselineRecord,
    DuePolicy,
    ExperimentOutcome,
    Rates,
    SdcVariant,
    build_correct_set,
    sdc_rate_aggregate,
    sdc_rate_exp,
)
from flowfi.model import PRED_ANOMALOUS, PRED_DUE, PRED_NOMINAL
from flowfi.rng import RandomStream


def oracle_rates(faulty, truth, due_as_sdc):
    """Straight-line recount of the outcome rules, one sample at a time."""
    n = len(faulty)
    sdc = due = masked = 0
    for f, t in zip(faulty, truth):
        if f == PRED_DUE:
            due += 1
        elif f != t:
            sdc += 1
        else:
            masked += 1
    if due_as_sdc:
        sdc, due = sdc + due, 0
    return sdc / n, due / n, masked / n


def judged(faulty, truth, policy):
    ids = np.arange(len(faulty), dtype=np.int64)
    baseline = BaselineRecord.build(ids, np.asarray(truth, dtype=np.int8),
                                    np.asarray(truth, dtype=np.int8))
    outcome = ExperimentOutcome.classify(
        ids, np.asarray(faulty, dtype=np.int8), np.asarray(truth, dtype=np.int8)
    )
    return sdc_rate_exp(baseline, outcome, policy)


# --- oracle sweep -------------------------------------------------------------


def test_rates_match_brute_force_oracle_on_100_random_tables():
    stream = RandomStream(2024)
    for _ in range(100):
        n = 1 + int(stream.randbelow(1, 40)[0])
        truth = stream.randbelow(n, 2).astype(np.int8)  # nominal/anomalous
        faulty = stream.randbelow(n, 3).astype(np.int8)  # may also be DUE
        for policy in DuePolicy:
            r = judged(faulty, truth, policy)
            want = oracle_rates(faulty, truth, policy is DuePolicy.DUE_COUNTS_AS_SDC)
            assert (r.sdc, r.due, r.masked) == want
            assert r.sdc_count + r.due_count + r.masked_count == r.n_samples == n


def test_rates_pinned_example():
    truth = [PRED_NOMINAL, PRED_NOMINAL, PRED_ANOMALOUS, PRED_ANOMALOUS, PRED_NOMINAL]
    faulty = [PRED_NOMINAL, PRED_ANOMALOUS, PRED_DUE, PRED_ANOMALOUS, PRED_DUE]
    r = judged(faulty, truth, DuePolicy.SEPARATE_DUE)
    assert r == Rates(0.2, 0.4, 0.4, 5, 1, 2, 2)
    r2 = judged(faulty, truth, DuePolicy.DUE_COUNTS_AS_SDC)
    assert r2 == Rates(0.6, 0.0, 0.4, 5, 3, 0, 2)


def test_outcome_codes():
    outcome = ExperimentOutcome.classify(
        np.array([10, 11, 12], dtype=np.int64),
        np.array([PRED_NOMINAL, PRED_ANOMALOUS, PRED_DUE], dtype=np.int8),
        np.array([PRED_NOMINAL, PRED_NOMINAL, PRED_NOMINAL], dtype=np.int8),
    )
    assert list(outcome.outcome) == [OUTCOME_MASKED, OUTCOME_SDC, OUTCOME_DUE]


@given(st.lists(st.integers(0, 2), min_size=1, max_size=60),
       st.integers(0, 1), st.sampled_from(list(DuePolicy)))
@settings(max_examples=200)
def test_rates_sum_to_one(codes, truth_code, policy):
    truth = [truth_code] * len(codes)
    r = judged(codes, truth, policy)
    assert r.sdc + r.due + r.masked == pytest.approx(1.0)
    assert 0 <= r.sdc <= 1 and 0 <= r.due <= 1 and 0 <= r.masked <= 1


# --- baseline construction ------------------------------------------------------


def test_baseline_correct_set():
    ids = np.array([5, 6, 7, 8], dtype=np.int64)
    preds = np.array([0, 1, 0, 1], dtype=np.int8)
    labels = np.array([0, 0, 0, 1], dtype=np.int8)
    b = BaselineRecord.build(ids, preds, labels)
    assert list(b.correct_ids) == [5, 7, 8]
    assert b.accuracy() == 0.75


def test_baseline_rejects_due_predictions():
    ids = np.array([1, 2], dtype=np.int64)
    with pytest.raises(ConfigurationError):
        BaselineRecord.build(
            ids, np.array([PRED_NOMINAL, PRED_DUE], dtype=np.int8),
            np.array([0, 0], dtype=np.int8),
        )


def test_baseline_rejects_length_mismatch():
    with pytest.raises(ConfigurationError):
        BaselineRecord.build(
            np.array([1], dtype=np.int64),
            np.array([0, 0], dtype=np.int8),
            np.array([0, 0], dtype=np.int8),
        )


def test_baseline_accuracy_empty_dataset_is_undefined():
    b = BaselineRecord.build(
        np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int8)
    )
    with pytest.raises(MetricUndefinedError):
        b.accuracy()


def test_rate_requires_eval_subset_of_correct_set():
    ids = np.array([1, 2, 3], dtype=np.int64)
    b = BaselineRecord.build(ids, np.array([0, 0, 1], dtype=np.int8),
                             np.array([0, 1, 1], dtype=np.int8))
    # correct ids are {1, 3}; id 2 was misclassified by the baseline
    bad = ExperimentOutcome.classify(
        np.array([1, 2], dtype=np.int64),
        np.array([0, 0], dtype=np.int8), np.array([0, 0], dtype=np.int8),
    )
    with pytest.raises(ConfigurationError):
        sdc_rate_exp(b, bad)


def test_rate_empty_eval_set_is_undefined():
    ids = np.array([1], dtype=np.int64)
    b = BaselineRecord.build(ids, np.array([0], dtype=np.int8), np.array([0], dtype=np.int8))
    empty = ExperimentOutcome.classify(
        np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int8)
    )
    with pytest.raises(MetricUndefinedError):
        sdc_rate_exp(b, empty)


# --- aggregation -----------------------------------------------------------------


def test_aggregate_is_mean_over_experiments_and_seeds():
    rates = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    assert sdc_rate_aggregate(rates, n_exps=3, n_seeds=2) == pytest.approx(0.35)
    assert sdc_rate_aggregate(rates, 3, 2) == math.fsum(rates) / 6


def test_aggregate_rejects_count_mismatch():
    with pytest.raises(ConfigurationError):
        sdc_rate_aggregate([0.1, 0.2], n_exps=3, n_seeds=1)


# --- correct-set variants ----------------------------------------------------------


def baselines_fixture():
    ids = np.array([1, 2, 3, 4], dtype=np.int64)
    labels = np.array([0, 0, 1, 1], dtype=np.int8)
    a = BaselineRecord.build(ids, np.array([0, 0, 1, 0], dtype=np.int8), labels)
    b = BaselineRecord.build(ids, np.array([0, 1, 1, 1], dtype=np.int8), labels)
    return {"A": a, "B": b}  # correct: A {1,2,3}, B {1,3,4}


def test_relative_variant_keeps_per_model_sets():
    sets = build_correct_set(SdcVariant.RELATIVE, baselines_fixture())
    assert list(sets["A"]) == [1, 2, 3]
    assert list(sets["B"]) == [1, 3, 4]


def test_absolute_variant_intersects_all_models():
    sets = build_correct_set(SdcVariant.ABSOLUTE, baselines_fixture())
    assert list(sets["A"]) == [1, 3]
    assert list(sets["B"]) == [1, 3]


def test_absolute_variant_empty_intersection_is_undefined():
    ids = np.array([1, 2], dtype=np.int64)
    labels = np.array([0, 0], dtype=np.int8)
    a = BaselineRecord.build(ids, np.array([0, 1], dtype=np.int8), labels)
    b = BaselineRecord.build(ids, np.array([1, 0], dtype=np.int8), labels)
    with pytest.raises(MetricUndefinedError):
        build_correct_set(SdcVariant.ABSOLUTE, {"A": a, "B": b})


def test_correct_set_requires_baselines():
    with pytest.raises(ConfigurationError):
        build_correct_set(SdcVariant.ABSOLUTE, {})
