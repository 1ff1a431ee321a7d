"""SDC, DUE, and masked-fault accounting.

A fault outcome is judged per sample against the fault-free baseline,
restricted to samples the baseline classified correctly. On that set a
faulty run either leaves the prediction right (masked), silently flips
it (SDC), or surfaces as a non-finite score (DUE). Counts stay exact
integers; the single division happens at report time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, MetricUndefinedError
from .model import PRED_DUE

OUTCOME_MASKED = 0
OUTCOME_SDC = 1
OUTCOME_DUE = 2


class DuePolicy(enum.Enum):
    SEPARATE_DUE = "separate"
    DUE_COUNTS_AS_SDC = "due-as-sdc"


class SdcVariant(enum.Enum):
    ABSOLUTE = "absolute"  # shared correct-set: intersection over all models
    RELATIVE = "relative"  # each model judged on its own correct-set


@dataclass(frozen=True)
class BaselineRecord:
    sample_ids: np.ndarray  # int64
    predictions: np.ndarray  # int8 prediction codes, never DUE
    labels: np.ndarray  # int8 ground truth
    correct_ids: np.ndarray  # int64, ids where prediction == label

    @classmethod
    def build(
        cls, sample_ids: np.ndarray, predictions: np.ndarray, labels: np.ndarray
    ) -> "BaselineRecord":
        if not (len(sample_ids) == len(predictions) == len(labels)):
            raise ConfigurationError("baseline arrays must have equal length")
        if np.any(predictions == PRED_DUE):
            raise ConfigurationError(
                "baseline contains non-finite scores; the baseline must be fault-free"
            )
        correct = np.asarray(sample_ids, dtype=np.int64)[predictions == labels]
        return cls(
            np.asarray(sample_ids, dtype=np.int64),
            np.asarray(predictions, dtype=np.int8),
            np.asarray(labels, dtype=np.int8),
            correct,
        )

    def accuracy(self) -> float:
        if self.sample_ids.size == 0:
            raise MetricUndefinedError("baseline over an empty dataset")
        return self.correct_ids.size / self.sample_ids.size


@dataclass(frozen=True)
class ExperimentOutcome:
    eval_ids: np.ndarray  # int64, subset of some baseline correct-set
    outcome: np.ndarray  # int8 OUTCOME_* per eval sample

    @classmethod
    def classify(
        cls, eval_ids: np.ndarray, faulty_codes: np.ndarray, truth_codes: np.ndarray
    ) -> "ExperimentOutcome":
        """Judge faulty predictions against ground truth on the eval set."""
        if not (len(eval_ids) == len(faulty_codes) == len(truth_codes)):
            raise ConfigurationError("outcome arrays must have equal length")
        out = np.full(len(eval_ids), OUTCOME_MASKED, dtype=np.int8)
        out[faulty_codes != truth_codes] = OUTCOME_SDC
        out[faulty_codes == PRED_DUE] = OUTCOME_DUE
        return cls(np.asarray(eval_ids, dtype=np.int64), out)


@dataclass(frozen=True)
class Rates:
    sdc: float
    due: float
    masked: float
    n_samples: int
    sdc_count: int
    due_count: int
    masked_count: int


def sdc_rate_exp(
    baseline: BaselineRecord,
    outcome: ExperimentOutcome,
    due_policy: DuePolicy = DuePolicy.SEPARATE_DUE,
) -> Rates:
    """Per-experiment rates over the baseline-correct evaluation set."""
    if outcome.eval_ids.size == 0:
        raise MetricUndefinedError("empty evaluation set: no correctly classified samples")
    if not np.all(np.isin(outcome.eval_ids, baseline.correct_ids)):
        raise ConfigurationError("evaluation ids are not a subset of the correct-set")
    n = int(outcome.eval_ids.size)
    sdc = int(np.count_nonzero(outcome.outcome == OUTCOME_SDC))
    due = int(np.count_nonzero(outcome.outcome == OUTCOME_DUE))
    masked = n - sdc - due
    if due_policy is DuePolicy.DUE_COUNTS_AS_SDC:
        sdc, due = sdc + due, 0
    return Rates(sdc / n, due / n, masked / n, n, sdc, due, masked)


def sdc_rate_aggregate(
    per_experiment: Sequence[float], n_exps: int, n_seeds: int
) -> float:
    """Mean rate over all experiments of all seeds."""
    if len(per_experiment) != n_exps * n_seeds:
        raise ConfigurationError(
            f"expected {n_exps * n_seeds} per-experiment rates, got {len(per_experiment)}"
        )
    return math.fsum(per_experiment) / len(per_experiment)


def build_correct_set(
    variant: SdcVariant, baselines: Mapping[str, BaselineRecord]
) -> dict[str, np.ndarray]:
    """Evaluation ids per model, per the chosen variant."""
    if not baselines:
        raise ConfigurationError("at least one model baseline is required")
    if variant is SdcVariant.RELATIVE:
        return {mid: b.correct_ids.copy() for mid, b in baselines.items()}
    shared: np.ndarray | None = None
    for b in baselines.values():
        shared = b.correct_ids if shared is None else np.intersect1d(shared, b.correct_ids)
    if shared.size == 0:
        raise MetricUndefinedError("no sample is correctly classified by every model")
    return {mid: shared.copy() for mid in baselines}
