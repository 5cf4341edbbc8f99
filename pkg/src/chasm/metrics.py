"""Run-length and margin-based accuracy metrics for detection outputs."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "Outcome",
    "EvalConfig",
    "ArlResult",
    "classify_single",
    "prf_single",
    "prf_multi",
    "arl",
]


class Outcome(enum.Enum):
    """Outcome of one single-changepoint sequence."""

    TP = "tp"
    FP = "fp"
    FN_LATE = "fn_late"
    FN_NONE = "fn_none"


@dataclass(frozen=True)
class EvalConfig:
    """Detection margins and the censoring horizon for in-control runs."""

    margin_left: int = 0
    margin_right: int = 50
    censor_at: int | None = None

    def __post_init__(self):
        if self.margin_left < 0 or self.margin_right < 0:
            raise ValueError("margins must be non-negative")


def classify_single(tau: int, tau_hat: int | None, cfg: EvalConfig = EvalConfig()) -> Outcome:
    """Classify a single-changepoint sequence from its first detection time.

    A detection inside [tau - margin_left, tau + margin_right] is a true
    positive; earlier is a false positive; later is a late miss; no detection
    at all is a silent miss.
    """
    if tau_hat is None:
        return Outcome.FN_NONE
    if tau_hat < tau - cfg.margin_left:
        return Outcome.FP
    if tau_hat <= tau + cfg.margin_right:
        return Outcome.TP
    return Outcome.FN_LATE


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf_single(outcomes, n_sequences: int) -> tuple[float, float, float]:
    """Precision, recall and F1 over classified single-changepoint sequences.

    The detection count is card(TP) + card(FP) + card(FN_late): silent misses
    produce no detection and therefore cannot dilute precision.
    """
    if n_sequences < 1:
        raise ValueError(f"n_sequences must be positive, got {n_sequences}")
    outcomes = list(outcomes)
    tp = sum(1 for o in outcomes if o is Outcome.TP)
    n_detections = sum(
        1 for o in outcomes if o in (Outcome.TP, Outcome.FP, Outcome.FN_LATE)
    )
    precision = tp / n_detections if n_detections else 0.0
    recall = tp / n_sequences
    return precision, recall, _f1(precision, recall)


def prf_multi(true_cps, detections, cfg: EvalConfig = EvalConfig()) -> tuple[float, float, float]:
    """Margin-based precision, recall and F1 for multi-changepoint sequences.

    A true changepoint is matched when any detection lies within its margins;
    detections are not consumed, so one detection may match several close
    changepoints.
    """
    true_cps = list(true_cps)
    detections = list(detections)
    matched = sum(
        1
        for tau in true_cps
        if any(tau - cfg.margin_left <= d <= tau + cfg.margin_right for d in detections)
    )
    precision = matched / len(detections) if detections else 0.0
    recall = matched / len(true_cps) if true_cps else 0.0
    return precision, recall, _f1(precision, recall)


@dataclass(frozen=True)
class ArlResult:
    """Average run length with censoring bookkeeping.

    ``censored`` counts runs that never alarmed and were valued at the
    censoring horizon, which makes an in-control average a conservative
    lower bound.
    """

    value: float
    count: int
    censored: int = 0

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.count if self.count else 0.0


def arl(run_lengths, mode: str, censor_at: int | None = None) -> ArlResult:
    """Average run length of a batch of runs.

    ``in_control`` averages first-alarm times, counting runs without an alarm
    (entries of None) at ``censor_at``.  ``delay`` averages detection delays,
    which the caller restricts to true-positive runs.
    """
    values = list(run_lengths)
    if mode == "in_control":
        if any(v is None for v in values) and censor_at is None:
            raise ValueError("censored runs present but censor_at not given")
        censored = sum(1 for v in values if v is None)
        filled = [float(censor_at) if v is None else float(v) for v in values]
        mean = sum(filled) / len(filled) if filled else math.nan
        return ArlResult(value=mean, count=len(filled), censored=censored)
    if mode == "delay":
        if any(v is None for v in values):
            raise ValueError("delay mode expects only realised delays")
        mean = sum(float(v) for v in values) / len(values) if values else math.nan
        return ArlResult(value=mean, count=len(values))
    raise ValueError(f"mode must be 'in_control' or 'delay', got {mode!r}")
