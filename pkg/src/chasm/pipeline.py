"""End-to-end streaming detector.

Each observation passes through: operator update, truncated spectrum,
alignment against the previous spectrum, spectral velocity, complex EWMA
smoothing, and a threshold test on the resulting statistic.  Alarms are
suppressed during a grace window after every (re)start while the estimates
stabilise.  In multi-changepoint mode the detector restarts from scratch
after each alarm; post-change dynamics are a new regime, so no state is
carried over.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import DynamicsEstimator
from .errors import NumericsError
from .mewma import ComplexMewma
from .spectrum import AlignedSpectrum, align, dominant_eigenvalues

__all__ = [
    "DetectorConfig",
    "DetectionRecord",
    "AbortedRun",
    "stack_lags",
    "ChasmDetector",
]

logger = logging.getLogger(__name__)


@dataclass
class DetectorConfig:
    """Tuning parameters of a detector.

    ``epsilon`` defaults to 1e-6 times the (lag-stacked) dimension when left
    as None.  ``restart`` switches between the single stopping rule (at most
    one alarm) and multi-changepoint monitoring.  ``warmup`` is the number of
    initial steps per segment whose velocities are discarded rather than
    monitored; None selects half the grace window.  ``moment_decay`` switches
    the chart's moment estimates from cumulative (None) to exponentially
    weighted with the given retention factor.
    """

    rho: float = 1.0
    rank: int = 2
    alpha: float = 0.18
    threshold: float = 15.0
    grace: int = 100
    lag: int = 1
    epsilon: float | None = None
    ridge: float = 1e-8
    restart: bool = False
    warmup: int | None = None
    moment_decay: float | None = None

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho!r}")
        if not isinstance(self.rank, (int, np.integer)) or self.rank < 1:
            raise ValueError(f"rank must be a positive integer, got {self.rank!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (math.isfinite(self.threshold) and self.threshold > 0.0):
            raise ValueError(f"threshold must be finite and positive, got {self.threshold!r}")
        if self.grace < 0:
            raise ValueError(f"grace must be non-negative, got {self.grace!r}")
        if not isinstance(self.lag, (int, np.integer)) or self.lag < 1:
            raise ValueError(f"lag must be a positive integer, got {self.lag!r}")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.ridge > 0.0:
            raise ValueError(f"ridge must be positive, got {self.ridge!r}")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError(f"warmup must be non-negative, got {self.warmup!r}")
        if self.moment_decay is not None and not 0.0 < self.moment_decay < 1.0:
            raise ValueError(f"moment_decay must lie in (0, 1), got {self.moment_decay!r}")

    @property
    def effective_warmup(self) -> int:
        """Steps per segment whose velocities are discarded, not monitored.

        The operator estimate swings hard right after a (re)start; feeding
        those transient velocities into the running moments would inflate the
        covariance for the rest of the segment and desensitise the chart.
        Defaults to half the grace window, leaving the second half to
        calibrate the chart before alarms are enabled.
        """
        if self.warmup is not None:
            return self.warmup
        return self.grace // 2

    @classmethod
    def from_dict(cls, raw: dict) -> "DetectorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DetectionRecord:
    """Outcome of one stream step.

    ``statistic`` is None while the detector is still warming up (lag buffer
    filling, first regressor, first spectrum) or when the spectrum extraction
    failed for the step.  ``segment`` counts restarts so far.
    """

    t: int
    statistic: float | None
    alarm: bool
    segment: int


class AbortedRun(NumericsError):
    """A hard error interrupted a run; partial results are attached."""

    def __init__(self, message: str, records: list, alarms: list):
        super().__init__(message)
        self.records = records
        self.alarms = alarms


def stack_lags(stream, p: int):
    """Concatenate each observation with its p-1 predecessors, newest first.

    The first p-1 inputs produce no output.  With p=1 this is the identity.
    """
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValueError(f"p must be a positive integer, got {p!r}")
    if p == 1:
        for x in stream:
            yield np.asarray(x, dtype=np.float64)
        return
    buf: deque = deque(maxlen=p)
    for x in stream:
        buf.appendleft(np.asarray(x, dtype=np.float64))
        if len(buf) == p:
            yield np.concatenate(buf)


class ChasmDetector:
    """Streaming changepoint detector over a d-dimensional observation stream.

    One detector monitors one stream; it is a single-writer object that can
    be moved between threads between calls but never shared concurrently.
    """

    def __init__(self, dim: int, config: DetectorConfig | None = None, **overrides):
        if config is None:
            config = DetectorConfig(**overrides)
        elif overrides:
            raise ValueError("pass either a config object or keyword overrides, not both")
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        stacked = int(dim) * config.lag
        if config.rank > stacked:
            raise ValueError(
                f"rank {config.rank} exceeds the stacked dimension {stacked}"
            )
        self.dim = int(dim)
        self.config = config
        self._stacked_dim = stacked
        self._epsilon = config.epsilon if config.epsilon is not None else 1e-6 * stacked
        self._warmup = config.effective_warmup
        self._t = 0
        self._segment = 0
        self._segment_start = -1
        self._stopped = False
        self._fresh_segment_state()

    def _fresh_segment_state(self):
        cfg = self.config
        self._dynamics = DynamicsEstimator(self._stacked_dim, rho=cfg.rho, epsilon=self._epsilon)
        self._mewma = ComplexMewma(
            cfg.rank, cfg.alpha, ridge=cfg.ridge, moment_decay=cfg.moment_decay
        )
        self._spectrum: AlignedSpectrum | None = None
        self._lag_buf: deque = deque(maxlen=cfg.lag)

    @property
    def segment(self) -> int:
        return self._segment

    def step(self, x) -> DetectionRecord:
        """Process one observation and return the per-step record."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite observation rejected")
        cfg = self.config
        t = self._t
        self._t += 1
        self._lag_buf.appendleft(x.copy())
        stat: float | None = None
        if len(self._lag_buf) == cfg.lag:
            stacked = self._lag_buf[0] if cfg.lag == 1 else np.concatenate(self._lag_buf)
            self._dynamics.update(stacked)
            if self._dynamics.step >= 1:
                try:
                    vals = dominant_eigenvalues(self._dynamics.theta, cfg.rank)
                except NumericsError as exc:
                    logger.warning(
                        "spectrum extraction failed at t=%d (%s); keeping previous spectrum",
                        t,
                        exc,
                    )
                    vals = None
                if vals is not None:
                    if self._spectrum is None:
                        self._spectrum = AlignedSpectrum.cold_start(vals)
                    else:
                        aligned = align(self._spectrum, vals)
                        velocity = aligned.values - self._spectrum.values
                        self._spectrum = aligned
                        if (t - self._segment_start) > self._warmup:
                            self._mewma.ingest(velocity)
                            stat = self._mewma.statistic()
        alarm = (
            stat is not None
            and stat > cfg.threshold
            and (t - self._segment_start) > cfg.grace
            and not self._stopped
        )
        record = DetectionRecord(t=t, statistic=stat, alarm=alarm, segment=self._segment)
        if alarm:
            if cfg.restart:
                self._segment += 1
                self._segment_start = t
                self._fresh_segment_state()
            else:
                self._stopped = True
        return record

    def run(self, stream) -> tuple[list[DetectionRecord], list[int]]:
        """Fold :meth:`step` over a stream; returns (records, alarm times).

        The first hard numerical error aborts the run; the raised
        :class:`AbortedRun` carries the records produced so far.
        """
        records: list[DetectionRecord] = []
        alarms: list[int] = []
        for x in stream:
            try:
                record = self.step(x)
            except NumericsError as exc:
                raise AbortedRun(str(exc), records, alarms) from exc
            records.append(record)
            if record.alarm:
                alarms.append(record.t)
        return records, alarms

    def first_alarm(self, stream) -> int | None:
        """Time of the first alarm, stopping early; None when no alarm fires."""
        for x in stream:
            if self.step(x).alarm:
                return self._t - 1
        return None
