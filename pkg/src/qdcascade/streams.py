"""Time-tag streams and coincidence histograms.

These two containers are the interchange between the simulated experiments,
the analysis routines and the file formats in :mod:`qdcascade.io`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(eq=False)
class TimeTagStream:
    """Detector clicks sorted by timestamp (integer ps).

    ``t_start``/``t_end`` bound the acquisition window and give the
    integration time used for singles rates.
    """

    timestamps: np.ndarray
    detector_ids: np.ndarray
    t_start: int = 0
    t_end: int = 0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        ids = np.asarray(self.detector_ids, dtype=np.int16)
        if ids.ndim == 0:
            ids = np.full(self.timestamps.size, ids, dtype=np.int16)
        self.detector_ids = ids
        if self.detector_ids.shape != self.timestamps.shape:
            raise ValueError("timestamps and detector_ids must have the same length")
        if self.t_end < self.t_start:
            raise ValueError("t_end precedes t_start")

    @classmethod
    def empty(cls, t_start=0, t_end=0, **meta):
        return cls(np.empty(0, np.int64), np.empty(0, np.int16), t_start, t_end, dict(meta))

    @classmethod
    def merge(cls, *streams: "TimeTagStream", meta=None) -> "TimeTagStream":
        t = np.concatenate([s.timestamps for s in streams])
        d = np.concatenate([s.detector_ids for s in streams])
        order = np.lexsort((d, t))
        return cls(
            t[order],
            d[order],
            min(s.t_start for s in streams),
            max(s.t_end for s in streams),
            dict(meta or streams[0].meta),
        )

    def __len__(self):
        return self.timestamps.size

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamps) >= 0))

    def sorted(self) -> "TimeTagStream":
        order = np.lexsort((self.detector_ids, self.timestamps))
        return TimeTagStream(self.timestamps[order], self.detector_ids[order], self.t_start, self.t_end, dict(self.meta))

    def for_detector(self, detector_id: int) -> "TimeTagStream":
        sel = self.detector_ids == detector_id
        return TimeTagStream(self.timestamps[sel], self.detector_ids[sel], self.t_start, self.t_end, dict(self.meta))

    @property
    def duration_s(self) -> float:
        return (self.t_end - self.t_start) * 1e-12

    @property
    def rate(self) -> float:
        """Mean count rate in counts/s over the acquisition window."""
        return len(self) / self.duration_s if self.t_end > self.t_start else 0.0

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.detector_ids, other.detector_ids)
            and self.t_start == other.t_start
            and self.t_end == other.t_end
        )


@dataclass(eq=False)
class CoincidenceHistogram:
    """Binned delays.

    ``origin`` is the left edge of the first bin in ps; bin j spans
    [origin + j*bin_width, origin + (j+1)*bin_width).
    """

    bin_width: float
    origin: float
    counts: np.ndarray
    integration_time: float = 0.0
    singles_rates: tuple[float, float] = (0.0, 0.0)
    period: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        self.singles_rates = tuple(float(r) for r in self.singles_rates)

    @property
    def edges(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.bin_width * (np.arange(self.counts.size) + 0.5)

    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self):
        return self.counts.size

    def __eq__(self, other):
        if not isinstance(other, CoincidenceHistogram):
            return NotImplemented
        return (
            self.bin_width == other.bin_width
            and self.origin == other.origin
            and np.array_equal(self.counts, other.counts)
            and self.integration_time == other.integration_time
            and self.singles_rates == other.singles_rates
            and self.period == other.period
        )
