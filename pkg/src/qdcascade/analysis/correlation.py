"""Start-multistop correlation and peak integration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from ..streams import CoincidenceHistogram, TimeTagStream


def _times(stream) -> np.ndarray:
    if isinstance(stream, TimeTagStream):
        return stream.timestamps
    return np.asarray(stream, dtype=np.int64)


def pair_delays(a: np.ndarray, b: np.ndarray, window: int) -> np.ndarray:
    """All delays t_b - t_a with |t_b - t_a| <= window (both inputs sorted)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo = np.searchsorted(b, a - window, side="left")
    hi = np.searchsorted(b, a + window, side="right")
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(lo, n)
    run_offsets = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    return b[starts + run_offsets] - np.repeat(a, n)


def symmetric_bin_index(delays: np.ndarray, bin_width: int) -> np.ndarray:
    """Bin index of each delay with bins centered on multiples of bin_width.

    Delays exactly on a bin edge are rounded away from zero, so the
    assignment is antisymmetric: index(-d) == -index(d).
    """
    d = np.asarray(delays, dtype=np.int64)
    w = int(bin_width)
    mag = (2 * np.abs(d) + w) // (2 * w)
    return np.sign(d) * mag


def correlate(a, b, bin_width: int, window: int, period: float = 0.0) -> CoincidenceHistogram:
    """Histogram of t_b - t_a over [-window, window].

    Bins are centered on integer multiples of ``bin_width``; an odd bin width
    gives every bin exactly ``bin_width`` integer delay values. Singles rates
    and integration time are taken from the streams when available.
    """
    ta, tb = _times(a), _times(b)
    if np.any(np.diff(ta) < 0) or np.any(np.diff(tb) < 0):
        raise ValueError("streams must be sorted by timestamp")
    w = int(bin_width)
    if w <= 0:
        raise ValueError("bin_width must be a positive integer")
    n_half = int(np.ceil(window / w))
    delays = pair_delays(ta, tb, n_half * w + w // 2)
    idx = symmetric_bin_index(delays, w)
    idx = idx[np.abs(idx) <= n_half]
    counts = np.bincount(idx + n_half, minlength=2 * n_half + 1)
    integration = 0.0
    rates = (0.0, 0.0)
    if isinstance(a, TimeTagStream) and isinstance(b, TimeTagStream):
        t0 = max(a.t_start, b.t_start)
        t1 = min(a.t_end, b.t_end)
        integration = max(t1 - t0, 0) * 1e-12
        rates = (a.rate, b.rate)
    return CoincidenceHistogram(
        bin_width=w,
        origin=-(n_half + 0.5) * w,
        counts=counts,
        integration_time=integration,
        singles_rates=rates,
        period=period,
    )


@dataclass
class PeakAreas:
    """Integrated peak areas keyed by peak index (center = 0).

    ``n_bins`` records how many histogram bins each area summed, which the
    flat-background subtraction needs.
    """

    areas: dict[int, float]
    n_bins: dict[int, int] = field(default_factory=dict)
    clamped: bool = False

    def __getitem__(self, key):
        return self.areas[key]

    def __contains__(self, key):
        return key in self.areas

    @property
    def center(self) -> float:
        return self.areas[0]

    def side(self) -> np.ndarray:
        return np.array([v for k, v in sorted(self.areas.items()) if k != 0], dtype=float)

    def keys(self):
        return self.areas.keys()


def integrate_windows(h: CoincidenceHistogram, windows: Mapping[int, tuple[float, float]]) -> PeakAreas:
    """Sum bins whose centers lie inside each closed window [lo, hi]."""
    c = h.centers
    areas, nb = {}, {}
    for key, (lo, hi) in windows.items():
        sel = (c >= lo) & (c <= hi)
        areas[key] = float(h.counts[sel].sum())
        nb[key] = int(sel.sum())
    return PeakAreas(areas, nb)


def integrate_peaks(h: CoincidenceHistogram, spacing: float, half_window: float, max_index: Union[int, None] = None) -> PeakAreas:
    """Areas of the peaks centered at integer multiples of ``spacing``.

    Every peak whose full window fits inside the histogram is integrated,
    optionally limited to |index| <= max_index. Each area sums the bin
    containing the peak center and floor(half_window / bin_width) bins on
    either side, so a flat histogram gives equal areas.
    """
    if spacing <= 2 * half_window:
        raise ValueError(f"peaks overlap: spacing {spacing} ps <= 2 * half_window {half_window} ps")
    lo_edge, hi_edge = h.edges[0], h.edges[-1]
    k_max = int(np.floor((min(-lo_edge, hi_edge) - half_window) / spacing))
    if max_index is not None:
        k_max = min(k_max, max_index)
    if k_max < 0:
        raise ValueError("histogram too short for a single peak window")
    # the same number of bins for every peak: the bin nearest each center
    # plus floor(half_window / bin_width) on either side
    n_side = int(np.floor(half_window / h.bin_width + 1e-9))
    areas, nb = {}, {}
    for k in range(-k_max, k_max + 1):
        i = int(np.floor((k * spacing - h.origin) / h.bin_width))
        lo, hi = max(i - n_side, 0), min(i + n_side + 1, h.counts.size)
        areas[k] = float(h.counts[lo:hi].sum())
        nb[k] = hi - lo
    return PeakAreas(areas, nb)


def g2_zero(p: PeakAreas) -> float:
    """Center area normalized by the mean side-peak area."""
    side = p.side()
    if side.size < 2:
        raise ValueError("need at least two side peaks")
    mean = side.mean()
    if mean == 0:
        raise ValueError("side peaks are empty; Poisson level undefined")
    return p.center / mean


def g2_zero_error(p: PeakAreas, raw: Union[PeakAreas, None] = None) -> float:
    """First-order Poisson error of :func:`g2_zero`.

    ``raw`` supplies the uncorrected areas whose counts set the variances
    when ``p`` is background-subtracted.
    """
    raw = raw or p
    side = p.side()
    mean = side.mean()
    var_center = max(raw.center, 1.0)
    var_mean = max(raw.side().sum(), 1.0) / side.size**2
    g = p.center / mean
    return float(np.sqrt(var_center / mean**2 + g**2 * var_mean / mean**2))
