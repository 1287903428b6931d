"""Peak bookkeeping and visibilities for the two-photon interference histograms.

Within one repetition period the photon pairs form a five-peak cluster at
delays -2d, -d, 0, d, 2d (d = interferometer delay). When the period is
short, the outer peaks of neighbouring clusters land next to the +/-d peaks;
the integration windows for those peaks are then widened to take in both,
giving the composite areas A2* and A4*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..streams import CoincidenceHistogram
from .correlation import PeakAreas, integrate_windows
from .corrections import (
    VisibilityReport,
    bs_correct,
    histogram_dark_estimate,
    subtract_background,
    tpi_visibility_crosspol,
    tpi_visibility_sidepeak,
)

TPI_HALF_WINDOW = 1500.0
FAR_CLUSTERS = 3


@dataclass
class TPIPeakAreas:
    zero: PeakAreas  # keys -2..2
    far: PeakAreas  # center peak of cluster k at k * period, k != 0
    overlapped: bool

    def subtract(self, per_channel: float) -> "TPIPeakAreas":
        return TPIPeakAreas(subtract_background(self.zero, per_channel), subtract_background(self.far, per_channel), self.overlapped)

    @property
    def side_sum(self) -> float:
        """A2* + A4*, the composite areas when the period makes peaks overlap."""
        a2, a4 = self.zero[-1], self.zero[1]
        return a2 + a4 if self.overlapped else 1.5 * (a2 + a4)

    def g2_center(self) -> float:
        """Zero-delay area scaled so that distinguishable photons give 1."""
        far = self.far.side().mean() if self.far.areas else self.far_mean_from_zero()
        return 3.0 * self.zero[0] / far

    def far_mean_from_zero(self):
        raise ValueError("no far clusters integrated")


def clusters_overlap(delay: float, period: float, half_window: float) -> bool:
    return abs((period - 2 * delay) - delay) < 2 * half_window


def tpi_peak_areas(
    h: CoincidenceHistogram,
    delay: float = 4000.0,
    period: float | None = None,
    half_window: float = TPI_HALF_WINDOW,
    far_clusters: int = FAR_CLUSTERS,
) -> TPIPeakAreas:
    period = period or h.period
    if delay <= 2 * half_window:
        raise ValueError("sub-peaks overlap: delay must exceed 2 * half_window")
    overlapped = clusters_overlap(delay, period, half_window)
    hw = half_window
    win = {k: (k * delay - hw, k * delay + hw) for k in (-2, -1, 0, 1, 2)}
    if overlapped:
        outer = period - 2 * delay  # last peak of the neighbouring cluster
        win[-1] = (-max(outer, delay) - hw, -min(outer, delay) + hw)
        win[1] = (min(outer, delay) - hw, max(outer, delay) + hw)
        inner2 = period - delay
        win[-2] = (-max(inner2, 2 * delay) - hw, min(win[-1][0], -min(inner2, 2 * delay) + hw) - 1)
        win[2] = (max(win[1][1], min(inner2, 2 * delay) - hw) + 1, max(inner2, 2 * delay) + hw)
    zero = integrate_windows(h, win)
    far_win = {}
    for k in range(1, far_clusters + 1):
        for s in (-1, 1):
            c = s * k * period
            if h.edges[0] <= c - hw and c + hw <= h.edges[-1]:
                far_win[s * k] = (c - hw, c + hw)
    far = integrate_windows(h, far_win)
    return TPIPeakAreas(zero, far, overlapped)


def _sidepeak_error(p: TPIPeakAreas) -> float:
    a3 = max(p.zero[0], 1.0)
    r = p.side_sum / 3.0
    var_r = (p.zero[-1] + p.zero[1]) / 9.0 * (1.0 if p.overlapped else 2.25)
    return float((a3 / r) * np.sqrt(1.0 / a3 + var_r / r**2))


def sidepeak_visibility(p: TPIPeakAreas) -> float:
    if p.overlapped:
        return tpi_visibility_sidepeak(p.zero[-1], p.zero[0], p.zero[1])
    return tpi_visibility_sidepeak(1.5 * p.zero[-1], p.zero[0], 1.5 * p.zero[1])


def analyze_tpi(
    h_parallel: CoincidenceHistogram,
    h_cross: CoincidenceHistogram,
    channel: str,
    n_dc: float,
    mode_overlap: float,
    g2_residual: float,
    delay: float = 4000.0,
    half_window: float = TPI_HALF_WINDOW,
) -> dict[str, VisibilityReport]:
    """Raw, dark-corrected and fully corrected visibilities by both methods."""
    par = tpi_peak_areas(h_parallel, delay, half_window=half_window)
    crs = tpi_peak_areas(h_cross, delay, half_window=half_window)
    par_c = par.subtract(histogram_dark_estimate(h_parallel, n_dc))
    crs_c = crs.subtract(histogram_dark_estimate(h_cross, n_dc))

    v_raw = sidepeak_visibility(par)
    v_apd = sidepeak_visibility(par_c)
    side = VisibilityReport(v_raw, v_apd, bs_correct(v_apd, mode_overlap, g2_residual), "side_peak", channel, _sidepeak_error(par))

    g_par, g_crs = par.g2_center(), crs.g2_center()
    c_raw = tpi_visibility_crosspol(g_par, g_crs)
    c_apd = tpi_visibility_crosspol(par_c.g2_center(), crs_c.g2_center())
    a_par, a_crs = max(par.zero[0], 1.0), max(crs.zero[0], 1.0)
    c_err = (g_par / g_crs) * float(np.sqrt(1 / a_par + 1 / a_crs + 1 / par.far.side().sum() + 1 / crs.far.side().sum()))
    cross = VisibilityReport(c_raw, c_apd, bs_correct(c_apd, mode_overlap, g2_residual), "cross_pol", channel, c_err)
    return {"side_peak": side, "cross_pol": cross}
