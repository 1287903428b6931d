"""Dark-count corrections, polarization contrasts and TPI visibilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import PeakAreas


def dark_coincidence_estimate(n_s1: float, n_s2: float, n_dc: float, tau_c: float, t: float) -> float:
    """Uncorrelated coincidences per histogram channel, (n_s1 + n_s2) n_dc tau_c T.

    Rates in counts/s, tau_c and t in s.
    """
    if min(n_s1, n_s2, n_dc, tau_c, t) < 0:
        raise ValueError("all inputs must be non-negative")
    return (n_s1 + n_s2) * n_dc * tau_c * t


def histogram_dark_estimate(h, n_dc: float) -> float:
    """:func:`dark_coincidence_estimate` using a histogram's own metadata."""
    return dark_coincidence_estimate(h.singles_rates[0], h.singles_rates[1], n_dc, h.bin_width * 1e-12, h.integration_time)


def subtract_background(p: PeakAreas, per_channel: float, bins_per_peak: int | None = None) -> PeakAreas:
    """Remove a flat background of ``per_channel`` counts per bin from every peak.

    With ``bins_per_peak`` omitted the bin count recorded for each peak is
    used. Negative results are clamped at zero and flagged.
    """
    if per_channel < 0:
        raise ValueError("per_channel must be non-negative")
    out, clamped = {}, False
    for k, area in p.areas.items():
        nb = bins_per_peak if bins_per_peak is not None else p.n_bins.get(k, 0)
        v = area - per_channel * nb
        if v < 0:
            clamped = True
            v = 0.0
        out[k] = v
    return PeakAreas(out, dict(p.n_bins), clamped or p.clamped)


def contrast(g2_co: float, g2_cross: float) -> float:
    if g2_co + g2_cross <= 0:
        raise ValueError("degenerate contrast: g2_co + g2_cross must be positive")
    return (g2_co - g2_cross) / (g2_co + g2_cross)


def contrast_error(g2_co: float, g2_cross: float, s_co: float, s_cross: float) -> float:
    s = g2_co + g2_cross
    d_co = 2 * g2_cross / s**2
    d_cross = -2 * g2_co / s**2
    return float(np.hypot(d_co * s_co, d_cross * s_cross))


def rescale_overlapped_peaks(a2_star: float, a4_star: float) -> tuple[float, float]:
    """Undo the overlap with the neighbouring cluster: A = (2/3) A*."""
    if a2_star < 0 or a4_star < 0:
        raise ValueError("areas must be non-negative")
    return 2.0 * a2_star / 3.0, 2.0 * a4_star / 3.0


def tpi_visibility_sidepeak(a2_star: float, a3: float, a4_star: float) -> float:
    if a2_star + a4_star <= 0:
        raise ValueError("side peaks A2* + A4* must be positive")
    return 1.0 - a3 / ((a2_star + a4_star) / 3.0)


def tpi_visibility_crosspol(g2_parallel_center: float, g2_cross_center: float) -> float:
    if g2_cross_center <= 0:
        raise ValueError("cross-polarized reference must be positive")
    return 1.0 - g2_parallel_center / g2_cross_center


@dataclass(frozen=True)
class VisibilityReport:
    raw: float
    apd_corrected: float
    fully_corrected: float
    method: str
    channel: str
    raw_error: float = float("nan")


def apd_correct(v_raw: float, accidental_fraction: float) -> float:
    """Visibility after removing accidentals that make up ``accidental_fraction`` of the reference peak.

    The same absolute background sits under the center and the reference,
    so 1 - V = (A3 - B) / (R - B) with B = accidental_fraction * R.
    """
    if not 0.0 <= accidental_fraction < 1.0:
        raise ValueError("accidental_fraction must lie in [0, 1)")
    return 1.0 - (1.0 - v_raw - accidental_fraction) / (1.0 - accidental_fraction)


def implied_accidental_fraction(v_raw: float, v_apd: float) -> float:
    """Inverse of :func:`apd_correct`."""
    return (v_apd - v_raw) / v_apd


def bs_correct(v_apd: float, mode_overlap: float, g2_residual: float) -> float:
    """Divide out the beamsplitter mode overlap squared and multi-photon emission."""
    factor = mode_overlap**2 * (1.0 - 2.0 * g2_residual)
    if factor <= 0:
        raise ValueError("correction factor must be positive")
    return min(v_apd / factor, 1.0)


def correct_visibility(
    v: float,
    accidental_fraction: float,
    mode_overlap_1me: float,
    g2_residual: float,
    method: str = "side_peak",
    channel: str = "XX",
) -> VisibilityReport:
    v_apd = apd_correct(v, accidental_fraction)
    return VisibilityReport(v, v_apd, bs_correct(v_apd, mode_overlap_1me, g2_residual), method, channel)
