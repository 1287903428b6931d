"""Contrasts and Bell-state fidelity from six cross-correlation histograms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..quantum_state import fidelity_from_contrasts
from ..streams import CoincidenceHistogram
from .correlation import g2_zero, g2_zero_error, integrate_peaks
from .corrections import contrast, contrast_error, histogram_dark_estimate, subtract_background

BASES = ("linear", "diagonal", "circular")
HBT_HALF_WINDOW = 774.0  # 13 bins of 129 ps around each peak
SIDE_PEAKS = 5


@dataclass
class TomographyResult:
    g2: dict[tuple[str, bool], float]
    g2_errors: dict[tuple[str, bool], float]
    contrasts: dict[str, float]
    contrast_errors: dict[str, float]
    fidelity: float
    fidelity_error: float


def corrected_g2(h: CoincidenceHistogram, n_dc: float, half_window: float = HBT_HALF_WINDOW, side_peaks: int = SIDE_PEAKS):
    """(raw g2(0), corrected g2(0), corrected error) for one histogram."""
    raw = integrate_peaks(h, h.period, half_window, max_index=side_peaks)
    corr = subtract_background(raw, histogram_dark_estimate(h, n_dc))
    return g2_zero(raw), g2_zero(corr), g2_zero_error(corr, raw)


def tomography_pipeline(
    histograms: Mapping[tuple[str, bool], CoincidenceHistogram],
    n_dc: float,
    half_window: float = HBT_HALF_WINDOW,
    side_peaks: int = SIDE_PEAKS,
) -> TomographyResult:
    """Dark-correct, normalize and combine the six settings.

    ``histograms`` is keyed by (basis, co_polarized). Each center peak is
    normalized to the mean of its own side peaks after subtracting the
    accidental coincidences caused by detector dark counts.
    """
    missing = [(b, co) for b in BASES for co in (True, False) if (b, co) not in histograms]
    if missing:
        raise ValueError(f"missing tomography settings: {missing}")
    g2, g2_err = {}, {}
    for key in sorted(histograms):
        _, g, s = corrected_g2(histograms[key], n_dc, half_window, side_peaks)
        g2[key], g2_err[key] = g, s
    contrasts, c_err = {}, {}
    for b in BASES:
        contrasts[b] = contrast(g2[(b, True)], g2[(b, False)])
        c_err[b] = contrast_error(g2[(b, True)], g2[(b, False)], g2_err[(b, True)], g2_err[(b, False)])
    f = fidelity_from_contrasts(contrasts["linear"], contrasts["diagonal"], contrasts["circular"])
    f_err = 0.25 * float(np.sqrt(sum(e**2 for e in c_err.values())))
    return TomographyResult(g2, g2_err, contrasts, c_err, f, f_err)
