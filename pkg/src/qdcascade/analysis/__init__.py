"""Analysis of simulated or recorded time tags."""

from .correlation import PeakAreas, correlate, g2_zero, g2_zero_error, integrate_peaks, integrate_windows
from .corrections import (
    VisibilityReport,
    apd_correct,
    bs_correct,
    contrast,
    contrast_error,
    correct_visibility,
    dark_coincidence_estimate,
    histogram_dark_estimate,
    rescale_overlapped_peaks,
    subtract_background,
    tpi_visibility_crosspol,
    tpi_visibility_sidepeak,
)
from .fitting import FitError, FitResult, fit_coherence, fit_lifetimes, fit_rabi
from .tomography import TomographyResult, corrected_g2, tomography_pipeline
from .tpi import TPIPeakAreas, analyze_tpi, sidepeak_visibility, tpi_peak_areas

__all__ = [
    "PeakAreas", "correlate", "g2_zero", "g2_zero_error", "integrate_peaks", "integrate_windows",
    "VisibilityReport", "apd_correct", "bs_correct", "contrast", "contrast_error", "correct_visibility",
    "dark_coincidence_estimate", "histogram_dark_estimate", "rescale_overlapped_peaks", "subtract_background",
    "tpi_visibility_crosspol", "tpi_visibility_sidepeak", "FitError", "FitResult", "fit_coherence",
    "fit_lifetimes", "fit_rabi", "TomographyResult", "corrected_g2", "tomography_pipeline", "TPIPeakAreas", "analyze_tpi",
    "sidepeak_visibility", "tpi_peak_areas",
]
