"""Physical constants and paper-default parameter values.

Units used throughout the package: time in ps, energy in µeV, rates in
counts per second unless a name says otherwise.
"""

import math

HBAR_UEV_PS = 658.2119
PLANCK_UEV_NS = 4.135667

# Fourier limit of a Gaussian pulse, 2 ln 2 / pi, quoted to three digits.
GAUSSIAN_TBP = 0.441
GAUSSIAN_TBP_EXACT = 2.0 * math.log(2.0) / math.pi

REP_RATE_HZ = 76e6
REP_PERIOD_PS = 13158  # 1 / 76 MHz rounded to the ps

T1_XX_PS = 220.0
T1_X_PS = 400.0
T2_XX_PS = 192.0  # resonant two-photon excitation, exponential g1
T2_X_PS = 357.0  # resonant two-photon excitation, Gaussian g1
T2_XX_NRE_PS = 114.0
T2_X_NRE_PS = 229.0

DARK_RATE_CPS = 250.0
SINGLES_RATE_CPS = 3000.0
APD_JITTER_PS = 50.0

TPI_DELAY_PS = 4000
MODE_OVERLAP = 0.95

PULSE_DURATION_PS = 21.4
PULSE_LINEWIDTH_UEV = 95.0

# measured contrasts and correlations from the cross-polarization series
PAPER_CONTRASTS = {"linear": 0.87, "diagonal": 0.67, "circular": -0.69}
PAPER_G2_POLARIZED = {
    ("linear", True): 2.40,
    ("linear", False): 0.17,
    ("diagonal", True): 2.18,
    ("diagonal", False): 0.43,
    ("circular", True): 0.31,
    ("circular", False): 1.70,
}
PAPER_FIDELITY = 0.81

# residual two-photon emission used for the beamsplitter correction
G2_RESIDUAL = {"X": 0.004, "XX": 0.003}

# visibility tables: (raw, APD corrected, APD + BS corrected)
TPI_TABLE_SIDEPEAK = {"X": (0.46, 0.63, 0.71), "XX": (0.59, 0.77, 0.86)}
TPI_TABLE_CROSSPOL = {"X": (0.44, 0.61, 0.69), "XX": (0.58, 0.75, 0.84)}
