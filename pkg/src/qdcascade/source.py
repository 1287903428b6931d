"""Stochastic model of the quantum-dot biexciton-exciton cascade.

Covers two-photon Rabi preparation of the biexciton, radiative cascade
timing, joint polarization sampling and pure-dephasing phase trajectories.
Photon emission times are kept as floats (ps); the detector rounds them to
integer ps when it produces a time tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from .quantum_state import (
    CascadeStateParams,
    H,
    V,
    PolarizationVector,
    TwoQubitDensity,
    cascade_state,
    pair_probabilities,
)
from .rng import as_generator

CHANNELS = ("X", "XX")


@dataclass(frozen=True)
class SourceParams:
    t1_xx: float = C.T1_XX_PS
    t1_x: float = C.T1_X_PS
    t2_xx: float = C.T2_XX_PS
    t2_x: float = C.T2_X_PS
    rabi_damping: float = 0.05
    incoherent_slope: float = 0.0447
    state: CascadeStateParams = field(default_factory=CascadeStateParams)
    rep_period: float = C.REP_PERIOD_PS
    double_pulse_delay: float = 0.0

    def __post_init__(self):
        for name in ("t1_xx", "t1_x", "t2_xx", "t2_x", "rep_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t2_x > 2 * self.t1_x * (1 + 1e-12):
            raise ValueError(
                f"t2_x = {self.t2_x} ps exceeds 2*t1_x = {2 * self.t1_x} ps "
                "(coherence cannot outlast twice the radiative lifetime)"
            )
        if self.t2_xx > 2 * self.t1_xx * (1 + 1e-12):
            raise ValueError(
                f"t2_xx = {self.t2_xx} ps exceeds 2*t1_xx = {2 * self.t1_xx} ps "
                "(coherence cannot outlast twice the radiative lifetime)"
            )
        if self.rabi_damping < 0 or self.incoherent_slope < 0:
            raise ValueError("rabi_damping and incoherent_slope must be non-negative")
        if self.double_pulse_delay < 0 or self.double_pulse_delay >= self.rep_period:
            raise ValueError("double_pulse_delay must lie in [0, rep_period)")

    def lifetime(self, channel: str) -> float:
        return self.t1_x if _check_channel(channel) == "X" else self.t1_xx

    def coherence_time(self, channel: str) -> float:
        return self.t2_x if _check_channel(channel) == "X" else self.t2_xx


@dataclass(frozen=True)
class PulseParams:
    duration_fwhm: float = C.PULSE_DURATION_PS
    linewidth_fwhm: float = C.PULSE_LINEWIDTH_UEV

    def __post_init__(self):
        if not (self.duration_fwhm > 0 and self.linewidth_fwhm > 0):
            raise ValueError("pulse duration and linewidth must be positive")


@dataclass(frozen=True)
class PhotonEvent:
    """One emitted photon.

    ``wavepacket_start`` is the time its emitting level was populated: the
    pulse time for XX, the XX emission time for X. It sets the origin of the
    exponential wavepacket used for two-photon interference.
    """

    channel: str
    emission_time: float
    polarization: PolarizationVector
    pair_id: int
    coherence_seed: int
    wavepacket_start: float


def _check_channel(channel: str) -> str:
    if channel not in CHANNELS:
        raise ValueError(f"channel must be 'X' or 'XX', got {channel!r}")
    return channel


def biexciton_population(theta, kappa: float = 0.0, c: float = 0.0):
    """Damped two-photon Rabi population of |XX> after a pulse of area theta."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("pulse area must be non-negative")
    pop = np.sin(theta / 2.0) ** 2 * np.exp(-kappa * theta) + c * theta
    pop = np.clip(pop, 0.0, 1.0)
    return float(pop) if pop.ndim == 0 else pop


def preparation_fidelity_bound(i_pi: float, i_2pi: float) -> float:
    """Lower bound I(pi) / (I(pi) + I(2 pi)) on the biexciton preparation fidelity."""
    if i_pi < 0 or i_2pi < 0:
        raise ValueError("intensities must be non-negative")
    if i_pi + i_2pi == 0:
        raise ValueError("both intensities are zero")
    return i_pi / (i_pi + i_2pi)


def cascade_populations(t, t1_xx: float, t1_x: float):
    """Closed-form (n_XX, n_X) of the three-level cascade with n_XX(0) = 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    n_xx = np.exp(-t / t1_xx)
    if np.isclose(t1_xx, t1_x, rtol=1e-9):
        n_x = (t / t1_x) * np.exp(-t / t1_x)
    else:
        # b/(b-a) * (exp(-t/b) - exp(-t/a)); factor out the slower decay to
        # avoid both cancellation and overflow
        a, b = t1_xx, t1_x
        slow = min(1.0 / a, 1.0 / b)
        diff = np.expm1(-t * (1.0 / b - slow)) - np.expm1(-t * (1.0 / a - slow))
        n_x = b / (b - a) * np.exp(-t * slow) * diff
    if t.ndim == 0:
        return float(n_xx), float(n_x)
    return n_xx, n_x


def emission_rates(t, t1_xx: float, t1_x: float):
    """Photon emission rates (XX, X) per ps: n_XX/T1,XX and n_X/T1,X."""
    n_xx, n_x = cascade_populations(t, t1_xx, t1_x)
    return np.asarray(n_xx) / t1_xx, np.asarray(n_x) / t1_x


def x_delay_cdf(t, t1_xx: float, t1_x: float):
    """CDF of the X emission delay after the pulse: ground-state population."""
    n_xx, n_x = cascade_populations(t, t1_xx, t1_x)
    return 1.0 - np.asarray(n_xx) - np.asarray(n_x)


def sample_pair_polarization(
    rho: TwoQubitDensity,
    basis: Sequence[tuple[PolarizationVector, PolarizationVector]],
    rng,
) -> tuple[PolarizationVector, PolarizationVector]:
    """Draw one (pol_xx, pol_x) outcome from a 4-element product basis."""
    rng = as_generator(rng)
    vecs = [np.kron(a.components, b.components) for a, b in basis]
    gram = np.array([[np.vdot(u, w) for w in vecs] for u in vecs])
    if not np.allclose(gram, np.eye(4), atol=1e-9):
        raise ValueError("projectors do not form an orthonormal product basis")
    probs = np.array([np.real(np.vdot(u, rho.matrix @ u)) for u in vecs])
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return basis[rng.choice(4, p=probs)]


def product_basis(pols_xx, pols_x):
    return [(a, b) for a in pols_xx for b in pols_x]


def emit_cascade(
    params: SourceParams,
    pulse_time: float,
    prepared: bool,
    rng,
    basis: Optional[Sequence[tuple[PolarizationVector, PolarizationVector]]] = None,
    pair_id: int = 0,
) -> Optional[tuple[PhotonEvent, PhotonEvent]]:
    """Emit the (XX, X) photon pair of one excitation, or nothing if unprepared."""
    if not prepared:
        return None
    rng = as_generator(rng)
    d1 = rng.exponential(params.t1_xx)
    d2 = rng.exponential(params.t1_x)
    if basis is None:
        basis = product_basis((H, V), (H, V))
    rho = cascade_state(params.state, d2)
    pol_xx, pol_x = sample_pair_polarization(rho, basis, rng)
    seeds = rng.integers(0, 2**63, size=2)
    t_xx = pulse_time + d1
    xx = PhotonEvent("XX", t_xx, pol_xx, pair_id, int(seeds[0]), float(pulse_time))
    x = PhotonEvent("X", t_xx + d2, pol_x, pair_id, int(seeds[1]), t_xx)
    return xx, x


@dataclass
class CascadeBatch:
    """Vectorized cascades for a set of pulses (only prepared pulses kept)."""

    pulse_index: np.ndarray
    pulse_time: np.ndarray
    xx_time: np.ndarray
    x_time: np.ndarray

    @property
    def x_delay(self) -> np.ndarray:
        return self.x_time - self.xx_time

    def channel_times(self, channel: str) -> np.ndarray:
        return self.x_time if _check_channel(channel) == "X" else self.xx_time

    def wavepacket_start(self, channel: str) -> np.ndarray:
        return self.xx_time if _check_channel(channel) == "X" else self.pulse_time

    def __len__(self):
        return self.pulse_index.size


def emit_cascades(params: SourceParams, pulse_times: np.ndarray, theta: float, rng) -> CascadeBatch:
    """Prepare and emit cascades for an array of pulse times."""
    pulse_times = np.asarray(pulse_times, dtype=float)
    pop = biexciton_population(theta, params.rabi_damping, params.incoherent_slope)
    prepared = rng.random(pulse_times.size) < pop
    idx = np.flatnonzero(prepared)
    d1 = rng.exponential(params.t1_xx, idx.size)
    d2 = rng.exponential(params.t1_x, idx.size)
    t0 = pulse_times[idx]
    return CascadeBatch(idx, t0, t0 + d1, t0 + d1 + d2)


def sample_projection(
    params: CascadeStateParams,
    x_delay: np.ndarray,
    pol_xx: PolarizationVector,
    pol_x: PolarizationVector,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Polarizer transmission of each XX and X photon.

    The XX outcome is drawn from its marginal, then the X outcome from the
    conditional given the XX result. Returns two boolean arrays.
    """
    probs = pair_probabilities(params, x_delay, (pol_xx, pol_xx.orthogonal()), (pol_x, pol_x.orthogonal()))
    p_xx = probs[:, 0, :].sum(axis=1)
    xx_pass = rng.random(p_xx.size) < p_xx
    row = np.where(xx_pass, 0, 1)
    joint = probs[np.arange(p_xx.size), row, 0]
    marginal = np.where(xx_pass, p_xx, 1.0 - p_xx)
    cond = np.divide(joint, marginal, out=np.zeros_like(joint), where=marginal > 0)
    x_pass = rng.random(p_xx.size) < cond
    return xx_pass, x_pass


def pure_dephasing_rate(t1: float, t2: float) -> float:
    if t2 > 2 * t1 * (1 + 1e-12):
        raise ValueError(f"t2 = {t2} ps exceeds 2*t1 = {2 * t1} ps; unphysical")
    return max(1.0 / t2 - 1.0 / (2.0 * t1), 0.0)


def phase_trajectory(t1: float, t2: float, duration: float, dt: float, rng) -> np.ndarray:
    """Wiener phase path phi(t) on a grid of step dt, starting at 0.

    Increments are independent N(0, 2 gamma* dt) with
    gamma* = 1/t2 - 1/(2 t1), so <exp(i[phi(t+tau) - phi(t)])> = exp(-gamma* tau).
    """
    gamma = pure_dephasing_rate(t1, t2)
    n = int(round(duration / dt))
    rng = as_generator(rng)
    if gamma == 0.0:
        return np.zeros(n + 1)
    steps = rng.normal(0.0, np.sqrt(2.0 * gamma * dt), n)
    return np.concatenate(([0.0], np.cumsum(steps)))


def time_bandwidth_product(p: PulseParams) -> float:
    """Duration (s) times spectral FWHM (Hz), using nu = E / h."""
    bandwidth_hz = p.linewidth_fwhm / C.PLANCK_UEV_NS * 1e9
    return p.duration_fwhm * 1e-12 * bandwidth_hz
