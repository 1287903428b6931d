"""Detection chain: efficiency, timing jitter, dark counts and beamsplitters.

Two-photon (Hong-Ou-Mandel) coalescence uses the overlap of exponential
wavepackets carrying sampled pure-dephasing phase trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import as_generator
from .source import PhotonEvent, SourceParams, pure_dephasing_rate
from .streams import TimeTagStream

OVERLAP_WINDOW_T1 = 8.0  # overlap integral runs over 8 T1 from the later start
OVERLAP_DT = 1.0  # ps


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 1.0
    dark_rate: float = 0.0  # counts/s
    jitter_sigma: float = 0.0  # ps
    id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be non-negative")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")


@dataclass(frozen=True)
class TimeTag:
    detector_id: int
    timestamp: int


@dataclass(frozen=True)
class BeamsplitterParams:
    transmittance: float = 0.5
    mode_overlap: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError("transmittance must lie in [0, 1]")
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ValueError("mode_overlap must lie in [0, 1]")


def detect(event: PhotonEvent, d: DetectorParams, rng) -> Optional[TimeTag]:
    rng = as_generator(rng)
    if rng.random() >= d.efficiency:
        return None
    t = event.emission_time + (rng.normal(0.0, d.jitter_sigma) if d.jitter_sigma > 0 else 0.0)
    return TimeTag(d.id, int(np.rint(t)))


def detect_times(times: np.ndarray, d: DetectorParams, rng) -> np.ndarray:
    """Vectorized :func:`detect`: thin by efficiency, add jitter, round to ps."""
    times = np.asarray(times, dtype=float)
    kept = times[rng.random(times.size) < d.efficiency]
    if d.jitter_sigma > 0:
        kept = kept + rng.normal(0.0, d.jitter_sigma, kept.size)
    return np.rint(kept).astype(np.int64)


def dark_count_times(rate_cps: float, t_start: int, t_end: int, rng) -> np.ndarray:
    """Homogeneous Poisson click times (integer ps) in [t_start, t_end)."""
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")
    if rate_cps == 0:
        return np.empty(0, dtype=np.int64)
    n = rng.poisson(rate_cps * (t_end - t_start) * 1e-12)
    t = t_start + np.floor(rng.random(n) * (t_end - t_start)).astype(np.int64)
    return np.sort(t)


def dark_counts(d: DetectorParams, t_start: int, t_end: int, rng) -> TimeTagStream:
    rng = as_generator(rng)
    t = dark_count_times(d.dark_rate, t_start, t_end, rng)
    return TimeTagStream(t, np.full(t.size, d.id, dtype=np.int16), t_start, t_end)


def route_single(tag_time, bs: BeamsplitterParams, rng) -> int:
    """Output port of a lone photon: 0 with probability ``transmittance``."""
    rng = as_generator(rng)
    return 0 if rng.random() < bs.transmittance else 1


def wavepacket_overlap(delta: float, t1: float, phase_diff: Optional[np.ndarray] = None, dt: float = OVERLAP_DT) -> complex:
    """Overlap <psi_a|psi_b> of two exponential wavepackets.

    Packet b starts ``delta`` ps after packet a (either sign). The integral is
    a sum on a grid of step dt covering 8*t1 from the later start; each
    packet is normalized on that grid, so identical packets give exactly 1.
    ``phase_diff`` holds phi_b - phi_a on the grid when dephasing is present.
    """
    n = int(round(OVERLAP_WINDOW_T1 * t1 / dt))
    grid = np.arange(n) * dt
    envelope = np.exp(-grid / t1)
    norm = envelope.sum()
    weight = np.exp(-abs(delta) / (2.0 * t1)) / norm
    if phase_diff is None:
        return complex(weight * norm)
    return complex(weight * np.sum(envelope * np.exp(1j * phase_diff[:n])))


def sample_overlap_squared(deltas, t1: float, t2: float, rng, batch: int = 256, dt: float = OVERLAP_DT) -> np.ndarray:
    """|O_ab|^2 for many photon pairs with independently sampled phase paths.

    Each photon gets its own Wiener phase trajectory (increment variance
    2 gamma* dt); only the difference enters the overlap.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    gamma = pure_dephasing_rate(t1, t2)
    n = int(round(OVERLAP_WINDOW_T1 * t1 / dt))
    envelope = np.exp(-np.arange(n) * dt / t1)
    norm = envelope.sum()
    offset = np.exp(-np.abs(deltas) / t1)
    if gamma == 0.0:
        return offset
    sigma = np.sqrt(2.0 * gamma * dt)
    out = np.empty(deltas.size)
    for lo in range(0, deltas.size, batch):
        m = min(batch, deltas.size - lo)
        phi_a = np.cumsum(rng.normal(0.0, sigma, (m, n)), axis=1)
        phi_b = np.cumsum(rng.normal(0.0, sigma, (m, n)), axis=1)
        o = (envelope * np.exp(1j * (phi_b - phi_a))).sum(axis=1) / norm
        out[lo : lo + m] = np.abs(o) ** 2
    return out * offset


def analytic_mean_overlap(t1: float, t2: float) -> float:
    """Ensemble <|O|^2> of simultaneous exponential packets: T2 / (2 T1)."""
    return t2 / (2.0 * t1)


def coincidence_probability(m, transmittance: float = 0.5):
    """Probability that two photons leave through different ports.

    m is the effective mode overlap (0 = distinguishable, 1 = identical).
    """
    t, r = transmittance, 1.0 - transmittance
    return t * t + r * r - 2.0 * t * r * np.asarray(m)


def hom_route(m: np.ndarray, transmittance: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Joint output ports for photon a (input 0) and b (input 1).

    ``u`` are uniform draws, one per pair, so that the same draws give
    nested coincidence sets for increasing overlap.
    """
    t, r = transmittance, 1.0 - transmittance
    m = np.asarray(m, dtype=float)
    p_a0b1 = t * t - 2.0 * t * r * m * (t * t / max(t * t + r * r, 1e-300))
    p_a1b0 = coincidence_probability(m, t) - p_a0b1
    p_both0 = t * r * (1.0 + m)
    port_a = np.ones(u.size, dtype=np.int8)
    port_b = np.zeros(u.size, dtype=np.int8)
    c1 = p_a0b1
    c2 = c1 + p_a1b0
    c3 = c2 + p_both0
    sel = u < c1
    port_a[sel], port_b[sel] = 0, 1
    sel = (u >= c1) & (u < c2)
    port_a[sel], port_b[sel] = 1, 0
    sel = (u >= c2) & (u < c3)
    port_a[sel], port_b[sel] = 0, 0
    sel = u >= c3
    port_a[sel], port_b[sel] = 1, 1
    return port_a, port_b


def hom_coalesce(
    photon_a: PhotonEvent,
    photon_b: PhotonEvent,
    bs: BeamsplitterParams,
    parallel: bool,
    rng,
    source: Optional[SourceParams] = None,
) -> tuple[int, int]:
    """Output ports of two photons meeting at a beamsplitter.

    For parallel, identical polarizations the coincidence probability is
    (1 - M)/2 at a 50/50 splitter with M = mode_overlap^2 |O_ab|^2; otherwise
    the photons are routed independently.
    """
    rng = as_generator(rng)
    same_pol = np.allclose(photon_a.polarization.components, photon_b.polarization.components)
    if not (parallel and same_pol):
        return route_single(photon_a.emission_time, bs, rng), 1 - route_single(photon_b.emission_time, bs, rng)
    source = source or SourceParams()
    t1 = source.lifetime(photon_a.channel)
    t2 = source.coherence_time(photon_a.channel)
    gamma = pure_dephasing_rate(t1, t2)
    delta = photon_b.wavepacket_start - photon_a.wavepacket_start
    n = int(round(OVERLAP_WINDOW_T1 * t1 / OVERLAP_DT))
    if gamma > 0:
        sigma = np.sqrt(2.0 * gamma * OVERLAP_DT)
        phi_a = np.cumsum(np.random.default_rng(photon_a.coherence_seed).normal(0.0, sigma, n))
        phi_b = np.cumsum(np.random.default_rng(photon_b.coherence_seed).normal(0.0, sigma, n))
        overlap = wavepacket_overlap(delta, t1, phi_b - phi_a)
    else:
        overlap = wavepacket_overlap(delta, t1)
    m = min(bs.mode_overlap**2 * abs(overlap) ** 2, 1.0)
    a, b = hom_route(np.array([m]), bs.transmittance, rng.random(1))
    return int(a[0]), int(b[0])
