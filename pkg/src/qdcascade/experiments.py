"""Virtual experiments reproducing each measurement geometry.

Every run splits its pulse train into fixed-size blocks. Block ``i`` draws
from the substream (seed, experiment name, i) and returns plain arrays, so
the merged output is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .constants import TPI_DELAY_PS
from .detection import (
    BeamsplitterParams,
    DetectorParams,
    dark_count_times,
    detect_times,
    hom_route,
    sample_overlap_squared,
)
from .quantum_state import H, V, basis_pair, pair_probabilities
from .rng import substream
from .source import (
    SourceParams,
    _check_channel,
    biexciton_population,
    emit_cascades,
    sample_projection,
)
from .streams import CoincidenceHistogram, TimeTagStream

BLOCK_PERIODS = 1 << 15


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceParams = field(default_factory=SourceParams)
    detectors: tuple[DetectorParams, DetectorParams] = (DetectorParams(id=0), DetectorParams(id=1))
    pulse_area: float = math.pi
    duration: float = 1e-3  # s
    seed: int = 0
    mzi_delay: float = TPI_DELAY_PS
    beamsplitter: BeamsplitterParams = field(default_factory=BeamsplitterParams)
    coincidence_window: float = 2000.0  # ps, HOM pairing at the second beamsplitter
    workers: int = 1
    block_periods: int = BLOCK_PERIODS

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if len(self.detectors) != 2:
            raise ValueError("exactly two detectors are required")
        if self.pulse_area < 0:
            raise ValueError("pulse_area must be non-negative")
        if self.workers < 1 or self.block_periods < 1:
            raise ValueError("workers and block_periods must be >= 1")

    @property
    def period(self) -> int:
        return int(round(self.source.rep_period))

    @property
    def n_periods(self) -> int:
        return max(int(round(self.duration * 1e12 / self.period)), 1)

    def with_periods(self, n: int) -> "ExperimentConfig":
        return replace(self, duration=n * self.period * 1e-12)


@dataclass(frozen=True)
class LineshapeModel:
    kind: str
    t2: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "exponential"):
            raise ValueError(f"unknown lineshape kind {self.kind!r}")
        if not self.t2 > 0:
            raise ValueError("t2 must be positive")


@dataclass
class PowerSeries:
    theta: np.ndarray
    i_x: np.ndarray
    i_xx: np.ndarray
    pulses_per_point: int


def _call(task):
    kernel, args = task
    return kernel(*args)


def _run_blocks(cfg: ExperimentConfig, name: str, kernel: Callable, *extra) -> list:
    n = cfg.n_periods
    bp = cfg.block_periods
    tasks = [(kernel, (cfg, name, i, p0, min(bp, n - p0), *extra)) for i, p0 in enumerate(range(0, n, bp))]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_call, tasks))
    return [_call(t) for t in tasks]


def _streams(cfg: ExperimentConfig, results: list, meta: dict) -> tuple[TimeTagStream, TimeTagStream]:
    t_end = cfg.n_periods * cfg.period
    out = []
    for d in range(2):
        t = np.sort(np.concatenate([r[d] for r in results]), kind="stable")
        det = cfg.detectors[d]
        m = dict(meta, seed=cfg.seed, period=cfg.period, dark_rate=det.dark_rate, detector=det.id)
        out.append(TimeTagStream(t, np.full(t.size, det.id, dtype=np.int16), 0, t_end, m))
    return out[0], out[1]


def _block_window(cfg, p0, n):
    return p0 * cfg.period, (p0 + n) * cfg.period


def _dark(cfg, rng, p0, n):
    lo, hi = _block_window(cfg, p0, n)
    return [dark_count_times(d.dark_rate, lo, hi, rng) for d in cfg.detectors]


# -- Hanbury Brown-Twiss -----------------------------------------------------


def _hbt_block(cfg, name, block, p0, n, channel):
    rng = substream(cfg.seed, name, block)
    pulses = (p0 + np.arange(n)) * float(cfg.period)
    batch = emit_cascades(cfg.source, pulses, cfg.pulse_area, rng)
    t = batch.channel_times(channel)
    port = (rng.random(t.size) >= 0.5).astype(np.int8)
    dark = _dark(cfg, rng, p0, n)
    return [np.concatenate([detect_times(t[port == d], cfg.detectors[d], rng), dark[d]]) for d in range(2)]


def run_hbt(cfg: ExperimentConfig, channel: str) -> tuple[TimeTagStream, TimeTagStream]:
    """Autocorrelation of one spectral line through a 50/50 fiber splitter."""
    _check_channel(channel)
    name = f"hbt:{channel}"
    res = _run_blocks(cfg, name, _hbt_block, channel)
    return _streams(cfg, res, {"experiment": "hbt", "channel": channel})


# -- cross-correlation tomography --------------------------------------------


def _tomo_block(cfg, name, block, p0, n, basis, co_polarized):
    rng = substream(cfg.seed, name, block)
    pulses = (p0 + np.arange(n)) * float(cfg.period)
    batch = emit_cascades(cfg.source, pulses, cfg.pulse_area, rng)
    first, second = basis_pair(basis)
    pol_x = first if co_polarized else second
    xx_pass, x_pass = sample_projection(cfg.source.state, batch.x_delay, first, pol_x, rng)
    dark = _dark(cfg, rng, p0, n)
    t0 = detect_times(batch.xx_time[xx_pass], cfg.detectors[0], rng)
    t1 = detect_times(batch.x_time[x_pass], cfg.detectors[1], rng)
    return [np.concatenate([t0, dark[0]]), np.concatenate([t1, dark[1]])]


def run_tomography(cfg: ExperimentConfig, basis: str, co_polarized: bool) -> tuple[TimeTagStream, TimeTagStream]:
    """XX photons projected on the first basis state (detector 0), X photons
    on the same or the orthogonal state (detector 1)."""
    basis_pair(basis)
    name = f"tomo:{basis}:{int(bool(co_polarized))}"
    res = _run_blocks(cfg, name, _tomo_block, basis, bool(co_polarized))
    return _streams(cfg, res, {"experiment": "tomography", "basis": basis, "co_polarized": bool(co_polarized)})


# -- two-photon interference ---------------------------------------------------


def _tpi_block(cfg, name, block, p0, n, channel, parallel):
    rng = substream(cfg.seed, name, block)
    rng_phase = substream(cfg.seed, name + ":phase", block)
    src = cfg.source
    dpd = src.double_pulse_delay or cfg.mzi_delay
    base = (p0 + np.arange(n)) * float(cfg.period)
    pulses = np.empty(2 * n)
    pulses[0::2] = base
    pulses[1::2] = base + dpd
    batch = emit_cascades(src, pulses, cfg.pulse_area, rng)

    # horizontal polarizer in front of the interferometer
    probs = pair_probabilities(src.state, batch.x_delay, (H, V), (H, V))
    p_h = probs[:, 0, :].sum(axis=1) if channel == "XX" else probs[:, :, 0].sum(axis=1)
    keep = rng.random(len(batch)) < p_h
    emit = batch.channel_times(channel)[keep]
    start = batch.wavepacket_start(channel)[keep]
    pidx = batch.pulse_index[keep]
    period_id, slot = pidx // 2, pidx % 2

    long_arm = rng.random(emit.size) < 0.5
    delay = np.where(long_arm, cfg.mzi_delay, 0.0)
    arrival = emit + delay
    start_arrival = start + delay

    bs = cfg.beamsplitter
    eff = np.array([d.efficiency for d in cfg.detectors])
    u_route = rng.random(emit.size)
    u_det = rng.random(emit.size)
    port = (u_route >= bs.transmittance).astype(np.int8)

    # photons of the same period sharing the second beamsplitter
    first = np.flatnonzero((slot[:-1] == 0) & (slot[1:] == 1) & (period_id[:-1] == period_id[1:]))
    a, b = first, first + 1
    close = np.abs(arrival[b] - arrival[a]) < cfg.coincidence_window
    a, b = a[close], b[close]
    if parallel:
        balanced = bs.transmittance == 0.5 and eff[0] == eff[1]
        if balanced:
            # at a balanced splitter each photon's marginal port is 1/2 whatever
            # the overlap, so only pairs with both photons detected matter
            both = (u_det[a] < eff[0]) & (u_det[b] < eff[0])
            a, b = a[both], b[both]
        overlap = sample_overlap_squared(
            start_arrival[b] - start_arrival[a], src.lifetime(channel), src.coherence_time(channel), rng_phase
        )
        m = np.minimum(bs.mode_overlap**2 * overlap, 1.0)
        pa, pb = hom_route(m, bs.transmittance, u_route[a])
        port[a], port[b] = pa, pb
    else:
        # distinguishable: photon b enters the other input port
        port[b] = 1 - (u_route[b] < bs.transmittance).astype(np.int8)

    detected = u_det < eff[port]
    jitter = np.array([d.jitter_sigma for d in cfg.detectors])[port]
    t = np.rint(arrival + rng.normal(0.0, 1.0, emit.size) * jitter).astype(np.int64)
    dark = _dark(cfg, rng, p0, n)
    return [np.concatenate([t[detected & (port == d)], dark[d]]) for d in range(2)]


def run_tpi(cfg: ExperimentConfig, channel: str, parallel: bool) -> tuple[TimeTagStream, TimeTagStream]:
    """Double-pulse excitation into an unbalanced Mach-Zehnder interferometer."""
    _check_channel(channel)
    name = f"tpi:{channel}:{int(bool(parallel))}"
    res = _run_blocks(cfg, name, _tpi_block, channel, bool(parallel))
    return _streams(cfg, res, {"experiment": "tpi", "channel": channel, "parallel": bool(parallel)})


# -- time-resolved photoluminescence -----------------------------------------


def _lifetime_block(cfg, name, block, p0, n, channel):
    rng = substream(cfg.seed, name, block)
    pulses = (p0 + np.arange(n)) * float(cfg.period)
    batch = emit_cascades(cfg.source, pulses, cfg.pulse_area, rng)
    det = cfg.detectors[0]
    t = detect_times(batch.channel_times(channel), det, rng)
    lo, hi = _block_window(cfg, p0, n)
    return [np.concatenate([t, dark_count_times(det.dark_rate, lo, hi, rng)])]


def run_lifetime(
    cfg: ExperimentConfig, channel: str, bin_width: float = 16.0, pre_trigger: float = 1000.0
) -> CoincidenceHistogram:
    """Histogram of detection times relative to the preceding laser pulse.

    The time axis runs over one repetition period starting ``pre_trigger`` ps
    before the pulse, so the jitter-broadened rise is fully contained.
    """
    _check_channel(channel)
    name = f"lifetime:{channel}"
    res = _run_blocks(cfg, name, _lifetime_block, channel)
    t = np.concatenate([r[0] for r in res])
    period = cfg.period
    rel = np.mod(t + pre_trigger, period) - pre_trigger
    n_bins = int(np.floor(period / bin_width))
    edges = -pre_trigger + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(rel, bins=edges)
    duration = cfg.n_periods * period * 1e-12
    return CoincidenceHistogram(
        bin_width=bin_width,
        origin=-pre_trigger,
        counts=counts,
        integration_time=duration,
        singles_rates=(t.size / duration, 1e12 / period),
        period=period,
        meta={"experiment": "lifetime", "channel": channel, "seed": cfg.seed},
    )


# -- Rabi power series -------------------------------------------------------


def _power_point(cfg, i, theta, pulses):
    rng = substream(cfg.seed, "power", i)
    pop = biexciton_population(theta, cfg.source.rabi_damping, cfg.source.incoherent_slope)
    prepared = rng.random(pulses) < pop
    n_prep = int(prepared.sum())
    xx = int((rng.random(n_prep) < cfg.detectors[0].efficiency).sum())
    x = int((rng.random(n_prep) < cfg.detectors[1].efficiency).sum())
    return x, xx


def run_power_series(cfg: ExperimentConfig, theta_grid: Sequence[float], pulses_per_point: int) -> PowerSeries:
    """Detected X and XX counts versus pulse area (XX on detector 0, X on detector 1)."""
    theta = np.asarray(theta_grid, dtype=float)
    if theta.size == 0:
        raise ValueError("theta grid is empty")
    tasks = [(_power_point, (cfg, i, th, int(pulses_per_point))) for i, th in enumerate(theta)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            res = list(pool.map(_call, tasks))
    else:
        res = [_call(t) for t in tasks]
    i_x = np.array([r[0] for r in res], dtype=np.int64)
    i_xx = np.array([r[1] for r in res], dtype=np.int64)
    return PowerSeries(theta, i_x, i_xx, int(pulses_per_point))


# -- first-order coherence ---------------------------------------------------


def g1_curve(model: LineshapeModel, tau_grid: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Fringe contrast versus delay for a Gaussian or exponential lineshape."""
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size == 0:
        raise ValueError("tau grid is empty")
    x = np.abs(tau) / model.t2
    if model.kind == "gaussian":
        return tau, np.exp(-0.5 * np.pi * x**2)
    return tau, np.exp(-x)


def fringe_contrast(i_max: float, i_min: float) -> float:
    if i_max + i_min == 0:
        raise ValueError("i_max + i_min must be positive")
    if i_min < 0 or i_max < i_min:
        raise ValueError("need i_max >= i_min >= 0")
    return (i_max - i_min) / (i_max + i_min)
