"""Acceptance suite: one test (or small group) per criterion, at desk scale.

Each test attaches a one-line measurement summary; the terminal summary
prints a PASS/FAIL line per criterion.
"""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdcascade import constants as C
from qdcascade.analysis import (
    analyze_tpi,
    correlate,
    corrected_g2,
    fit_coherence,
    fit_lifetimes,
    g2_zero,
    g2_zero_error,
    integrate_peaks,
    integrate_windows,
    sidepeak_visibility,
    tomography_pipeline,
    tpi_peak_areas,
)
from qdcascade.analysis.corrections import histogram_dark_estimate
from qdcascade.analysis.tomography import HBT_HALF_WINDOW
from qdcascade.config import DESK_PERIODS, paper_state, preset_experiment_config
from qdcascade.detection import BeamsplitterParams, analytic_mean_overlap, sample_overlap_squared
from qdcascade.experiments import LineshapeModel, g1_curve, run_hbt, run_lifetime, run_power_series, run_tomography, run_tpi
from qdcascade.quantum_state import BASES, CascadeStateParams, basis_pair, cascade_state, project_pair
from qdcascade.reproduce import RABI_GRID, _rabi_bound, table_chain
from qdcascade.rng import substream
from qdcascade.source import PulseParams, preparation_fidelity_bound, time_bandwidth_product

HBT_BIN = 129
TPI_BIN = 101


def desk(seed=0, **kw):
    return preset_experiment_config("desk", seed=seed, **kw)


def _hist(streams, cfg, bin_width=HBT_BIN, window=None):
    return correlate(*streams, bin_width, window or 6 * cfg.period + 1000, period=cfg.period)


# -- 1 --------------------------------------------------------------------------


@pytest.mark.criterion("1", "antibunching: raw g2(0) 0.022 +/- 0.01, corrected <= 0.005 (3 sigma)")
@pytest.mark.parametrize("channel", ["X", "XX"])
def test_c1_antibunching(channel, detail):
    cfg = desk(seed=10).with_periods(2 * DESK_PERIODS)
    h = _hist(run_hbt(cfg, channel), cfg)
    p = integrate_peaks(h, h.period, HBT_HALF_WINDOW, 5)
    assert p.side().sum() >= 5e4, "fewer than 5e4 coincidences"
    raw, s_raw = g2_zero(p), g2_zero_error(p)
    _, cor, s_cor = corrected_g2(h, cfg.detectors[0].dark_rate)
    detail(f"{channel}: raw {raw:.4f}+/-{s_raw:.4f}, corrected {cor:.4f}+/-{s_cor:.4f}, {p.side().sum():.0f} side coincidences")
    assert abs(raw - 0.022) <= 0.01 + 3 * s_raw
    assert cor <= 0.005 + 3 * s_cor


# -- 2, 3 -------------------------------------------------------------------------


def _tomography(cfg):
    hs = {(b, co): _hist(run_tomography(cfg, b, co), cfg) for b in BASES for co in (True, False)}
    return tomography_pipeline(hs, cfg.detectors[0].dark_rate)


@pytest.mark.criterion("2", "tomography contrasts and fidelity of the calibrated state")
def test_c2_tomography(detail):
    cfg = replace(desk(seed=20), source=replace(desk().source, state=paper_state())).with_periods(DESK_PERIODS)
    r = _tomography(cfg)
    c = r.contrasts
    detail(f"C_lin {c['linear']:.3f}, C_diag {c['diagonal']:.3f}, C_circ {c['circular']:.3f}, f {r.fidelity:.3f}")
    assert abs(c["linear"] - 0.87) <= 0.03
    assert abs(c["diagonal"] - 0.67) <= 0.04
    assert abs(c["circular"] + 0.69) <= 0.03
    assert abs(r.fidelity - 0.81) <= 0.02


@pytest.mark.criterion("3", "ideal psi+ tomography gives (1, 1, -1) and f = 1 within 3 sigma")
def test_c3_ideal_tomography(detail):
    base = desk(seed=30)
    cfg = replace(
        base,
        source=replace(base.source, state=CascadeStateParams()),
        detectors=tuple(replace(d, dark_rate=0.0) for d in base.detectors),
    ).with_periods(100_000)
    r = _tomography(cfg)
    c, e = r.contrasts, r.contrast_errors
    detail(f"C {c['linear']:.4f} {c['diagonal']:.4f} {c['circular']:.4f}, f {r.fidelity:.4f}+/-{r.fidelity_error:.4f}")
    for b, t in (("linear", 1), ("diagonal", 1), ("circular", -1)):
        assert abs(c[b] - t) <= 3 * max(e[b], 1e-12)
    assert abs(r.fidelity - 1) <= 3 * max(r.fidelity_error, 1e-12)


# -- 4 --------------------------------------------------------------------------


def _ratio_ok(a, b, expected):
    x = a / b
    return abs(x - expected) <= 3 * x * np.sqrt(1 / a + 1 / b), x


@pytest.mark.criterion("4", "TPI cross-pol cluster ratios 1:2:2:2:1 and 1:4:6:4:1, A2*/A4* composition")
def test_c4_cluster_combinatorics(detail):
    base = desk(seed=40)
    d = base.mzi_delay
    out = []
    for period, overlapped in ((C.REP_PERIOD_PS, True), (30_000.0, False)):
        cfg = replace(base, source=replace(base.source, rep_period=period)).with_periods(DESK_PERIODS)
        h = _hist(run_tpi(cfg, "XX", False), cfg, TPI_BIN, 3 * cfg.period + 2000)
        raw = tpi_peak_areas(h)
        assert raw.overlapped is overlapped
        bg = histogram_dark_estimate(h, cfg.detectors[0].dark_rate)
        sub = raw.subtract(bg)
        z = sub.zero
        # overlapped: A2* = A2 + outer peak of the neighbour (2 + 1), A1* = A1 + its next peak (1 + 4)
        expected = (2.5, 1.5, 1.5, 2.5) if overlapped else (0.5, 1.0, 1.0, 0.5)
        for k, e in zip((-2, -1, 1, 2), expected):
            ok, x = _ratio_ok(z[k], z[0], e)
            out.append(f"{x:.3f}")
            assert ok, f"period {period}: A[{k}]/A3 = {x:.3f}, expected {e}"
        if not overlapped:
            # delayed cluster around one period: 1:4:6:4:1
            win = {k: (period + k * d - 1500, period + k * d + 1500) for k in (-2, -1, 0, 1, 2)}
            far = integrate_windows(h, win)
            n = {k: far[k] - bg * far.n_bins[k] for k in win}
            for k, e in zip((-2, -1, 1, 2), (1 / 6, 4 / 6, 4 / 6, 1 / 6)):
                ok, x = _ratio_ok(n[k], n[0], e)
                out.append(f"{x:.3f}")
                assert ok, f"delayed cluster {k}: {x:.3f} vs {e:.3f}"
            ok, x = _ratio_ok(n[0], z[0], 3.0)
            assert ok, f"delayed/zero center {x:.3f} vs 3"
        out.append("|")
    detail("ratios to center: " + " ".join(out[:-1]))


# -- 5 --------------------------------------------------------------------------


@pytest.mark.criterion("5", "visibility correction chain reproduces both tables within 0.01")
def test_c5_correction_chain(detail):
    chain = table_chain()
    lines = []
    for key, row in chain.items():
        raw, apd, full = row["target"]
        lines.append(f"{key} {raw}->{row['apd']:.3f}->{row['full']:.3f}")
        assert abs(row["apd"] - apd) <= 0.01 and abs(row["full"] - full) <= 0.01, key
    shared = [k for k, r in chain.items() if abs(r["shared"]["full"] - r["target"][2]) > 0.01]
    detail("; ".join(lines) + (f" (shared per-channel fraction misses: {', '.join(shared)})" if shared else ""))


# -- 6 --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tpi_runs():
    cfg = desk(seed=60).with_periods(DESK_PERIODS)
    window = 3 * cfg.period + 2000
    out = {}
    for ch in ("X", "XX"):
        hp = _hist(run_tpi(cfg, ch, True), cfg, TPI_BIN, window)
        hc = _hist(run_tpi(cfg, ch, False), cfg, TPI_BIN, window)
        out[ch] = analyze_tpi(hp, hc, ch, cfg.detectors[0].dark_rate, cfg.beamsplitter.mode_overlap, C.G2_RESIDUAL[ch])
    return cfg, out


@pytest.mark.criterion("6", "TPI ordering V_X < V_XX by both methods (raw offsets to the tables reported only)")
def test_c6_ordering(tpi_runs, detail):
    _, reps = tpi_runs
    text = []
    for m in ("side_peak", "cross_pol"):
        vx, vxx = reps["X"][m].raw, reps["XX"][m].raw
        text.append(f"{m} X {vx:.3f}+/-{reps['X'][m].raw_error:.3f} XX {vxx:.3f}+/-{reps['XX'][m].raw_error:.3f}")
        assert vx < vxx
    # distance to the tabulated raw values is reported, not asserted
    text.append(f"tabulated raw 0.44/0.58, offsets {reps['X']['cross_pol'].raw - 0.44:+.3f}/{reps['XX']['cross_pol'].raw - 0.58:+.3f}")
    detail("; ".join(text))


@pytest.mark.criterion("6", "TPI visibility decreases with eps (0, 0.05, 0.10)")
def test_c6_eps_monotone(detail):
    base = desk(seed=61).with_periods(DESK_PERIODS)
    v = []
    for eps in (0.0, 0.05, 0.10):
        cfg = replace(base, beamsplitter=BeamsplitterParams(0.5, 1.0 - eps))
        h = _hist(run_tpi(cfg, "XX", True), cfg, TPI_BIN, 3 * cfg.period + 2000)
        v.append(sidepeak_visibility(tpi_peak_areas(h)))
    detail("V_XX raw " + " > ".join(f"{x:.3f}" for x in v))
    assert v[0] > v[1] > v[2]


@pytest.mark.criterion("6", "biexciton emission jitter lowers V_X")
def test_c6_jitter(detail):
    base = desk(seed=62).with_periods(DESK_PERIODS)
    no_jitter = replace(base, source=replace(base.source, t1_xx=1.0, t2_xx=1.0))
    v = []
    for cfg in (base, no_jitter):
        h = _hist(run_tpi(cfg, "X", True), cfg, TPI_BIN, 3 * cfg.period + 2000)
        v.append(sidepeak_visibility(tpi_peak_areas(h)))
    detail(f"V_X raw {v[0]:.3f} with jitter, {v[1]:.3f} without")
    assert v[0] < v[1]


# -- 7 --------------------------------------------------------------------------


@pytest.mark.criterion("7", "lifetime fit 220 +/- 20 and 400 +/- 20 ps from >= 1e5 photons")
def test_c7_lifetime(detail):
    cfg = desk(seed=70).with_periods(DESK_PERIODS)
    hxx, hx = run_lifetime(cfg, "XX"), run_lifetime(cfg, "X")
    assert min(hxx.total(), hx.total()) >= 1e5
    fit = fit_lifetimes(hxx, hx, irf_sigma=cfg.detectors[0].jitter_sigma)
    detail(f"T1_XX {fit['t1_xx']:.1f}+/-{fit.errors['t1_xx']:.1f}, T1_X {fit['t1_x']:.1f}+/-{fit.errors['t1_x']:.1f} ps, {hx.total()} X photons")
    assert abs(fit["t1_xx"] - 220) <= 20
    assert abs(fit["t1_x"] - 400) <= 20


# -- 8 --------------------------------------------------------------------------


@pytest.mark.criterion("8", "coherence fits: model identified and T2 within 2% with 1% noise")
@pytest.mark.parametrize("kind,t2", [("gaussian", 229.0), ("gaussian", 357.0), ("exponential", 114.0), ("exponential", 192.0)])
def test_c8_coherence(kind, t2, detail):
    rng = substream(80, f"c8:{kind}:{t2}")
    tau = np.linspace(0, 3 * t2, 41)
    _, y = g1_curve(LineshapeModel(kind, t2), tau)
    fit = fit_coherence(tau, y + rng.normal(0, 0.01, tau.size))
    detail(f"{kind} {t2}: fitted {fit.model} {fit['t2']:.1f}+/-{fit.errors['t2']:.1f}")
    assert fit.model == kind
    assert abs(fit["t2"] - t2) <= 0.02 * t2


# -- 9 --------------------------------------------------------------------------


@pytest.mark.criterion("9", "time-bandwidth product 0.492 +/- 0.002, Gaussian limit 0.441")
def test_c9_tbp(detail):
    v = time_bandwidth_product(PulseParams(21.4, 95.0))
    detail(f"TBP {v:.4f}")
    assert abs(v - 0.492) <= 0.002
    assert C.GAUSSIAN_TBP == 0.441
    assert 2 * np.log(2) / np.pi == pytest.approx(0.441, abs=5e-4)


# -- 10 -------------------------------------------------------------------------


@pytest.mark.criterion("10", "preparation bound >= 0.75 (damped), = 1 (undamped)")
def test_c10_preparation_bound(detail):
    cfg = desk(seed=100)
    s = run_power_series(cfg, RABI_GRID, 100_000)
    fit, bound = _rabi_bound(s, s.i_xx)
    und = replace(cfg, source=replace(cfg.source, rabi_damping=0.0, incoherent_slope=0.0))
    s0 = run_power_series(und, RABI_GRID, 100_000)
    i_pi = s0.i_xx[np.argmin(abs(s0.theta - np.pi))]
    i_2pi = s0.i_xx[np.argmin(abs(s0.theta - 2 * np.pi))]
    b0 = preparation_fidelity_bound(float(i_pi), float(i_2pi))
    s_b0 = np.sqrt(max(i_2pi, 1)) / i_pi
    detail(f"damped {bound:.3f} (kappa {fit['kappa']:.3f}), undamped {b0:.4f}+/-{s_b0:.4f}")
    assert bound >= 0.75
    assert abs(b0 - 1) <= 3 * s_b0


# -- 11 -------------------------------------------------------------------------

_state = st.builds(
    CascadeStateParams,
    cross_coherence=st.floats(0, 1),
    background_fraction=st.floats(0, 1),
    fss_energy=st.floats(-10, 10),
)


@pytest.mark.criterion("11", "density-matrix invariants and project_pair normalization")
@settings(max_examples=50)
@given(_state, st.floats(0, 2000))
def test_c11_state_properties(p, tau):
    m = cascade_state(p, tau).matrix
    assert np.allclose(m, m.conj().T)
    assert abs(np.trace(m) - 1) < 1e-12
    assert np.linalg.eigvalsh(m).min() > -1e-12
    rho = cascade_state(p, tau)
    for b in BASES:
        pols = basis_pair(b)
        total = sum(project_pair(rho, a, c) for a in pols for c in pols)
        assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.criterion("11", "fidelity (1 + k)/2 at b = 0")
@given(st.floats(0, 1))
def test_c11_fidelity(k):
    m = cascade_state(CascadeStateParams(cross_coherence=k, background_fraction=0.0)).matrix
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.real(v @ m @ v) == pytest.approx((1 + k) / 2, abs=1e-12)


@pytest.mark.criterion("11", "HOM Monte Carlo overlap matches T2/(2 T1) within 3 sigma")
@pytest.mark.parametrize("t1,t2", [(220.0, 192.0), (400.0, 357.0)])
def test_c11_hom_overlap(t1, t2, detail):
    o = sample_overlap_squared(np.zeros(10_000), t1, t2, substream(110, f"hom:{t1}"))
    mean, err = o.mean(), o.std() / np.sqrt(o.size)
    ref = analytic_mean_overlap(t1, t2)
    detail(f"T1 {t1}: {mean:.4f}+/-{err:.4f} vs {ref:.4f}")
    assert abs(mean - ref) <= 3 * err


@pytest.mark.criterion("11", "correlator symmetry and Poisson g2(0) = 1")
def test_c11_correlator(detail):
    rng = substream(111, "poisson")
    t_end = 10**11
    a = np.sort(rng.integers(0, t_end, 200_000))
    b = np.sort(rng.integers(0, t_end, 200_000))
    h_ab, h_ba = correlate(a, b, 101, 60_000), correlate(b, a, 101, 60_000)
    assert np.array_equal(h_ab.counts, h_ba.counts[::-1])
    p = integrate_peaks(h_ab, 10_000, 2_000, 5)
    g, s = g2_zero(p), g2_zero_error(p)
    detail(f"Poisson g2(0) {g:.3f}+/-{s:.3f}")
    assert abs(g - 1) <= 3 * s


@pytest.mark.criterion("11", "determinism and worker invariance of every experiment")
def test_c11_determinism(detail):
    cfg = replace(desk(seed=112), block_periods=4096).with_periods(20_000)
    par = replace(cfg, workers=2)
    runs = {
        "hbt": lambda c: run_hbt(c, "X"),
        "tomography": lambda c: run_tomography(c, "diagonal", True),
        "tpi": lambda c: run_tpi(c, "XX", True),
        "lifetime": lambda c: run_lifetime(c, "X"),
        "power": lambda c: run_power_series(c, RABI_GRID[:8], 2000),
    }

    def same(x, y):
        if isinstance(x, tuple):
            return all(same(a, b) for a, b in zip(x, y))
        if hasattr(x, "counts"):
            return np.array_equal(x.counts, y.counts)
        if hasattr(x, "i_xx"):
            return np.array_equal(x.i_xx, y.i_xx) and np.array_equal(x.i_x, y.i_x)
        return x == y

    for name, fn in runs.items():
        first = fn(cfg)
        assert same(first, fn(cfg)), f"{name} not deterministic"
        assert same(first, fn(par)), f"{name} depends on worker count"
    detail(", ".join(runs))
