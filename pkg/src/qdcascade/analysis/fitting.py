"""Least-squares model fits: cascade lifetimes, coherence times, Rabi oscillations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special

from ..streams import CoincidenceHistogram

MAX_NFEV = 2000


class FitError(RuntimeError):
    """Raised when a fit does not converge; ``diagnostics`` holds the solver state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    errors: dict[str, float]
    units: dict[str, str]
    residual_norm: float
    alternatives: dict[str, "FitResult"] = field(default_factory=dict)
    ambiguous: bool = False

    def __getitem__(self, name):
        return self.params[name]


def _solve(fun, x0, names, units, model, bounds=(-np.inf, np.inf), x_scale="jac"):
    res = optimize.least_squares(fun, x0, bounds=bounds, x_scale=x_scale, max_nfev=MAX_NFEV, xtol=1e-12, ftol=1e-12, gtol=1e-12)
    if not res.success:
        raise FitError(f"{model} fit did not converge: {res.message}", {"x": res.x, "cost": res.cost, "nfev": res.nfev})
    dof = max(res.fun.size - res.x.size, 1)
    s2 = 2 * res.cost / dof
    try:
        cov = np.linalg.pinv(res.jac.T @ res.jac) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(res.x.size, np.nan)
    return FitResult(
        model=model,
        params=dict(zip(names, map(float, res.x))),
        errors=dict(zip(names, map(float, err))),
        units=dict(zip(names, units)),
        residual_norm=float(np.linalg.norm(res.fun)),
    )


# -- lifetimes -----------------------------------------------------------------


def exp_gauss_cdf(t, tau: float, sigma: float):
    """CDF of an exponential delay (mean tau) blurred by a Gaussian of width sigma."""
    t = np.asarray(t, dtype=float)
    if sigma <= 0:
        return np.where(t > 0, -np.expm1(-np.clip(t, 0, None) / tau), 0.0)
    z = t / sigma
    log_tail = -t / tau + sigma**2 / (2 * tau**2) + special.log_ndtr(z - sigma / tau)
    return special.ndtr(z) - np.exp(log_tail)


def _cascade_cdfs(t, t1_xx, t1_x, sigma):
    f_xx = exp_gauss_cdf(t, t1_xx, sigma)
    if abs(t1_x - t1_xx) < 1e-6 * t1_x:
        t1_x = t1_xx * (1 + 1e-6)
    f_x = (t1_x * exp_gauss_cdf(t, t1_x, sigma) - t1_xx * f_xx) / (t1_x - t1_xx)
    return f_xx, f_x


def cascade_bin_model(edges, t1_xx, t1_x, sigma):
    """Expected fraction of XX and X photons per bin (IRF-convolved cascade)."""
    f_xx, f_x = _cascade_cdfs(edges, t1_xx, t1_x, sigma)
    return np.diff(f_xx), np.diff(f_x)


def _weights(counts):
    return 1.0 / np.sqrt(np.maximum(counts, 1.0))


def _baseline(h: CoincidenceHistogram) -> float:
    pre = h.counts[h.centers < -250.0]
    return float(np.median(pre)) if pre.size else 0.0


def _mean_delay(h: CoincidenceHistogram) -> float:
    c = h.centers
    w = np.where(c > 0, np.clip(h.counts - _baseline(h), 0, None), 0.0)
    return float((w * c).sum() / max(w.sum(), 1.0))


def fit_lifetimes(
    h_xx: Optional[CoincidenceHistogram],
    h_x: Optional[CoincidenceHistogram] = None,
    irf_sigma: float = 0.0,
    weighted: bool = True,
) -> FitResult:
    """Fit T1,XX and T1,X to time-resolved histograms.

    The cascade emission rates n_XX/T1,XX and n_X/T1,X are convolved with a
    Gaussian IRF of width ``irf_sigma`` and integrated over each bin. Each
    histogram gets its own amplitude and flat offset. With only the XX
    histogram the model is mono-exponential and only T1,XX is fitted. The X
    curve alone is symmetric in the two lifetimes and is fitted only jointly.
    """
    if h_xx is None or h_xx.total() == 0:
        raise ValueError("XX histogram is empty")
    e_xx = h_xx.edges
    y_xx = h_xx.counts.astype(float)
    w_xx = _weights(y_xx) if weighted else np.ones_like(y_xx)
    t_xx0 = max(_mean_delay(h_xx), 20.0)
    off_xx0 = _baseline(h_xx)

    if h_x is None:
        def resid(p):
            t1, amp, off = p
            return (amp * np.diff(exp_gauss_cdf(e_xx, t1, irf_sigma)) + off - y_xx) * w_xx

        x0 = [t_xx0, y_xx.sum(), off_xx0]
        return _solve(resid, x0, ["t1_xx", "amp_xx", "offset_xx"], ["ps", "counts", "counts/bin"], "cascade-xx",
                      bounds=([1.0, 0, 0], [np.inf, np.inf, np.inf]))

    if h_x.total() == 0:
        raise ValueError("X histogram is empty")
    e_x = h_x.edges
    y_x = h_x.counts.astype(float)
    w_x = _weights(y_x) if weighted else np.ones_like(y_x)
    off_x0 = _baseline(h_x)
    t_x0 = max(_mean_delay(h_x) - t_xx0, 20.0)

    def resid(p):
        t1_xx, t1_x, a_xx, a_x, o_xx, o_x = p
        m_xx = np.diff(exp_gauss_cdf(e_xx, t1_xx, irf_sigma))
        m_x = np.diff(_cascade_cdfs(e_x, t1_xx, t1_x, irf_sigma)[1])
        return np.concatenate([(a_xx * m_xx + o_xx - y_xx) * w_xx, (a_x * m_x + o_x - y_x) * w_x])

    x0 = [t_xx0, t_x0, y_xx.sum(), y_x.sum(), off_xx0, off_x0]
    lo = [1.0, 1.0, 0, 0, 0, 0]
    return _solve(
        resid,
        x0,
        ["t1_xx", "t1_x", "amp_xx", "amp_x", "offset_xx", "offset_x"],
        ["ps", "ps", "counts", "counts", "counts/bin", "counts/bin"],
        "cascade-joint",
        bounds=(lo, [np.inf] * 6),
    )


# -- coherence -----------------------------------------------------------------


def _g1_model(kind, tau, t2):
    x = np.abs(tau) / t2
    return np.exp(-0.5 * np.pi * x**2) if kind == "gaussian" else np.exp(-x)


def fit_coherence(tau, contrast, ambiguity: float = 0.01) -> FitResult:
    """Fit Gaussian and exponential g1 decays; keep the smaller residual.

    When the two residual norms differ by less than ``ambiguity`` (relative)
    the result is flagged ambiguous; the other model is always available in
    ``alternatives``.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(contrast, dtype=float)
    if tau.size < 5:
        raise ValueError("need at least 5 samples")
    # initial T2 from the 1/e crossing
    below = np.flatnonzero(y < y.max() / np.e)
    t2_0 = tau[below[0]] if below.size else tau.max()
    t2_0 = max(t2_0, 1e-3 * max(tau.max(), 1.0))
    fits = {}
    for kind in ("gaussian", "exponential"):
        def resid(p, kind=kind):
            amp, t2 = p
            return amp * _g1_model(kind, tau, t2) - y

        fits[kind] = _solve(resid, [y.max(), t2_0], ["amplitude", "t2"], ["", "ps"], kind,
                            bounds=([0, 1e-6], [np.inf, np.inf]))
    best, other = sorted(fits, key=lambda k: fits[k].residual_norm)
    out = fits[best]
    out.alternatives = {other: fits[other]}
    r0, r1 = fits[best].residual_norm, fits[other].residual_norm
    out.ambiguous = bool(r1 - r0 < ambiguity * max(r1, 1e-300))
    return out


# -- Rabi ----------------------------------------------------------------------


def rabi_model(x, amplitude, scale, kappa, c):
    theta = scale * np.asarray(x, dtype=float)
    return amplitude * (np.sin(theta / 2) ** 2 * np.exp(-kappa * theta) + c * theta)


def fit_rabi(x, intensity, scale0: Optional[float] = None) -> FitResult:
    """Fit amplitude * [sin^2(theta/2) exp(-kappa theta) + c theta] with theta = scale * x.

    ``x`` is the square root of the pump power (any units) or the pulse area
    itself; ``scale`` maps it to radians.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if x.size < 8:
        raise ValueError("need at least 8 points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    peaks = [i for i in range(1, x.size - 1) if y[i] >= y[i - 1] and y[i] > y[i + 1]]
    peaks = [i for i in peaks if y[i + 1 :].min() < 0.9 * y[i]]
    if not peaks:
        raise ValueError("fewer than one visible oscillation")
    i_max = peaks[0]
    if scale0 is None:
        scale0 = np.pi / x[i_max]
    amp0 = y[i_max]

    def resid(p):
        return (rabi_model(x, *p) - y) / max(amp0, 1e-300)

    return _solve(
        resid,
        [amp0, scale0, 0.01, 0.01],
        ["amplitude", "scale", "kappa", "c"],
        ["counts", "rad/x", "1/rad", "1/rad"],
        "rabi",
        bounds=([0, 0, 0, 0], [np.inf, np.inf, np.inf, np.inf]),
    )
