"""Two-qubit polarization algebra for the XX/X photon pair.

Basis order of every 4x4 matrix is HH, HV, VH, VV with the biexciton photon
as the first factor. Circular states follow R = (H - iV)/sqrt(2) and
L = (H + iV)/sqrt(2); swapping the handedness only relabels R and L.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import HBAR_UEV_PS

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class PolarizationVector:
    """Normalized Jones vector in the (H, V) basis."""

    h: complex
    v: complex
    label: str = ""

    def __post_init__(self):
        norm = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"polarization vector not normalized (|psi|^2 = {norm!r})")

    @property
    def components(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    def orthogonal(self) -> "PolarizationVector":
        for pol in ALL_POLARIZATIONS:
            if pol.label and abs(np.vdot(pol.components, self.components)) < 1e-9:
                return pol
        return PolarizationVector(-np.conj(self.v), np.conj(self.h))

    def __str__(self):
        return self.label or f"({self.h:.3g}, {self.v:.3g})"


_S = 1.0 / np.sqrt(2.0)
H = PolarizationVector(1.0, 0.0, "H")
V = PolarizationVector(0.0, 1.0, "V")
D = PolarizationVector(_S, _S, "D")
A = PolarizationVector(_S, -_S, "A")
R = PolarizationVector(_S, -1j * _S, "R")
L = PolarizationVector(_S, 1j * _S, "L")
ALL_POLARIZATIONS = (H, V, D, A, R, L)
POLARIZATIONS = {p.label: p for p in ALL_POLARIZATIONS}

BASES = {
    "linear": (H, V),
    "diagonal": (D, A),
    "circular": (R, L),
}


def basis_pair(basis: str) -> tuple[PolarizationVector, PolarizationVector]:
    try:
        return BASES[basis]
    except KeyError:
        raise ValueError(f"unknown basis {basis!r}; expected one of {sorted(BASES)}") from None


@dataclass(frozen=True, eq=False)
class TwoQubitDensity:
    """Validated 4x4 density matrix of the (XX, X) polarization pair."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {np.trace(m).real!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __getitem__(self, idx):
        return self.matrix[idx]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __eq__(self, other):
        if not isinstance(other, TwoQubitDensity):
            return NotImplemented
        return bool(np.allclose(self.matrix, other.matrix, atol=1e-12))


@dataclass(frozen=True)
class CascadeStateParams:
    """Knobs of the phenomenological cascade state.

    cross_coherence is the surviving HH/VV coherence k, fss_energy the exciton
    fine-structure splitting S in µeV, background_fraction the weight b of
    the unpolarized admixture.
    """

    cross_coherence: float = 1.0
    fss_energy: float = 0.0
    background_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.cross_coherence <= 1.0:
            raise ValueError(f"cross_coherence must lie in [0, 1], got {self.cross_coherence}")
        if not 0.0 <= self.background_fraction <= 1.0:
            raise ValueError(f"background_fraction must lie in [0, 1], got {self.background_fraction}")
        if not np.isfinite(self.fss_energy):
            raise ValueError("fss_energy must be finite")

    @classmethod
    def from_contrasts(cls, c_linear: float, c_diagonal: float, c_circular: float | None = None, fss_energy: float = 0.0):
        """Solve C_linear = 1 - b and C_diagonal = (1 - b) k for (k, b).

        Without splitting the model ties C_circular to -C_diagonal; when a
        circular contrast is given, k is set from the mean of C_diagonal and
        -C_circular instead.
        """
        b = 1.0 - c_linear
        if not 0.0 <= b < 1.0:
            raise ValueError(f"linear contrast {c_linear} gives no valid background fraction")
        coh = c_diagonal if c_circular is None else 0.5 * (c_diagonal - c_circular)
        k = coh / (1.0 - b)
        return cls(cross_coherence=k, fss_energy=fss_energy, background_fraction=b)


def bell_psi_plus() -> TwoQubitDensity:
    psi = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return TwoQubitDensity(np.outer(psi, psi.conj()))


def fss_phase(fss_energy: float, tau: float) -> float:
    """Phase S*tau/hbar in rad for a splitting in µeV and a delay in ps."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be non-negative")
    return fss_energy * tau / HBAR_UEV_PS


def cascade_state(params: CascadeStateParams, tau: float = 0.0) -> TwoQubitDensity:
    if tau < 0:
        raise ValueError("tau must be non-negative")
    k, b = params.cross_coherence, params.background_fraction
    rho_k = np.zeros((4, 4), dtype=complex)
    rho_k[0, 0] = rho_k[3, 3] = 0.5
    coherence = 0.5 * k * np.exp(1j * fss_phase(params.fss_energy, tau))
    rho_k[0, 3] = coherence
    rho_k[3, 0] = np.conj(coherence)
    return TwoQubitDensity(b * np.eye(4) / 4.0 + (1.0 - b) * rho_k)


def maximally_mixed() -> TwoQubitDensity:
    return TwoQubitDensity(np.eye(4, dtype=complex) / 4.0)


def project_pair(rho: TwoQubitDensity, pol_xx: PolarizationVector, pol_x: PolarizationVector) -> float:
    u = np.kron(pol_xx.components, pol_x.components)
    p = np.real(np.vdot(u, rho.matrix @ u))
    return float(min(max(p, 0.0), 1.0))


def expected_contrast(rho: TwoQubitDensity, basis: str) -> float:
    first, second = basis_pair(basis)
    p_co = project_pair(rho, first, first)
    p_cross = project_pair(rho, first, second)
    if p_co + p_cross == 0.0:
        raise ValueError("co- and cross-polarized probabilities both vanish")
    return (p_co - p_cross) / (p_co + p_cross)


def fidelity_from_contrasts(c_lin: float, c_diag: float, c_circ: float) -> float:
    return (1.0 + c_lin + c_diag - c_circ) / 4.0


def pair_probabilities(
    params: CascadeStateParams,
    tau: np.ndarray,
    basis_xx: Sequence[PolarizationVector],
    basis_x: Sequence[PolarizationVector],
) -> np.ndarray:
    """Joint outcome probabilities for many pairs at once.

    Returns an array of shape (len(tau), 2, 2) where entry [n, i, j] is the
    probability that pair n projects onto basis_xx[i] and basis_x[j]. The
    FSS phase is evaluated per pair at its exciton delay tau.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    k, b = params.cross_coherence, params.background_fraction
    phase = np.exp(1j * params.fss_energy * tau / HBAR_UEV_PS)
    out = np.empty((tau.size, 2, 2))
    for i, pa in enumerate(basis_xx):
        for j, pb in enumerate(basis_x):
            u = np.kron(pa.components, pb.components)
            diag = 0.5 * (abs(u[0]) ** 2 + abs(u[3]) ** 2)
            cross = np.real(phase * np.conj(u[0]) * u[3])
            out[:, i, j] = b / 4.0 + (1.0 - b) * (diag + k * cross)
    return np.clip(out, 0.0, 1.0)
