"""Two-photon interference of the loop output.

Closed forms for the temporal beat, the spatial beat behind a 50/50 coupler
(pure, mixed and broadband versions) and the multi-pair visibility ceiling,
plus :func:`oracle_p2`, which evaluates the same coincidence probabilities by
explicit operator algebra on a truncated Fock space.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .state import SPEED_OF_LIGHT, DensityOperator, FrequencyPair, TwoPhotonState

TWO_PI = 2.0 * math.pi


class InterferenceError(ValueError):
    pass


@dataclass(frozen=True)
class Delay:
    """Optical delay of the c arm, seconds.  Accepts arrays."""

    delta_tau: float | np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.delta_tau)):
            raise InterferenceError("delay must be finite")

    @classmethod
    def from_stage_mm(cls, delta_l_mm) -> "Delay":
        # the retro-reflecting stage doubles the path change
        return cls(2.0 * np.asarray(delta_l_mm, dtype=float) * 1e-3 / SPEED_OF_LIGHT)

    @property
    def delta_l_mm(self):
        return np.asarray(self.delta_tau) * SPEED_OF_LIGHT / 2.0 * 1e3


class FilterShape(enum.Enum):
    SQUARE = "square"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FilterSpectrum:
    """Detection filter of the signal/idler arms, reduced to its envelope scale.

    ``sigma`` (rad/s) sets the delay envelope ``f``: ``sin(x)/x`` with
    ``x = sigma * dtau`` for a square passband, ``exp(-(sigma dtau)^2 / 2)``
    for a Gaussian one.
    """

    shape: FilterShape = FilterShape.SQUARE
    sigma: float = TWO_PI * 1.09e11
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", FilterShape(self.shape))
        if not self.sigma > 0:
            raise InterferenceError("filter sigma must be positive")

    @classmethod
    def from_bandwidth_nm(cls, fwhm_nm: float, center_nm: float, shape=FilterShape.SQUARE) -> "FilterSpectrum":
        """Envelope scale from a passband width.

        Energy conservation ties the signal and idler detunings, so the
        interfering amplitudes differ by twice the detuning and the envelope
        scale equals the full angular bandwidth ``2 pi c dlambda / lambda^2``.
        """
        lam = center_nm * 1e-9
        full = TWO_PI * SPEED_OF_LIGHT * fwhm_nm * 1e-9 / lam**2
        return cls(shape, full, TWO_PI * SPEED_OF_LIGHT / lam)

    def envelope(self, delta_tau):
        x = self.sigma * np.asarray(delta_tau, dtype=float)
        if self.shape is FilterShape.SQUARE:
            return np.sinc(x / math.pi)  # numpy sinc is sin(pi x)/(pi x)
        return np.exp(-0.5 * x**2)


def _tau(delay) -> float | np.ndarray:
    return delay.delta_tau if isinstance(delay, Delay) else delay


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def temporal_beat_p2(tau, freq: FrequencyPair):
    """Time-resolved c/d coincidence of the entangled state, ``1 + cos((w_s - w_i) tau)``."""
    return _scalar(1.0 + np.cos((freq.omega_s - freq.omega_i) * np.asarray(tau, dtype=float)))


def spatial_beat_p2(delay, freq: FrequencyPair):
    return _scalar(1.0 - np.cos((freq.omega_s - freq.omega_i) * np.asarray(_tau(delay), dtype=float)))


def mixed_beat_p2(delay, freq: FrequencyPair, p: float):
    if not 0.0 <= p <= 1.0:
        raise InterferenceError(f"p = {p} is not a probability")
    return _scalar(1.0 - p * np.cos((freq.omega_s - freq.omega_i) * np.asarray(_tau(delay), dtype=float)))


def multimode_p2(delay, freq: FrequencyPair, v: float, filt: FilterSpectrum):
    """Broadband spatial beat ``1 - V f(dtau) cos((w_i - w_s) dtau)``."""
    if not 0.0 <= v <= 1.0:
        raise InterferenceError(f"visibility {v} outside [0, 1]")
    t = np.asarray(_tau(delay), dtype=float)
    return _scalar(1.0 - v * filt.envelope(t) * np.cos(freq.difference * t))


def visibility_limit(pp: float) -> float:
    """Thermal multi-pair ceiling on the fringe visibility at ``pp`` pairs per pulse."""
    if not 0.0 <= pp <= 0.5:
        raise InterferenceError("pair probability must lie in [0, 0.5]")
    return 1.0 - 2.0 * pp


def beat_period_mm(freq: FrequencyPair) -> float:
    """Stage travel for one spatial-beat fringe, ``pi c / |w_i - w_s|``."""
    return math.pi * SPEED_OF_LIGHT / abs(freq.difference) * 1e3


# ---------------------------------------------------------------------------
# Operator-algebra oracle
# ---------------------------------------------------------------------------

# modes of the truncated Fock space, one photon at most per mode
_MODES = ("cs", "ci", "ds", "di")
_KET_MODES = {"cc": ("cs", "ci"), "dd": ("ds", "di"), "sc_id": ("cs", "di"), "ic_sd": ("ci", "ds")}
_BASIS = ("cc", "dd", "sc_id", "ic_sd")


@functools.lru_cache(maxsize=None)
def _annihilators() -> dict[str, np.ndarray]:
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    eye = np.eye(2)
    ops = {}
    for k, name in enumerate(_MODES):
        m = np.array([[1.0]])
        for j in range(len(_MODES)):
            m = np.kron(m, lower if j == k else eye)
        ops[name] = m.astype(complex)
    return ops


@functools.lru_cache(maxsize=None)
def _embedding() -> np.ndarray:
    """16x4 isometry taking the two-photon basis into the Fock space."""
    a = _annihilators()
    vac = np.zeros(2 ** len(_MODES), dtype=complex)
    vac[0] = 1.0
    cols = []
    for label in _BASIS:
        m1, m2 = _KET_MODES[label]
        cols.append(a[m1].conj().T @ a[m2].conj().T @ vac)
    return np.column_stack(cols)


def _field(terms: dict[str, complex]) -> np.ndarray:
    """Positive-frequency field operator from {mode: coefficient}."""
    a = _annihilators()
    out = np.zeros_like(a["cs"])
    for mode, coef in terms.items():
        out = out + coef * a[mode]
    return out


def _port_field(port: str, t: float, freq: FrequencyPair) -> dict[str, complex]:
    return {
        port + "s": np.exp(-1j * freq.omega_s * t),
        port + "i": np.exp(-1j * freq.omega_i * t),
    }


def _combine(*parts: tuple[complex, dict[str, complex]]) -> dict[str, complex]:
    out: dict[str, complex] = {}
    for coef, terms in parts:
        for mode, v in terms.items():
            out[mode] = out.get(mode, 0.0) + coef * v
    return out


def _keep(terms: dict[str, complex], band: str) -> dict[str, complex]:
    """Ideal band-pass filter: keep the components at one frequency."""
    return {m: v for m, v in terms.items() if m.endswith(band)}


def _density(state) -> np.ndarray:
    if isinstance(state, DensityOperator):
        rho4 = state.matrix
    else:
        v = state.vector()
        rho4 = np.outer(v, v.conj())
    emb = _embedding()
    return emb @ rho4 @ emb.conj().T


def _correlation(k_op: np.ndarray, rho: np.ndarray) -> float:
    # <E-^ E-^ E+ E+> = Tr(rho K^dag K) with K the product of the two E+
    return float(np.real(np.trace(rho @ k_op.conj().T @ k_op)))


def oracle_p2(delay, state: TwoPhotonState | DensityOperator, freq: FrequencyPair, t: float = 0.0, tau: float = 0.0) -> float:
    """Coincidence probability behind the delay-line coupler, by brute force.

    Builds the detector fields (coupler output, then an ideal signal filter on
    detector 1 and idler filter on detector 2) from single-mode annihilation
    operators and evaluates the normally ordered correlation.  Scaled by 4 so
    that distinguishable photons give 1.
    """
    dt = float(_tau(delay))
    rho = _density(state)
    ec_late = lambda s: _port_field("c", s + dt, freq)  # noqa: E731
    ed = lambda s: _port_field("d", s, freq)  # noqa: E731
    r = 1.0 / math.sqrt(2.0)
    e1 = lambda s: _combine((r, ec_late(s)), (1j * r, ed(s)))  # noqa: E731
    e2 = lambda s: _combine((r, ed(s)), (1j * r, ec_late(s)))  # noqa: E731
    d1 = _field(_keep(e1(t + tau), "s"))
    d2 = _field(_keep(e2(t), "i"))
    return 4.0 * _correlation(d1 @ d2, rho)


def oracle_temporal_p2(tau: float, state: TwoPhotonState | DensityOperator, freq: FrequencyPair, t: float = 0.0) -> float:
    """Time-resolved c/d coincidence ``<E_d- E_c- E_c+ E_d+>`` by brute force."""
    rho = _density(state)
    ec = _field(_port_field("c", t + tau, freq))
    ed = _field(_port_field("d", t, freq))
    return _correlation(ec @ ed, rho)


@dataclass(frozen=True)
class BeatCurve:
    """Coincidence counts against stage offset (mm)."""

    position_mm: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position_mm, dtype=float)
        cnt = np.asarray(self.counts, dtype=float)
        if pos.ndim != 1 or pos.shape != cnt.shape:
            raise InterferenceError("positions and counts must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(cnt))):
            raise InterferenceError("beat curve contains non-finite values")
        order = np.argsort(pos, kind="stable")
        object.__setattr__(self, "position_mm", pos[order])
        object.__setattr__(self, "counts", cnt[order])

    def __len__(self) -> int:
        return self.position_mm.size

    @property
    def span_mm(self) -> float:
        return float(self.position_mm[-1] - self.position_mm[0]) if len(self) else 0.0
