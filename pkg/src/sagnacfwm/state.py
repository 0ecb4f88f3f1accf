"""Two-photon state algebra of a Sagnac-loop four-wave-mixing source.

A signal photon (frequency ``omega_s``) and an idler photon (``omega_i``) are
distinguishable by frequency, so every one-signal/one-idler state is fixed by a
2x2 amplitude table ``A[m_s, m_i]`` indexed by the spatial mode of each photon.
Inside the loop the modes are ``a`` (clockwise) and ``b`` (counter-clockwise);
after the 50/50 coupler they are ``c`` and ``d``.  The coupler acts on each
photon independently, so ``A_out = U @ A_in @ U.T``.

The post-selected two-photon basis used throughout is ordered::

    0: |w_s, w_i>_c        (cc)
    1: |w_s, w_i>_d        (dd)
    2: |w_s>_c |w_i>_d     (sc_id)
    3: |w_i>_c |w_s>_d     (ic_sd)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
SPEED_OF_LIGHT = 299_792_458.0  # m/s

BASIS_LABELS = ("cc", "dd", "sc_id", "ic_sd")

# rows: output (c, d); columns: input (a, b)
#   |w>_a -> (|w>_d + i|w>_c)/sqrt2,  |w>_b -> (|w>_c + i|w>_d)/sqrt2
COUPLER = np.array([[1j, 1.0], [1.0, 1j]], dtype=complex) / math.sqrt(2.0)


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyPair:
    """Signal and idler angular frequencies (rad/s)."""

    omega_s: float
    omega_i: float

    def __post_init__(self):
        if not (self.omega_s > 0 and self.omega_i > 0):
            raise StateError("frequencies must be strictly positive")
        if self.omega_s == self.omega_i:
            raise StateError("signal and idler frequencies must differ")

    @classmethod
    def from_wavelengths_nm(cls, signal_nm: float, idler_nm: float) -> "FrequencyPair":
        return cls(
            TWO_PI * SPEED_OF_LIGHT / (signal_nm * 1e-9),
            TWO_PI * SPEED_OF_LIGHT / (idler_nm * 1e-9),
        )

    @classmethod
    def from_detuning(cls, delta_nu_hz: float, pump_nm: float = 1538.2) -> "FrequencyPair":
        """Pair placed symmetrically about a degenerate pump, idler on the blue side.

        ``delta_nu_hz`` is ``(omega_i - omega_s) / 2 pi``.
        """
        omega_p = TWO_PI * SPEED_OF_LIGHT / (pump_nm * 1e-9)
        half = math.pi * delta_nu_hz
        return cls(omega_p - half, omega_p + half)

    def pump_frequency(self) -> float:
        # degenerate pump: omega_s + omega_i = 2 omega_p
        return 0.5 * (self.omega_s + self.omega_i)

    @property
    def difference(self) -> float:
        """``omega_i - omega_s`` in rad/s."""
        return self.omega_i - self.omega_s


@dataclass(frozen=True)
class SfwmGain:
    """Complex pair-creation amplitude ``eta`` of a single pass."""

    eta: complex
    max_abs: float = 0.2

    def __post_init__(self):
        if abs(self.eta) >= self.max_abs:
            raise StateError(f"|eta| = {abs(self.eta):.3g} is not << 1 (limit {self.max_abs})")

    @classmethod
    def from_pump_power(cls, power_mw: float, gain_per_mw: float, max_abs: float = 0.2) -> "SfwmGain":
        """``eta = g * P``; the amplitude scales with the pump intensity."""
        return cls(complex(gain_per_mw * power_mw), max_abs)

    @staticmethod
    def calibrate(pairs_per_pulse: float, power_mw: float) -> float:
        """Gain constant ``g`` such that ``|sqrt2 eta|**2`` equals ``pairs_per_pulse`` at ``power_mw``."""
        if power_mw <= 0:
            raise StateError("calibration power must be positive")
        return math.sqrt(pairs_per_pulse / 2.0) / power_mw

    @property
    def pair_probability(self) -> float:
        return 2.0 * abs(self.eta) ** 2


@dataclass(frozen=True)
class LoopPhase:
    """Phase difference between the two counter-propagating pumps, kept in [0, 2pi)."""

    phi: float

    def __post_init__(self):
        phi = float(self.phi) % TWO_PI
        # a tiny negative input rounds up to exactly 2 pi
        object.__setattr__(self, "phi", 0.0 if phi >= TWO_PI else phi)


def _phase(phi) -> float:
    return phi.phi if isinstance(phi, LoopPhase) else float(phi)


@dataclass(frozen=True)
class TwoPhotonState:
    amp_vac: complex = 0.0
    amp_cc: complex = 0.0
    amp_dd: complex = 0.0
    amp_sc_id: complex = 0.0
    amp_ic_sd: complex = 0.0
    normalized: bool = False

    def __post_init__(self):
        if self.normalized and abs(self.norm_sq() - 1.0) > 1e-12:
            raise StateError(f"state flagged normalized has norm^2 {self.norm_sq():.15g}")

    @classmethod
    def from_vector(cls, vec, amp_vac: complex = 0.0, normalized: bool = False) -> "TwoPhotonState":
        v = np.asarray(vec, dtype=complex)
        return cls(amp_vac, v[0], v[1], v[2], v[3], normalized=normalized)

    @classmethod
    def from_table(cls, table, amp_vac: complex = 0.0) -> "TwoPhotonState":
        """Build from ``A[mode of signal, mode of idler]`` with modes ordered (c, d)."""
        t = np.asarray(table, dtype=complex)
        return cls(amp_vac, t[0, 0], t[1, 1], t[0, 1], t[1, 0])

    def vector(self) -> np.ndarray:
        """Two-photon amplitudes in basis order (vacuum excluded)."""
        return np.array([self.amp_cc, self.amp_dd, self.amp_sc_id, self.amp_ic_sd], dtype=complex)

    def table(self) -> np.ndarray:
        return np.array([[self.amp_cc, self.amp_sc_id], [self.amp_ic_sd, self.amp_dd]], dtype=complex)

    def norm_sq(self) -> float:
        return float(abs(self.amp_vac) ** 2 + np.sum(np.abs(self.vector()) ** 2))

    def post_selected(self) -> "TwoPhotonState":
        """Drop the vacuum and renormalize the two-photon part."""
        v = self.vector()
        n = np.linalg.norm(v)
        if n == 0:
            raise StateError("no two-photon component to post-select")
        return TwoPhotonState.from_vector(v / n, normalized=True)

    def overlap(self, other: "TwoPhotonState") -> complex:
        return complex(np.vdot(self.vector(), other.vector()) + np.conj(self.amp_vac) * other.amp_vac)

    def equals_up_to_phase(self, other: "TwoPhotonState", tol: float = 1e-12) -> bool:
        n = math.sqrt(self.norm_sq() * other.norm_sq())
        if n == 0:
            return self.norm_sq() == other.norm_sq()
        return abs(abs(self.overlap(other)) / n - 1.0) <= tol

    def probabilities(self) -> np.ndarray:
        """Detection-pattern probabilities of the post-selected pair, basis order."""
        p = np.abs(self.vector()) ** 2
        return p / p.sum()


@dataclass(frozen=True)
class LoopState:
    """Amplitudes of the pair state inside the loop, before the coupler.

    ``amp_aa``/``amp_bb``: both photons clockwise / counter-clockwise;
    ``amp_sa_ib``/``amp_ia_sb``: split between the two directions.
    """

    amp_vac: complex = 0.0
    amp_aa: complex = 0.0
    amp_bb: complex = 0.0
    amp_sa_ib: complex = 0.0
    amp_ia_sb: complex = 0.0

    def table(self) -> np.ndarray:
        return np.array([[self.amp_aa, self.amp_sa_ib], [self.amp_ia_sb, self.amp_bb]], dtype=complex)


class Direction(enum.Enum):
    CW = "cw"
    CCW = "ccw"


def sfwm_pair_state(eta: SfwmGain, direction: Direction | str, phi) -> tuple[complex, complex]:
    """Vacuum and pair amplitudes generated by one pump direction.

    The counter-clockwise pump is cross-coupled at the splitter, which gives
    its field a factor ``i``; the pair amplitude goes as the square of the
    pump field, hence ``-exp(2i phi)``.
    """
    if not isinstance(eta, SfwmGain):
        eta = SfwmGain(complex(eta))
    direction = Direction(direction)
    if direction is Direction.CW:
        return 1.0 + 0j, complex(eta.eta)
    return 1.0 + 0j, complex(-np.exp(2j * _phase(phi)) * eta.eta)


def loop_state(eta: SfwmGain, phi) -> LoopState:
    """First-order product of the two directional states (two-pair term dropped)."""
    vac_a, pair_a = sfwm_pair_state(eta, Direction.CW, phi)
    vac_b, pair_b = sfwm_pair_state(eta, Direction.CCW, phi)
    return LoopState(amp_vac=vac_a * vac_b, amp_aa=pair_a * vac_b, amp_bb=vac_a * pair_b)


def coupler_transform(state: LoopState) -> TwoPhotonState:
    out = COUPLER @ state.table() @ COUPLER.T
    return TwoPhotonState.from_table(out, amp_vac=state.amp_vac)


def sagnac_output(eta: SfwmGain, phi) -> TwoPhotonState:
    """Normalized post-selected pair state leaving the loop.

    ``cos(phi)`` weights the bunched kets (both photons in c or in d) and
    ``sin(phi)`` the split kets; the global factor ``sqrt2 eta exp(i phi)`` is
    dropped.
    """
    if not isinstance(eta, SfwmGain):
        eta = SfwmGain(complex(eta))
    if eta.eta == 0:
        raise StateError("eta = 0 produces no pair; post-selection is undefined")
    phi = _phase(phi)
    c, s = math.cos(phi) / math.sqrt(2.0), math.sin(phi) / math.sqrt(2.0)
    return TwoPhotonState(0.0, -c, c, s, s, normalized=True)


def psi1() -> TwoPhotonState:
    """Bunched state (|w_s,w_i>_c - |w_s,w_i>_d)/sqrt2."""
    r = 1.0 / math.sqrt(2.0)
    return TwoPhotonState(0.0, r, -r, 0.0, 0.0, normalized=True)


def psi2() -> TwoPhotonState:
    """Frequency-entangled state (|w_s>_c|w_i>_d + |w_i>_c|w_s>_d)/sqrt2."""
    r = 1.0 / math.sqrt(2.0)
    return TwoPhotonState(0.0, 0.0, 0.0, r, r, normalized=True)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    purity_p: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise StateError("density operator must be 4x4")
        if not 0.0 <= self.purity_p <= 1.0:
            raise StateError("purity_p must be a probability")
        object.__setattr__(self, "matrix", m)

    def validate(self, tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise StateError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol or abs(np.trace(m).imag) > tol:
            raise StateError("density operator trace is not 1")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -psd_tol:
            raise StateError("density operator is not positive semidefinite")

    @classmethod
    def pure(cls, state: TwoPhotonState) -> "DensityOperator":
        v = state.post_selected().vector()
        return cls(np.outer(v, v.conj()), 1.0)

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


def unentangled_background() -> np.ndarray:
    """Equal incoherent mixture of the two split kets."""
    return np.diag([0.0, 0.0, 0.5, 0.5]).astype(complex)


def mix_with_background(psi: TwoPhotonState, p: float) -> DensityOperator:
    """``p |psi><psi| + (1 - p) rho_un``."""
    if not 0.0 <= p <= 1.0:
        raise StateError(f"p = {p} is not a probability")
    v = psi.vector()
    if abs(np.vdot(v, v).real - 1.0) > 1e-12:
        raise StateError("psi must be normalized")
    rho = p * np.outer(v, v.conj()) + (1.0 - p) * unentangled_background()
    return DensityOperator(rho, p)


def fidelity(rho: DensityOperator, psi: TwoPhotonState) -> float:
    v = psi.vector()
    return float(np.real(np.vdot(v, rho.matrix @ v)))


def partially_coherent_output(phi, p: float) -> DensityOperator:
    """Loop output when the two directional pairs are only partly indistinguishable.

    ``p`` is the two-photon polarization overlap of the clockwise and
    counter-clockwise pairs.  The coherent part is the ideal output state; the
    rest is the equal mixture of the two directional pairs sent separately
    through the coupler.  ``p = 0`` puts 1/4 of the pairs in each detection
    pattern regardless of ``phi``.
    """
    if not 0.0 <= p <= 1.0:
        raise StateError(f"p = {p} is not a probability")
    phi = _phase(phi)
    ket_a = coupler_transform(LoopState(amp_aa=1.0)).vector()
    ket_b = coupler_transform(LoopState(amp_bb=-np.exp(2j * phi))).vector()
    coherent = sagnac_output(SfwmGain(0.1), phi).vector()
    incoherent = 0.5 * (np.outer(ket_a, ket_a.conj()) + np.outer(ket_b, ket_b.conj()))
    rho = p * np.outer(coherent, coherent.conj()) + (1.0 - p) * incoherent
    return DensityOperator(rho, p)
