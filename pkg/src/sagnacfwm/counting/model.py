"""Configuration types and the analytic counting model.

Per gate the photon sources are independent: a thermal number of pairs,
Poisson Raman photons in each band, Bernoulli dark counts.  That makes the
per-gate click law (before dead time) exactly computable from generating
functions; :func:`expected_counts` then adds the dead time through the
stationary law of the two detectors' hold-off counters.  The Monte Carlo in
``simulate`` samples the same model photon by photon and is tested against it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..interference import Delay, FilterSpectrum, multimode_p2
from ..state import FrequencyPair, LoopPhase, partially_coherent_output


class ConfigError(ValueError):
    pass


def _prob(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{name} = {x} is not a probability")


@dataclass(frozen=True)
class PumpConfig:
    avg_power_mw: float = 0.1
    rep_rate_hz: float = 40e6
    pulse_width_s: float = 4e-12
    center_wavelength_nm: float = 1538.2

    def __post_init__(self):
        if self.avg_power_mw < 0:
            raise ConfigError("pump power must be non-negative")
        for name in ("rep_rate_hz", "pulse_width_s", "center_wavelength_nm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    """Gated InGaAs-style single-photon detector; one pump pulse per gate."""

    efficiency: float = 0.1
    dark_prob_per_gate: float = 1e-5
    gate_width_s: float = 2.5e-9
    gate_rate_hz: float = 1.29e6
    dead_time_s: float = 10e-6

    def __post_init__(self):
        _prob("efficiency", self.efficiency)
        _prob("dark_prob_per_gate", self.dark_prob_per_gate)
        if not (self.gate_width_s > 0 and self.gate_rate_hz > 0):
            raise ConfigError("gate width and rate must be positive")
        if self.dead_time_s < 0:
            raise ConfigError("dead time must be non-negative")

    @property
    def holdoff_gates(self) -> int:
        """Gates skipped after a click: those starting less than one dead time later."""
        k = self.dead_time_s * self.gate_rate_hz
        return max(int(math.ceil(k - 1e-9)) - 1, 0)


@dataclass(frozen=True)
class ScatterModel:
    """Photon sources per pump pulse, as functions of average pump power.

    ``pair_coeff`` is pairs/pulse/mW^2 (the pair amplitude follows the pump
    intensity).  Raman coefficients are photons/pulse/mW in each of the signal
    and idler bands, summed over both loop outputs; the cross-polarized part is
    removed when ``copol_selection`` is on.
    """

    pair_coeff: float = 1.3
    raman_coeff_co: float = 0.0
    raman_coeff_cross: float = 0.0
    purity_p: float = 1.0
    loop_phase: LoopPhase = field(default_factory=lambda: LoopPhase(math.pi / 2))
    copol_selection: bool = True

    def __post_init__(self):
        for name in ("pair_coeff", "raman_coeff_co", "raman_coeff_cross"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        _prob("purity_p", self.purity_p)
        if not isinstance(self.loop_phase, LoopPhase):
            object.__setattr__(self, "loop_phase", LoopPhase(self.loop_phase))

    def pairs_per_pulse(self, power_mw: float) -> float:
        return self.pair_coeff * power_mw**2

    def raman_per_band(self, power_mw: float) -> float:
        coeff = self.raman_coeff_co + (0.0 if self.copol_selection else self.raman_coeff_cross)
        return coeff * power_mw


class Routing(enum.Enum):
    """Where the two detectors look.

    DD: signal and idler both taken from the transmitted port d.
    CD: signal from the reflected port c, idler from d.
    """

    DD = "DD"
    CD = "CD"


@dataclass(frozen=True)
class StageScan:
    """c and d recombined on a second 50/50 coupler, c delayed by a stage offset."""

    delta_l_mm: float
    freq: FrequencyPair
    filt: FilterSpectrum = field(default_factory=FilterSpectrum)


@dataclass(frozen=True)
class ScanResult:
    setting: float
    singles_1: int
    singles_2: int
    coincidences: int
    accidentals_est: float
    n_gates: int
    coincidences_corrected: float | None = None

    def __post_init__(self):
        if min(self.singles_1, self.singles_2, self.coincidences, self.n_gates) < 0:
            raise ConfigError("counts must be non-negative")
        if self.coincidences > min(self.singles_1, self.singles_2):
            raise ConfigError("coincidences exceed singles")

    @property
    def true_coincidences(self) -> float:
        return self.coincidences - self.accidentals_est

    def as_dict(self) -> dict:
        d = {
            "setting": self.setting,
            "singles_1": self.singles_1,
            "singles_2": self.singles_2,
            "coincidences": self.coincidences,
            "accidentals_est": self.accidentals_est,
            "n_gates": self.n_gates,
        }
        if self.coincidences_corrected is not None:
            d["coincidences_corrected"] = self.coincidences_corrected
        return d


def accidental_estimate(singles_1: float, singles_2: float, n_gates: int) -> float:
    return singles_1 * singles_2 / n_gates if n_gates else 0.0


def dark_coincidence_estimate(singles_1, singles_2, n_gates, det1: DetectorConfig, det2: DetectorConfig) -> float:
    """Expected coincidences involving at least one dark count (pump-off calibration)."""
    d1, d2 = det1.dark_prob_per_gate, det2.dark_prob_per_gate
    return d1 * singles_2 + d2 * singles_1 - d1 * d2 * n_gates


# ---------------------------------------------------------------------------
# Routing of a single pair
# ---------------------------------------------------------------------------


def mode_probabilities(scat: ScatterModel) -> np.ndarray:
    """P(cc), P(dd), P(sc_id), P(ic_sd) for one pair leaving the loop."""
    rho = partially_coherent_output(scat.loop_phase, scat.purity_p)
    return np.clip(rho.probabilities(), 0.0, 1.0)


def pair_routing(scat: ScatterModel, routing: Routing | StageScan) -> np.ndarray:
    """``[q11, q10, q01, q00]``: does the signal reach detector 1 / the idler detector 2."""
    if isinstance(routing, StageScan):
        p2 = multimode_p2(Delay.from_stage_mm(routing.delta_l_mm), routing.freq, scat.purity_p, routing.filt)
        both = p2 / 4.0
        return np.array([both, 0.5 - both, 0.5 - both, both])
    p_cc, p_dd, p_sc_id, p_ic_sd = mode_probabilities(scat)
    routing = Routing(routing)
    if routing is Routing.DD:
        return np.array([p_dd, p_ic_sd, p_sc_id, p_cc])
    return np.array([p_sc_id, p_cc, p_dd, p_ic_sd])


# Raman photons leave through either port with equal probability in every geometry
RAMAN_ROUTING = 0.5


@dataclass(frozen=True)
class GateModel:
    """Per-gate source parameters seen by the two detectors."""

    mu_pairs: float
    routing: np.ndarray  # q11, q10, q01, q00
    raman_mean_1: float  # Raman photons arriving at detector 1 per gate
    raman_mean_2: float
    det1: DetectorConfig
    det2: DetectorConfig

    def detected_pair_split(self) -> np.ndarray:
        """Per pair: P(both detected), P(only det1), P(only det2)."""
        q11, q10, q01, _ = self.routing
        e1, e2 = self.det1.efficiency, self.det2.efficiency
        return np.array([e1 * e2 * q11, e1 * (q10 + q11 * (1 - e2)), e2 * (q01 + q11 * (1 - e1))])

    def click_law(self) -> np.ndarray:
        """Exact ``[pi11, pi10, pi01, pi00]`` for one gate with both detectors armed."""
        q = self.routing
        e1, e2 = self.det1.efficiency, self.det2.efficiency
        mu = self.mu_pairs

        def pairs_none(z1, z2):
            g = q[3] + q[1] * z1 + q[2] * z2 + q[0] * z1 * z2
            return 1.0 / (1.0 + mu * (1.0 - g))

        s1 = (1 - self.det1.dark_prob_per_gate) * math.exp(-e1 * self.raman_mean_1)
        s2 = (1 - self.det2.dark_prob_per_gate) * math.exp(-e2 * self.raman_mean_2)
        no1 = s1 * pairs_none(1 - e1, 1.0)
        no2 = s2 * pairs_none(1.0, 1 - e2)
        none = s1 * s2 * pairs_none(1 - e1, 1 - e2)
        law = np.array([1 - no1 - no2 + none, no2 - none, no1 - none, none])
        return np.clip(law, 0.0, 1.0)


def gate_model(pump: PumpConfig, det1: DetectorConfig, det2: DetectorConfig, scat: ScatterModel, routing) -> GateModel:
    if det1.gate_rate_hz > pump.rep_rate_hz or det2.gate_rate_hz > pump.rep_rate_hz:
        raise ConfigError("gate rate exceeds the pump repetition rate")
    raman = scat.raman_per_band(pump.avg_power_mw) * RAMAN_ROUTING
    return GateModel(
        mu_pairs=scat.pairs_per_pulse(pump.avg_power_mw),
        routing=pair_routing(scat, routing),
        raman_mean_1=raman,
        raman_mean_2=raman,
        det1=det1,
        det2=det2,
    )


# ---------------------------------------------------------------------------
# Dead time: stationary law of the two hold-off counters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpectedCounts:
    singles_1: float
    singles_2: float
    coincidences: float
    n_gates: int

    @property
    def accidentals_est(self) -> float:
        return accidental_estimate(self.singles_1, self.singles_2, self.n_gates)


def _stationary(law: np.ndarray, h1: int, h2: int) -> np.ndarray:
    n1, n2 = h1 + 1, h2 + 1
    pi11, pi10, pi01, pi00 = law
    c1, c2 = pi11 + pi10, pi11 + pi01
    idx = lambda r1, r2: r1 * n2 + r2  # noqa: E731
    rows, cols, vals = [], [], []

    def add(src, dst, p):
        if p > 0:
            rows.append(dst)
            cols.append(src)
            vals.append(p)

    for r1 in range(n1):
        for r2 in range(n2):
            s = idx(r1, r2)
            nr1, nr2 = max(r1 - 1, 0), max(r2 - 1, 0)
            if r1 == 0 and r2 == 0:
                add(s, idx(h1, h2), pi11)
                add(s, idx(h1, 0), pi10)
                add(s, idx(0, h2), pi01)
                add(s, idx(0, 0), pi00)
            elif r1 == 0:
                add(s, idx(h1, nr2), c1)
                add(s, idx(0, nr2), 1 - c1)
            elif r2 == 0:
                add(s, idx(nr1, h2), c2)
                add(s, idx(nr1, 0), 1 - c2)
            else:
                add(s, idx(nr1, nr2), 1.0)
    n = n1 * n2
    t = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a = (t - sp.identity(n, format="csr")).tolil()
    a[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    pi = spla.spsolve(a.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    return (pi / pi.sum()).reshape(n1, n2)


def expected_counts(model: GateModel, n_gates: int) -> ExpectedCounts:
    """Long-run mean singles and coincidences over ``n_gates`` gates."""
    law = model.click_law()
    pi = _stationary(law, model.det1.holdoff_gates, model.det2.holdoff_gates)
    pi11 = law[0]
    c1, c2 = law[0] + law[1], law[0] + law[2]
    armed1 = pi[0, :].sum()
    armed2 = pi[:, 0].sum()
    return ExpectedCounts(
        singles_1=n_gates * armed1 * c1,
        singles_2=n_gates * armed2 * c2,
        coincidences=n_gates * pi[0, 0] * pi11,
        n_gates=n_gates,
    )


def expected_scan_result(pump, det1, det2, scat, routing, n_gates: int, setting: float = 0.0) -> ExpectedCounts:
    return expected_counts(gate_model(pump, det1, det2, scat, routing), n_gates)


def utilization(click_prob: float, holdoff: int) -> float:
    """Armed fraction of a single detector: renewal cycle of ``1/q`` armed gates plus hold-off."""
    return 1.0 / (1.0 + click_prob * holdoff)
