"""The three scans: input half-wave plate, pump power, delay stage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..interference import BeatCurve, FilterSpectrum, beat_period_mm
from ..polarization import (
    QUADRATURE_FPC,
    HwpAngle,
    JonesMatrix,
    JonesVector,
    effective_purity,
    hwp_matrix,
    loop_phase,
)
from ..state import FrequencyPair, LoopPhase
from .model import (
    ConfigError,
    DetectorConfig,
    PumpConfig,
    Routing,
    ScanResult,
    ScatterModel,
    StageScan,
)
from .simulate import DEFAULT_BATCH, simulate_gates

# below this coherent fraction the pump overlap phase is noise; routing no longer depends on it
_PHASE_FLOOR = 1e-9


def _default_freq() -> FrequencyPair:
    return FrequencyPair.from_detuning(1.58e12)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a scan needs besides its own grid."""

    pump: PumpConfig = field(default_factory=PumpConfig)
    det1: DetectorConfig = field(default_factory=DetectorConfig)
    det2: DetectorConfig = field(default_factory=DetectorConfig)
    scatter: ScatterModel = field(default_factory=ScatterModel)
    fpc: JonesMatrix = QUADRATURE_FPC
    input_polarization: JonesVector = JonesVector(1, 0)
    freq: FrequencyPair = field(default_factory=_default_freq)
    filt: FilterSpectrum = field(default_factory=FilterSpectrum)
    hwp_retardance_error: float = 0.0
    n_gates: int = 1_000_000
    seed: int = 0
    workers: int = 1
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.n_gates <= 0:
            raise ConfigError("n_gates must be positive")
        if self.workers < 1 or self.batch_size < 1:
            raise ConfigError("workers and batch_size must be at least 1")

    def with_hwp(self, angle: HwpAngle | float) -> "ExperimentConfig":
        """Input polarization after the half-wave plate, coherence and phase updated."""
        e_in = hwp_matrix(angle, self.hwp_retardance_error) @ self.input_polarization
        return replace(self, input_polarization=e_in, scatter=self.scatter_for(e_in))

    def scatter_for(self, e_in: JonesVector) -> ScatterModel:
        p = effective_purity(self.fpc, e_in)
        phi = loop_phase(self.fpc, e_in) if p > _PHASE_FLOOR else self.scatter.loop_phase.phi
        return replace(self.scatter, purity_p=min(max(p, 0.0), 1.0), loop_phase=LoopPhase(phi))

    def matched(self) -> "ExperimentConfig":
        """Scatter model derived from the configured FPC and input polarization."""
        return replace(self, scatter=self.scatter_for(self.input_polarization))

    def _run(self, routing, seed, setting) -> ScanResult:
        return simulate_gates(
            self.pump,
            self.det1,
            self.det2,
            self.scatter,
            routing,
            self.n_gates,
            seed,
            setting=setting,
            batch_size=self.batch_size,
            workers=self.workers,
        )


def _seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def hwp_sweep(
    angles_deg: Sequence[float],
    config: ExperimentConfig,
    routings: Sequence[Routing | str] = (Routing.DD, Routing.CD),
) -> dict[Routing, list[ScanResult]]:
    """Rotate the input half-wave plate; one result list per detector routing."""
    routings = [Routing(r) for r in routings]
    seeds = _seeds(config.seed, len(angles_deg) * len(routings))
    out: dict[Routing, list[ScanResult]] = {r: [] for r in routings}
    k = 0
    for deg in angles_deg:
        cfg = config.with_hwp(HwpAngle.degrees(deg))
        for r in routings:
            out[r].append(cfg._run(r, seeds[k], float(deg)))
            k += 1
    return out


def power_sweep(
    powers_mw: Sequence[float],
    config: ExperimentConfig,
    routing: Routing | str,
    gates: Sequence[int] | None = None,
) -> list[ScanResult]:
    """Vary the average pump power at the configured input polarization.

    ``gates`` optionally sets the gate count per point (default ``config.n_gates``).
    """
    routing = Routing(routing)
    cfg = config.matched()
    gates = [cfg.n_gates] * len(powers_mw) if gates is None else list(gates)
    if len(gates) != len(powers_mw):
        raise ConfigError("one gate count per power is required")
    seeds = _seeds(config.seed, len(powers_mw))
    return [
        replace(cfg, pump=replace(cfg.pump, avg_power_mw=float(p)), n_gates=int(n))._run(routing, sd, float(p))
        for p, n, sd in zip(powers_mw, gates, seeds)
    ]


@dataclass(frozen=True)
class StageScanResult:
    results: list[ScanResult]
    curve: BeatCurve  # dark-subtracted coincidences


def stage_scan(positions_mm: Sequence[float], config: ExperimentConfig) -> StageScanResult:
    """Move the delay stage; c and d recombine on a second 50/50 coupler."""
    cfg = config.matched()
    seeds = _seeds(config.seed, len(positions_mm))
    results = [
        cfg._run(StageScan(float(x), cfg.freq, cfg.filt), sd, float(x)) for x, sd in zip(positions_mm, seeds)
    ]
    curve = BeatCurve(
        np.array([r.setting for r in results]),
        np.array([r.coincidences_corrected for r in results]),
    )
    return StageScanResult(results, curve)


def fringe_grid(freq: FrequencyPair, periods: float, points: int, center_mm: float = 0.0) -> np.ndarray:
    """``points`` stage positions covering ``periods`` beat periods around ``center_mm``."""
    half = 0.5 * periods * beat_period_mm(freq)
    return np.linspace(center_mm - half, center_mm + half, points)


def hwp_grid(step_deg: float = 11.25, stop_deg: float = 180.0) -> np.ndarray:
    n = int(math.floor(stop_deg / step_deg + 1e-9))
    return step_deg * np.arange(n + 1)
