"""Background calibration against the reported ratios and visibility.

The detector efficiency, dark-count probability and Raman rates are not
reported, only three of their consequences: the stage-scan visibility after
dark subtraction and the coincidence-to-accidental ratio of the c/d routing
with and without co-polarized selection.  These are matched here with the
analytic expected counts, so the solution carries no Monte-Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, fsolve

from ..interference import FilterSpectrum, beat_period_mm
from .model import Routing, StageScan, dark_coincidence_estimate, expected_counts, gate_model
from .scans import ExperimentConfig

# envelope ~1 over a fringe: isolates the visibility parameter
_FLAT = FilterSpectrum(sigma=1.0)


def expected_ratio(config: ExperimentConfig, routing: Routing | str = Routing.CD) -> float:
    """Long-run coincidence / accidental-estimate ratio at the configured input."""
    cfg = config.matched()
    m = gate_model(cfg.pump, cfg.det1, cfg.det2, cfg.scatter, Routing(routing))
    ex = expected_counts(m, cfg.n_gates)
    return ex.coincidences / ex.accidentals_est


def _stage_corrected(cfg: ExperimentConfig, delta_l_mm: float) -> float:
    m = gate_model(cfg.pump, cfg.det1, cfg.det2, cfg.scatter, StageScan(delta_l_mm, cfg.freq, _FLAT))
    ex = expected_counts(m, cfg.n_gates)
    return ex.coincidences - dark_coincidence_estimate(ex.singles_1, ex.singles_2, ex.n_gates, cfg.det1, cfg.det2)


def expected_stage_visibility(config: ExperimentConfig) -> float:
    """Fringe visibility of the dark-subtracted coincidences at the central fringe."""
    cfg = config.matched()
    lo = _stage_corrected(cfg, 0.0)
    hi = _stage_corrected(cfg, 0.5 * beat_period_mm(cfg.freq))
    return (hi - lo) / (hi + lo)


@dataclass(frozen=True)
class BackgroundCalibration:
    raman_coeff_co: float
    raman_coeff_cross: float
    dark_prob_per_gate: float

    def apply(self, config: ExperimentConfig, copol_selection: bool | None = None) -> ExperimentConfig:
        scat = replace(config.scatter, raman_coeff_co=self.raman_coeff_co, raman_coeff_cross=self.raman_coeff_cross)
        if copol_selection is not None:
            scat = replace(scat, copol_selection=copol_selection)
        return replace(
            config,
            scatter=scat,
            det1=replace(config.det1, dark_prob_per_gate=self.dark_prob_per_gate),
            det2=replace(config.det2, dark_prob_per_gate=self.dark_prob_per_gate),
        )


def calibrate_background(
    config: ExperimentConfig,
    visibility: float = 0.95,
    visibility_power_mw: float = 0.1,
    ratio_copol: float = 16.0,
    ratio_nocopol: float = 13.0,
    ratio_power_mw: float = 0.18,
) -> BackgroundCalibration:
    """Solve for co-polarized Raman, dark probability and cross-polarized Raman.

    The first two are fixed jointly by the visibility and the co-polarized
    ratio; the cross-polarized coefficient then follows from the ratio without
    selection.
    """

    def at(power, cal, copol):
        cfg = cal.apply(config, copol_selection=copol)
        return replace(cfg, pump=replace(cfg.pump, avg_power_mw=power))

    def residual(x):
        cal = BackgroundCalibration(math.exp(x[0]), 0.0, math.exp(x[1]))
        v = expected_stage_visibility(at(visibility_power_mw, cal, True))
        r = expected_ratio(at(ratio_power_mw, cal, True))
        return [v - visibility, math.log(r / ratio_copol)]

    x, _, ok, msg = fsolve(residual, [math.log(0.1), math.log(1e-3)], full_output=True, xtol=1e-12)
    if ok != 1 or max(abs(np.asarray(residual(x)))) > 1e-8:
        raise RuntimeError(f"background calibration did not converge: {msg}")
    co, dark = math.exp(x[0]), math.exp(x[1])

    def cross_residual(c):
        return expected_ratio(at(ratio_power_mw, BackgroundCalibration(co, c, dark), False)) - ratio_nocopol

    cross = brentq(cross_residual, 0.0, 10.0 * co + 1.0, xtol=1e-14, rtol=1e-12)
    return BackgroundCalibration(co, cross, dark)
