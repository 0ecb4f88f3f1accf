import pytest

from conftest import at_power
from sagnacfwm.counting import Routing
from sagnacfwm.counting.calibration import (
    BackgroundCalibration,
    calibrate_background,
    expected_ratio,
    expected_stage_visibility,
)


def test_packaged_values_reproduce_targets(base):
    assert expected_stage_visibility(at_power(base, 0.1, copol=True)) == pytest.approx(0.95, abs=1e-8)
    assert expected_ratio(at_power(base, 0.18, copol=True), Routing.CD) == pytest.approx(16.0, rel=1e-8)
    assert expected_ratio(at_power(base, 0.18, copol=False), Routing.CD) == pytest.approx(13.0, rel=1e-8)


def test_solver_recovers_packaged_values(base):
    blank = BackgroundCalibration(0.0, 0.0, 0.0).apply(base)
    cal = calibrate_background(blank)
    assert cal.raman_coeff_co == pytest.approx(base.scatter.raman_coeff_co, rel=1e-8)
    assert cal.raman_coeff_cross == pytest.approx(base.scatter.raman_coeff_cross, rel=1e-8)
    assert cal.dark_prob_per_gate == pytest.approx(base.det1.dark_prob_per_gate, rel=1e-8)


def test_selection_raises_ratio(base):
    lo = expected_ratio(at_power(base, 0.18, copol=False))
    hi = expected_ratio(at_power(base, 0.18, copol=True))
    assert hi > lo


def test_apply_sets_both_detectors(base):
    cfg = BackgroundCalibration(0.2, 0.1, 1e-3).apply(base, copol_selection=False)
    assert cfg.det1.dark_prob_per_gate == cfg.det2.dark_prob_per_gate == 1e-3
    assert (cfg.scatter.raman_coeff_co, cfg.scatter.raman_coeff_cross, cfg.scatter.copol_selection) == (0.2, 0.1, False)
