"""Photon-counting model: configuration, analytic expectations, Monte Carlo and scans."""

from ._backend import BACKEND
from .model import (
    ConfigError,
    DetectorConfig,
    ExpectedCounts,
    GateModel,
    PumpConfig,
    Routing,
    ScanResult,
    ScatterModel,
    StageScan,
    accidental_estimate,
    dark_coincidence_estimate,
    expected_counts,
    expected_scan_result,
    gate_model,
    mode_probabilities,
    pair_routing,
    utilization,
)
from .simulate import bernoulli_gates, run_gates, simulate_gates
