"""Scenario files: INI sections, units in the key names.

Sections and keys (all optional unless noted; defaults in brackets)::

    [pump]        avg_power_mw [0.1], rep_rate_hz [40e6], pulse_width_s [4e-12],
                  center_wavelength_nm [1538.2]
    [detector]    efficiency [0.1], dark_prob_per_gate [1e-5], gate_width_s [2.5e-9],
                  gate_rate_hz [1.29e6], dead_time_s [10e-6]
    [detector1], [detector2]
                  same keys, overriding [detector] for one detector
    [scatter]     pair_coeff_per_mw2 [1.3], raman_coeff_co_per_mw [0],
                  raman_coeff_cross_per_mw [0], copol_selection [true]
    [source]      detuning_hz [1.58e12]  (omega_i - omega_s) / 2 pi
    [filter]      shape [square], bandwidth_nm + center_nm, or sigma_rad_per_s
                  [2 pi x 1.09e11]
    [fpc]         preset [quadrature] (identity, swap, quadrature, symmetric,
                  stack), symmetric_theta_rad, quarter1_deg, half_deg, quarter2_deg,
                  input_angle_deg [0], hwp_retardance_error_rad [0]
    [run]         seed [0], n_gates [1000000], workers [1], batch_size [4194304]
    [scan.hwp]    start_deg [0], stop_deg [180], step_deg [11.25], power_mw,
                  copol_selection, n_gates
    [scan.power]  min_mw [0.018], max_mw [0.18], points [6], spacing [log],
                  equal_precision [true], copol_selection, n_gates
    [scan.stage]  start_mm, stop_mm, points [40]  (default: 3 periods about 0),
                  power_mw, copol_selection, n_gates

``n_gates`` in a scan section overrides [run]; with ``equal_precision`` the
power scan spends ``n_gates * (max_mw / P)^2`` gates at power ``P`` so that
every point collects about as many pair coincidences.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .counting.model import ConfigError, DetectorConfig, PumpConfig, ScatterModel
from .counting.scans import ExperimentConfig, fringe_grid, hwp_grid
from .interference import FilterShape, FilterSpectrum
from .polarization import (
    IDENTITY,
    QUADRATURE_FPC,
    SWAP,
    JonesMatrix,
    JonesVector,
    retarder_stack,
    symmetric_retarder,
)
from .state import FrequencyPair

ENV_DIR = "SAGNACFWM_SCENARIO_DIR"

_DETECTOR_KEYS = ("efficiency", "dark_prob_per_gate", "gate_width_s", "gate_rate_hz", "dead_time_s")
_SCAN_COMMON = ("power_mw", "copol_selection", "n_gates")
_KEYS = {
    "pump": ("avg_power_mw", "rep_rate_hz", "pulse_width_s", "center_wavelength_nm"),
    "detector": _DETECTOR_KEYS,
    "detector1": _DETECTOR_KEYS,
    "detector2": _DETECTOR_KEYS,
    "scatter": ("pair_coeff_per_mw2", "raman_coeff_co_per_mw", "raman_coeff_cross_per_mw", "copol_selection"),
    "source": ("detuning_hz",),
    "filter": ("shape", "bandwidth_nm", "center_nm", "sigma_rad_per_s"),
    "fpc": (
        "preset",
        "symmetric_theta_rad",
        "quarter1_deg",
        "half_deg",
        "quarter2_deg",
        "input_angle_deg",
        "hwp_retardance_error_rad",
    ),
    "run": ("seed", "n_gates", "workers", "batch_size"),
    "scan.hwp": ("start_deg", "stop_deg", "step_deg") + _SCAN_COMMON,
    "scan.power": ("min_mw", "max_mw", "points", "spacing", "equal_precision") + _SCAN_COMMON,
    "scan.stage": ("start_mm", "stop_mm", "points") + _SCAN_COMMON,
}


class ScenarioError(ConfigError):
    pass


@dataclass(frozen=True)
class ScanOverrides:
    power_mw: float | None = None
    copol_selection: bool | None = None
    n_gates: int | None = None

    def apply(self, cfg: ExperimentConfig) -> ExperimentConfig:
        if self.power_mw is not None:
            cfg = replace(cfg, pump=replace(cfg.pump, avg_power_mw=self.power_mw))
        if self.copol_selection is not None:
            cfg = replace(cfg, scatter=replace(cfg.scatter, copol_selection=self.copol_selection))
        if self.n_gates is not None:
            cfg = replace(cfg, n_gates=self.n_gates)
        return cfg


@dataclass(frozen=True)
class HwpScanSpec:
    start_deg: float = 0.0
    stop_deg: float = 180.0
    step_deg: float = 11.25
    overrides: ScanOverrides = field(default_factory=ScanOverrides)

    def grid(self) -> np.ndarray:
        return self.start_deg + hwp_grid(self.step_deg, self.stop_deg - self.start_deg)


@dataclass(frozen=True)
class PowerScanSpec:
    min_mw: float = 0.018
    max_mw: float = 0.18
    points: int = 6
    spacing: str = "log"
    equal_precision: bool = True
    overrides: ScanOverrides = field(default_factory=ScanOverrides)

    def grid(self) -> np.ndarray:
        if self.spacing == "log":
            if self.min_mw <= 0:
                raise ScenarioError("log spacing needs min_mw > 0")
            return np.geomspace(self.min_mw, self.max_mw, self.points)
        return np.linspace(self.min_mw, self.max_mw, self.points)

    def gates(self, n_gates: int) -> list[int]:
        if not self.equal_precision:
            return [n_gates] * self.points
        return [int(round(n_gates * (self.max_mw / p) ** 2)) if p > 0 else n_gates for p in self.grid()]


@dataclass(frozen=True)
class StageScanSpec:
    start_mm: float | None = None
    stop_mm: float | None = None
    points: int = 40
    overrides: ScanOverrides = field(default_factory=ScanOverrides)

    def grid(self, freq: FrequencyPair) -> np.ndarray:
        if self.start_mm is None or self.stop_mm is None:
            return fringe_grid(freq, 3.0, self.points)
        return np.linspace(self.start_mm, self.stop_mm, self.points)


@dataclass(frozen=True)
class Scenario:
    experiment: ExperimentConfig
    hwp: HwpScanSpec = field(default_factory=HwpScanSpec)
    power: PowerScanSpec = field(default_factory=PowerScanSpec)
    stage: StageScanSpec = field(default_factory=StageScanSpec)
    source: str = "<defaults>"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Section:
    """Typed access to one section, remembering which keys were read."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.items = dict(parser[name]) if parser.has_section(name) else {}

    def _raw(self, key):
        return self.items.get(key)

    def float(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            val = float(raw)
        except ValueError:
            raise ScenarioError(f"[{self.name}] {key}: expected a number, got {raw!r}") from None
        if not math.isfinite(val):
            raise ScenarioError(f"[{self.name}] {key}: must be finite")
        return val

    def int(self, key, default=None):
        val = self.float(key, None)
        if val is None:
            return default
        if val != int(val):
            raise ScenarioError(f"[{self.name}] {key}: expected an integer")
        return int(val)

    def bool(self, key, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ScenarioError(f"[{self.name}] {key}: expected a boolean, got {raw!r}")

    def str(self, key, default=None):
        raw = self._raw(key)
        return default if raw is None else raw.strip()


def _check_keys(parser: configparser.ConfigParser) -> None:
    for name in parser.sections():
        if name not in _KEYS:
            raise ScenarioError(f"unknown section [{name}]")
        for key in parser[name]:
            if key not in _KEYS[name]:
                raise ScenarioError(f"[{name}] unknown key {key!r}")


def _detector(base: _Section, own: _Section) -> DetectorConfig:
    kw = {}
    for key in _DETECTOR_KEYS:
        val = own.float(key, base.float(key))
        if val is not None:
            kw[key] = val
    return DetectorConfig(**kw)


def _fpc(sec: _Section) -> JonesMatrix:
    preset = sec.str("preset", None)
    stack_keys = [sec.float(k) for k in ("quarter1_deg", "half_deg", "quarter2_deg")]
    if preset is None:
        preset = "stack" if any(v is not None for v in stack_keys) else "quadrature"
    if preset == "stack":
        if any(v is None for v in stack_keys):
            raise ScenarioError("[fpc] stack needs quarter1_deg, half_deg and quarter2_deg")
        return retarder_stack(*(math.radians(v) for v in stack_keys))
    if preset == "symmetric":
        theta = sec.float("symmetric_theta_rad")
        if theta is None:
            raise ScenarioError("[fpc] symmetric preset needs symmetric_theta_rad")
        return symmetric_retarder(theta)
    table = {"identity": IDENTITY, "swap": SWAP, "quadrature": QUADRATURE_FPC}
    if preset not in table:
        raise ScenarioError(f"[fpc] unknown preset {preset!r}")
    return table[preset]


def _filter(sec: _Section) -> FilterSpectrum:
    try:
        shape = FilterShape(sec.str("shape", "square"))
    except ValueError:
        raise ScenarioError(f"[filter] unknown shape {sec.str('shape')!r}") from None
    bw, center, sigma = sec.float("bandwidth_nm"), sec.float("center_nm"), sec.float("sigma_rad_per_s")
    if sigma is not None and (bw is not None or center is not None):
        raise ScenarioError("[filter] give either sigma_rad_per_s or bandwidth_nm/center_nm, not both")
    if bw is not None or center is not None:
        if bw is None or center is None or bw <= 0 or center <= 0:
            raise ScenarioError("[filter] bandwidth_nm and center_nm must both be positive")
        return FilterSpectrum.from_bandwidth_nm(bw, center, shape)
    if sigma is not None:
        if sigma <= 0:
            raise ScenarioError("[filter] sigma_rad_per_s must be positive")
        return FilterSpectrum(shape, sigma)
    return FilterSpectrum(shape)


def _overrides(sec: _Section) -> ScanOverrides:
    return ScanOverrides(sec.float("power_mw"), sec.bool("copol_selection"), sec.int("n_gates"))


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    _check_keys(parser)
    s = {name: _Section(parser, name) for name in _KEYS}

    try:
        pump_kw = {k: s["pump"].float(k) for k in _KEYS["pump"] if s["pump"].float(k) is not None}
        pump = PumpConfig(**pump_kw)
        det1 = _detector(s["detector"], s["detector1"])
        det2 = _detector(s["detector"], s["detector2"])
        sc = s["scatter"]
        scatter = ScatterModel(
            pair_coeff=sc.float("pair_coeff_per_mw2", 1.3),
            raman_coeff_co=sc.float("raman_coeff_co_per_mw", 0.0),
            raman_coeff_cross=sc.float("raman_coeff_cross_per_mw", 0.0),
            copol_selection=sc.bool("copol_selection", True),
        )
        detuning = s["source"].float("detuning_hz", 1.58e12)
        if detuning <= 0:
            raise ScenarioError("[source] detuning_hz must be positive")
        freq = FrequencyPair.from_detuning(detuning, pump.center_wavelength_nm)
        fpc_sec = s["fpc"]
        run = s["run"]
        experiment = ExperimentConfig(
            pump=pump,
            det1=det1,
            det2=det2,
            scatter=scatter,
            fpc=_fpc(fpc_sec),
            input_polarization=JonesVector.linear(math.radians(fpc_sec.float("input_angle_deg", 0.0))),
            freq=freq,
            filt=_filter(s["filter"]),
            hwp_retardance_error=fpc_sec.float("hwp_retardance_error_rad", 0.0),
            n_gates=run.int("n_gates", 1_000_000),
            seed=run.int("seed", 0),
            workers=run.int("workers", 1),
            batch_size=run.int("batch_size", 1 << 22),
        )
        if experiment.seed < 0:
            raise ScenarioError("[run] seed must be non-negative")
        h, p, st = s["scan.hwp"], s["scan.power"], s["scan.stage"]
        hwp = HwpScanSpec(h.float("start_deg", 0.0), h.float("stop_deg", 180.0), h.float("step_deg", 11.25), _overrides(h))
        if hwp.step_deg <= 0 or hwp.stop_deg < hwp.start_deg:
            raise ScenarioError("[scan.hwp] needs step_deg > 0 and stop_deg >= start_deg")
        power = PowerScanSpec(
            p.float("min_mw", 0.018),
            p.float("max_mw", 0.18),
            p.int("points", 6),
            p.str("spacing", "log"),
            p.bool("equal_precision", True),
            _overrides(p),
        )
        if power.spacing not in ("log", "linear") or power.points < 1 or not 0 <= power.min_mw <= power.max_mw:
            raise ScenarioError("[scan.power] needs spacing log|linear, points >= 1, 0 <= min_mw <= max_mw")
        if power.spacing == "log" and power.min_mw <= 0:
            raise ScenarioError("[scan.power] log spacing needs min_mw > 0")
        stage = StageScanSpec(st.float("start_mm"), st.float("stop_mm"), st.int("points", 40), _overrides(st))
        if (stage.start_mm is None) != (stage.stop_mm is None) or stage.points < 1:
            raise ScenarioError("[scan.stage] give both start_mm and stop_mm, and points >= 1")
    except ScenarioError:
        raise
    except (ConfigError, ValueError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    return Scenario(experiment, hwp, power, stage, source)


def load_scenario(path: str | os.PathLike) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc.strerror}") from None
    return parse_scenario(text, str(p))


def find_scenario(name: str) -> Path | None:
    """Resolve a scenario by path, then in ``$SAGNACFWM_SCENARIO_DIR``, then packaged."""
    p = Path(name)
    if p.is_file():
        return p
    names = [name] if name.endswith(".ini") else [name, name + ".ini"]
    env = os.environ.get(ENV_DIR)
    if env:
        for n in names:
            cand = Path(env) / n
            if cand.is_file():
                return cand
    pkg = resources.files("sagnacfwm") / "scenarios"
    for n in names:
        cand = pkg / n
        if cand.is_file():
            return Path(str(cand))
    return None


def resolve_scenario(name: str) -> Scenario:
    path = find_scenario(name)
    if path is None:
        raise ScenarioError(f"scenario {name!r} not found (checked path, ${ENV_DIR}, packaged scenarios)")
    return load_scenario(path)
