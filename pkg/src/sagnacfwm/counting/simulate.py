"""Monte-Carlo simulation of the gated coincidence counter.

Each gate carries one pump pulse.  Photons that would go undetected never
influence a click, so they are thinned away before sampling; the thinned
processes have the same law as the detected ones:

* pairs per gate are thermal with mean ``mu``; keeping each pair with
  probability ``r`` (reached a detector and was detected) leaves a thermal
  number with mean ``mu r``;
* detected Raman photons per gate are Poisson with mean ``eta m``, and only
  whether there is at least one matters;
* dark counts are Bernoulli per gate.

Gate sets are drawn as Bernoulli processes from geometric gaps, so the cost
scales with the number of detected events, not the number of gates.

Gates are split into batches with independent seed-derived substreams; batch
event lists can be produced in parallel and are then passed through the
detectors' dead time in gate order, carrying the hold-off across batches.
The result is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .model import (
    ConfigError,
    DetectorConfig,
    GateModel,
    PumpConfig,
    Routing,
    ScanResult,
    ScatterModel,
    StageScan,
    accidental_estimate,
    dark_coincidence_estimate,
    gate_model,
)

DEFAULT_BATCH = 1 << 22
_EMPTY = np.empty(0, dtype=np.int64)


def bernoulli_gates(rng: np.random.Generator, n: int, q: float) -> np.ndarray:
    """Sorted indices in ``[0, n)`` of gates that fire, each independently with probability ``q``."""
    if n <= 0 or q <= 0.0:
        return _EMPTY
    if q >= 1.0:
        return np.arange(n, dtype=np.int64)
    chunks = []
    last = -1
    while True:
        remaining = n - 1 - last
        size = int(remaining * q + 6.0 * np.sqrt(remaining * q) + 16)
        pos = last + np.cumsum(rng.geometric(q, size=size))
        chunks.append(pos)
        last = int(pos[-1])
        if last >= n:
            break
    out = np.concatenate(chunks)
    return out[out < n].astype(np.int64, copy=False)


@dataclass(frozen=True)
class _BatchEvents:
    start: int
    clicks_1: np.ndarray  # candidate clicks, global gate index, before dead time
    clicks_2: np.ndarray


def _batch_events(model: GateModel, start: int, size: int, seed: np.random.SeedSequence) -> _BatchEvents:
    rng = np.random.default_rng(seed)
    split = model.detected_pair_split()
    r = float(split.sum())
    mu_eff = model.mu_pairs * r

    pair_1, pair_2 = _EMPTY, _EMPTY
    if mu_eff > 0:
        gates = bernoulli_gates(rng, size, mu_eff / (1.0 + mu_eff))
        counts = rng.geometric(1.0 / (1.0 + mu_eff), size=gates.size)
        owner = np.repeat(gates, counts)
        # 0: both detected, 1: only detector 1, 2: only detector 2
        kind = rng.choice(3, size=owner.size, p=split / r)
        pair_1 = np.unique(owner[kind != 2])
        pair_2 = np.unique(owner[kind != 1])

    raman_1 = bernoulli_gates(rng, size, -np.expm1(-model.det1.efficiency * model.raman_mean_1))
    raman_2 = bernoulli_gates(rng, size, -np.expm1(-model.det2.efficiency * model.raman_mean_2))
    dark_1 = bernoulli_gates(rng, size, model.det1.dark_prob_per_gate)
    dark_2 = bernoulli_gates(rng, size, model.det2.dark_prob_per_gate)

    c1 = np.union1d(np.union1d(pair_1, raman_1), dark_1) + start
    c2 = np.union1d(np.union1d(pair_2, raman_2), dark_2) + start
    return _BatchEvents(start, c1.astype(np.int64), c2.astype(np.int64))


@dataclass(frozen=True)
class RawCounts:
    singles_1: int
    singles_2: int
    coincidences: int
    n_gates: int


def run_gates(
    model: GateModel,
    n_gates: int,
    seed: int | np.random.SeedSequence,
    batch_size: int = DEFAULT_BATCH,
    workers: int = 1,
) -> RawCounts:
    if n_gates <= 0:
        raise ConfigError("n_gates must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    starts = list(range(0, n_gates, batch_size))
    seeds = ss.spawn(len(starts))
    jobs = [(model, s, min(batch_size, n_gates - s), sd) for s, sd in zip(starts, seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda j: _batch_events(*j), jobs))
    else:
        batches = [_batch_events(*j) for j in jobs]

    h1, h2 = model.det1.holdoff_gates, model.det2.holdoff_gates
    armed_1 = armed_2 = 0
    s1 = s2 = coinc = 0
    for b in batches:
        acc1, armed_1 = _backend.deadtime_filter(b.clicks_1, h1, armed_1)
        acc2, armed_2 = _backend.deadtime_filter(b.clicks_2, h2, armed_2)
        s1 += acc1.size
        s2 += acc2.size
        coinc += int(_backend.count_coincidences(acc1, acc2))
    return RawCounts(s1, s2, coinc, n_gates)


def simulate_gates(
    pump: PumpConfig,
    det1: DetectorConfig,
    det2: DetectorConfig,
    scat: ScatterModel,
    routing: Routing | str | StageScan,
    n_gates: int,
    seed: int | np.random.SeedSequence,
    *,
    setting: float = 0.0,
    batch_size: int = DEFAULT_BATCH,
    workers: int = 1,
) -> ScanResult:
    """Simulate ``n_gates`` detector gates and tally singles and coincidences.

    Deterministic for a fixed seed.  For stage scans the dark-count share of
    the coincidences is also estimated and removed in ``coincidences_corrected``.
    """
    if not isinstance(routing, StageScan):
        routing = Routing(routing)
    model = gate_model(pump, det1, det2, scat, routing)
    raw = run_gates(model, n_gates, seed, batch_size=batch_size, workers=workers)
    corrected = None
    if isinstance(routing, StageScan):
        corrected = raw.coincidences - dark_coincidence_estimate(raw.singles_1, raw.singles_2, n_gates, det1, det2)
    return ScanResult(
        setting=setting,
        singles_1=raw.singles_1,
        singles_2=raw.singles_2,
        coincidences=raw.coincidences,
        accidentals_est=accidental_estimate(raw.singles_1, raw.singles_2, n_gates),
        n_gates=n_gates,
        coincidences_corrected=corrected,
    )
