"""Fit stage-scan coincidences to the broadband beat law.

Model, with ``t = 2 (l - l0) / c`` the extra delay of the stage offset::

    C(l) = A * (1 - V * f(sigma t) * cos(dw t))

``f`` is ``sin(x)/x`` for a square filter passband.  The frequency difference
``dw`` is normally held fixed; it can be freed to measure the period.

The optimizer is a Levenberg-Marquardt loop written here (Marquardt's
``diag(J^T J)`` damping, analytic Jacobian, Poisson weights), restarted from
several stage origins across one fringe because the cosine phase makes the
residual multimodal in ``l0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .interference import BeatCurve, FilterShape, FilterSpectrum
from .state import SPEED_OF_LIGHT, FrequencyPair

MM_TO_S = 2e-3 / SPEED_OF_LIGHT  # stage mm -> delay seconds (double pass)
MAX_ITER = 200
REL_TOL = 1e-10
MIN_POINTS = 8


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class BeatFitParams:
    amplitude: float
    visibility: float
    sigma: float  # rad/s
    origin_l0: float  # mm
    fixed_freq_diff: float  # rad/s, omega_i - omega_s

    def __post_init__(self):
        if not self.amplitude > 0:
            raise FitError("amplitude must be positive")
        if not 0.0 <= self.visibility <= 1.0:
            raise FitError(f"visibility {self.visibility} outside [0, 1]")
        if not self.sigma > 0 or self.fixed_freq_diff == 0:
            raise FitError("sigma must be positive and the frequency difference nonzero")

    @property
    def period_mm(self) -> float:
        return math.pi * SPEED_OF_LIGHT / abs(self.fixed_freq_diff) * 1e3


@dataclass(frozen=True)
class FitReport:
    params: BeatFitParams
    visibility_std_err: float
    fitted_period: float  # mm
    residual_rms: float
    converged: bool
    iterations: int = 0
    sigma_std_err: float = float("nan")
    period_std_err: float = float("nan")
    initial_cost: float = float("nan")
    final_cost: float = float("nan")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["fidelity"] = fidelity_from_visibility(self.params.visibility)
        return d


def fidelity_from_visibility(v: float) -> float:
    if not 0.0 <= v <= 1.0:
        raise FitError(f"visibility {v} outside [0, 1]")
    return (1.0 + v) / 2.0


# ---------------------------------------------------------------------------
# Model and Jacobian
# ---------------------------------------------------------------------------


def _envelope(u: np.ndarray, shape: FilterShape) -> tuple[np.ndarray, np.ndarray]:
    """Envelope f(u) and its derivative f'(u)."""
    if shape is FilterShape.GAUSSIAN:
        f = np.exp(-0.5 * u**2)
        return f, -u * f
    f = np.sinc(u / math.pi)
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    df = np.where(small, -u / 3.0, (np.cos(u) - f) / safe)
    return f, df


def beat_model(position_mm, theta, shape: FilterShape = FilterShape.SQUARE) -> np.ndarray:
    """Counts at ``position_mm`` for ``theta = (A, V, sigma, l0, dw)``."""
    a, v, sigma, l0, dw = theta
    t = MM_TO_S * (np.asarray(position_mm, dtype=float) - l0)
    f, _ = _envelope(sigma * t, shape)
    return a * (1.0 - v * f * np.cos(dw * t))


def beat_jacobian(position_mm, theta, shape: FilterShape = FilterShape.SQUARE) -> np.ndarray:
    """Analytic ``d model / d (A, V, sigma, l0, dw)``, one row per position."""
    a, v, sigma, l0, dw = theta
    t = MM_TO_S * (np.asarray(position_mm, dtype=float) - l0)
    f, df = _envelope(sigma * t, shape)
    c, s = np.cos(dw * t), np.sin(dw * t)
    d_dt = -a * v * (sigma * df * c - f * dw * s)  # d model / d t
    return np.column_stack(
        [
            1.0 - v * f * c,
            -a * f * c,
            -a * v * df * t * c,
            -MM_TO_S * d_dt,
            a * v * f * s * t,
        ]
    )


# ---------------------------------------------------------------------------
# Levenberg-Marquardt
# ---------------------------------------------------------------------------


@dataclass
class _LmResult:
    theta: np.ndarray
    cost: float
    initial_cost: float
    iterations: int
    converged: bool


def _project(theta: np.ndarray) -> np.ndarray:
    theta = theta.copy()
    theta[0] = max(theta[0], 1e-300)
    theta[1] = min(max(theta[1], 0.0), 1.0)
    theta[2] = abs(theta[2])
    return theta


def _levenberg_marquardt(x, y, w, theta0, free, shape) -> _LmResult:
    sw = np.sqrt(w)

    def cost_of(th):
        r = sw * (y - beat_model(x, th, shape))
        return float(r @ r)

    theta = _project(np.asarray(theta0, dtype=float))
    cost = cost_init = cost_of(theta)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        r = sw * (y - beat_model(x, theta, shape))
        jac = sw[:, None] * beat_jacobian(x, theta, shape)[:, free]
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        improved = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta.copy()
            trial[free] += step
            trial = _project(trial)
            new_cost = cost_of(trial)
            if np.isfinite(new_cost) and new_cost <= cost:
                improved = True
                break
            lam *= 10.0
        if not improved:
            # no downhill step at any damping: a stationary point
            converged = True
            break
        rel = (cost - new_cost) / max(cost, 1e-300)
        theta, cost = trial, new_cost
        lam = max(lam / 10.0, 1e-12)
        if rel < REL_TOL:
            converged = True
            break
    return _LmResult(theta, cost, cost_init, it, converged)


def _covariance(x, w, theta, free, shape, cost) -> np.ndarray:
    jac = np.sqrt(w)[:, None] * beat_jacobian(x, theta, shape)[:, free]
    dof = max(x.size - int(np.count_nonzero(free)), 1)
    try:
        inv = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((jac.shape[1], jac.shape[1]), np.inf)
    return cost / dof * inv


# ---------------------------------------------------------------------------
# Public fit
# ---------------------------------------------------------------------------


def _initial_guess(data: BeatCurve, dw: float, sigma: float) -> BeatFitParams:
    x, y = data.position_mm, data.counts
    period = math.pi * SPEED_OF_LIGHT / abs(dw) * 1e3
    mid = 0.5 * (x[0] + x[-1])
    central = np.abs(x - mid) <= 0.5 * period
    yc = y[central] if np.count_nonzero(central) >= 3 else y
    hi, lo = float(np.max(yc)), float(np.min(yc))
    v = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
    amp = float(np.mean(y))
    l0 = float(x[np.argmin(y)])
    return BeatFitParams(max(amp, 1e-12), min(max(v, 0.0), 1.0), sigma, l0, dw)


def fit_beat(
    data: BeatCurve,
    freq: FrequencyPair | float,
    init: BeatFitParams | None = None,
    *,
    filt: FilterSpectrum | None = None,
    free_frequency: bool = False,
    n_starts: int = 8,
    weights: np.ndarray | None = None,
) -> FitReport:
    """Weighted least-squares fit of ``data`` to the broadband beat law.

    ``freq`` gives the signal-idler frequency difference (a
    :class:`FrequencyPair` or ``omega_i - omega_s`` in rad/s).  Multi-start
    over ``l0`` spans one fringe in ``n_starts`` steps plus the initial guess
    and its half-fringe shift; the lowest cost wins, ties to the lowest ``l0``.
    """
    dw = freq.difference if isinstance(freq, FrequencyPair) else float(freq)
    if dw == 0:
        raise FitError("frequency difference must be nonzero")
    if len(data) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {len(data)}")
    period = math.pi * SPEED_OF_LIGHT / abs(dw) * 1e3
    if data.span_mm < period:
        raise FitError("data must span at least one beat period")
    filt = filt or FilterSpectrum()
    if np.mean(data.counts) <= 0:
        raise FitError("no counts to fit")

    x, y = data.position_mm, data.counts
    w = 1.0 / np.maximum(y, 1.0) if weights is None else np.asarray(weights, dtype=float)
    guess = init or _initial_guess(data, dw, filt.sigma)
    free = np.array([True, True, True, True, free_frequency])

    starts = [guess.origin_l0, guess.origin_l0 + 0.5 * period]
    starts += list(guess.origin_l0 + period * (np.arange(n_starts) / n_starts - 0.5))
    theta_g = np.array([guess.amplitude, guess.visibility, guess.sigma, guess.origin_l0, dw])

    best: _LmResult | None = None
    for l0 in starts:
        th = theta_g.copy()
        th[3] = l0
        res = _levenberg_marquardt(x, y, w, th, free, filt.shape)
        if best is None or res.cost < best.cost * (1 - 1e-9):
            best = res
        elif res.cost <= best.cost * (1 + 1e-9) and res.theta[3] < best.theta[3]:
            best = res
    assert best is not None

    theta = best.theta
    cov = _covariance(x, w, theta, free, filt.shape, best.cost)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    idx = {k: i for i, k in enumerate(np.flatnonzero(free))}
    params = BeatFitParams(
        amplitude=float(theta[0]),
        visibility=float(theta[1]),
        sigma=float(theta[2]),
        origin_l0=float(theta[3]),
        fixed_freq_diff=float(theta[4]),
    )
    period_fit = params.period_mm
    period_err = period_fit * err[idx[4]] / abs(theta[4]) if free_frequency else 0.0
    resid = y - beat_model(x, theta, filt.shape)
    initial_cost = float(np.sum(w * (y - beat_model(x, theta_g, filt.shape)) ** 2))
    converged = best.converged and np.isfinite(best.cost) and best.cost <= initial_cost
    return FitReport(
        params=params,
        visibility_std_err=float(err[idx[1]]),
        fitted_period=period_fit,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=bool(converged),
        iterations=best.iterations,
        sigma_std_err=float(err[idx[2]]),
        period_std_err=float(period_err),
        initial_cost=initial_cost,
        final_cost=float(best.cost),
    )


# ---------------------------------------------------------------------------
# Period from the spectrum of the curve
# ---------------------------------------------------------------------------


def _sinusoid_power(x: np.ndarray, y: np.ndarray, k: float) -> float:
    """Fraction of variance explained by offset + sinusoid at ``k`` cycles/mm."""
    a = np.column_stack([np.ones_like(x), np.cos(2 * math.pi * k * x), np.sin(2 * math.pi * k * x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    r = y - a @ coef
    tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(r @ r) / tot if tot > 0 else 0.0


def periodogram(data: BeatCurve, n_freq: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares spectrum of the curve (handles uneven sampling)."""
    x = data.position_mm - data.position_mm.mean()
    y = data.counts
    span = data.span_mm
    dx = np.median(np.diff(data.position_mm))
    k = np.linspace(0.5 / span, 0.5 / dx, n_freq)
    return k, np.array([_sinusoid_power(x, y, kk) for kk in k])


def extract_period(data: BeatCurve) -> float:
    """Beat period (mm) from the dominant component of the curve's spectrum."""
    if len(data) < MIN_POINTS or data.span_mm <= 0:
        raise FitError("too few points to estimate a period")
    if np.ptp(data.counts) == 0:
        raise FitError("flat curve has no period")
    k, power = periodogram(data)
    j = int(np.argmax(power))
    step = k[1] - k[0]
    x = data.position_mm - data.position_mm.mean()
    res = minimize_scalar(
        lambda kk: -_sinusoid_power(x, data.counts, kk),
        bounds=(max(k[j] - step, k[0]), min(k[j] + step, k[-1])),
        method="bounded",
        options={"xatol": 1e-10 * k[j]},
    )
    period = 1.0 / float(res.x)
    if data.span_mm < 2.0 * period * (1 - 1e-9):
        raise FitError(f"data span {data.span_mm:.4g} mm covers fewer than two periods of {period:.4g} mm")
    return period

