"""Command line: ``sagnacfwm {state,jones,scan,fit}``.

Exit status: 0 on success, 2 for usage errors, 1 for bad input or I/O
failures, 3 when a fit does not converge.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .counting import BACKEND
from .counting.model import (
    ConfigError,
    Routing,
    StageScan,
    dark_coincidence_estimate,
    expected_counts,
    gate_model,
)
from .counting.scans import ExperimentConfig, hwp_sweep, power_sweep, stage_scan
from .fitting import FitError, extract_period, fidelity_from_visibility, fit_beat
from .interference import Delay, FilterSpectrum, InterferenceError, multimode_p2
from .polarization import (
    IDENTITY,
    QUADRATURE_FPC,
    SWAP,
    HwpAngle,
    JonesVector,
    PolarizationError,
    check_match_conditions,
    effective_purity,
    hwp_matrix,
    loop_phase,
    symmetric_retarder,
    transmission,
)
from .records import (
    RecordError,
    beat_curve_from_csv,
    dumps,
    plot_table,
    scan_csv,
    wide_scan_csv,
    write_text,
)
from .scenario import ENV_DIR, ScenarioError, resolve_scenario
from .state import (
    BASIS_LABELS,
    FrequencyPair,
    SfwmGain,
    StateError,
    fidelity,
    mix_with_background,
    psi2,
    sagnac_output,
)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class CliError(Exception):
    pass


def _phase_fixed(vec: np.ndarray) -> np.ndarray:
    """Remove the global phase: largest-magnitude amplitude made real positive."""
    k = int(np.argmax(np.abs(vec) - 1e-12 * np.arange(vec.size)))
    ph = vec[k] / abs(vec[k])
    out = vec / ph
    out[np.abs(out) < 1e-15] = 0.0
    return out


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


def cmd_state(args) -> int:
    if not 0.0 <= args.p <= 1.0:
        raise CliError(f"--p {args.p} is not a probability")
    psi = sagnac_output(SfwmGain(0.1), args.phi)
    amps = _phase_fixed(psi.vector())
    ideal = psi2()
    f = fidelity(mix_with_background(ideal, args.p), ideal)
    out = {
        "phi": args.phi,
        "p": args.p,
        "amplitudes": {k: complex(a) for k, a in zip(BASIS_LABELS, amps)},
        "probabilities": {k: float(abs(a) ** 2) for k, a in zip(BASIS_LABELS, amps)},
        "fidelity": f,
    }
    if args.json:
        sys.stdout.write(dumps(out))
        return EXIT_OK
    print(f"phi = {args.phi:.6g} rad, p = {args.p:.6g}")
    for k, a in zip(BASIS_LABELS, amps):
        print(f"  {k:6s} {a.real:+.4f} {a.imag:+.4f}i   |a|^2 = {abs(a) ** 2:.4f}")
    print(f"fidelity = {f:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# jones
# ---------------------------------------------------------------------------


def cmd_jones(args) -> int:
    sc = resolve_scenario(args.scenario)
    exp = sc.experiment
    jc = exp.fpc
    if args.preset:
        if args.preset == "symmetric":
            if args.theta_rad is None:
                raise CliError("--preset symmetric needs --theta-rad")
            jc = symmetric_retarder(args.theta_rad)
        else:
            jc = {"identity": IDENTITY, "swap": SWAP, "quadrature": QUADRATURE_FPC}[args.preset]
    e_in = exp.input_polarization
    if args.input_angle_deg is not None:
        e_in = JonesVector.linear(math.radians(args.input_angle_deg))
    if args.hwp_deg is not None:
        e_in = hwp_matrix(HwpAngle.degrees(args.hwp_deg), exp.hwp_retardance_error) @ e_in
    cls = check_match_conditions(jc, e_in)
    p = effective_purity(jc, e_in)
    # with orthogonal pumps the overlap phase is rounding noise
    phi = loop_phase(jc, e_in) if p > 1e-9 else float("nan")
    out = {
        "classification": cls.value,
        "transmission": transmission(jc),
        "purity_p": min(max(p, 0.0), 1.0),
        "loop_phase": phi if math.isfinite(phi) else None,
        "unitary": jc.is_unitary(1e-10),
        "input": [e_in.ex, e_in.ey],
    }
    if args.json:
        sys.stdout.write(dumps(out))
        return EXIT_OK
    print(f"classification = {cls.value}")
    print(f"transmission   = {out['transmission']:.6g}")
    print(f"p              = {out['purity_p']:.6g}")
    print("phi            = " + (f"{phi:.6g} rad" if math.isfinite(phi) else "undefined (pumps orthogonal)"))
    if not out["unitary"]:
        print("warning: FPC matrix is not unitary")
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------


def _expected(cfg: ExperimentConfig, routing, n_gates: int):
    return expected_counts(gate_model(cfg.pump, cfg.det1, cfg.det2, cfg.scatter, routing), n_gates)


def _routings(arg: str) -> list[Routing]:
    return [Routing.DD, Routing.CD] if arg == "both" else [Routing(arg)]


def _overlay_hwp(cfg: ExperimentConfig, angles, routings) -> dict:
    cols = ["angle_deg", "purity_p"]
    for r in routings:
        cols += [f"{r.value.lower()}_coincidences", f"{r.value.lower()}_accidentals"]
    rows = []
    for a in angles:
        c = cfg.with_hwp(HwpAngle.degrees(a))
        row = [float(a), c.scatter.purity_p]
        for r in routings:
            ex = _expected(c, r, cfg.n_gates)
            row += [ex.coincidences, ex.accidentals_est]
        rows.append(row)
    return {"kind": "hwp", "description": "analytic expected counts per angle", "columns": cols, "rows": rows}


def _overlay_power(cfg: ExperimentConfig, powers, gates, routings) -> dict:
    cols = ["power_mw", "n_gates"]
    for r in routings:
        cols += [f"{r.value.lower()}_coincidences", f"{r.value.lower()}_accidentals"]
    rows = []
    base = cfg.matched()
    for p, n in zip(powers, gates):
        c = replace(base, pump=replace(base.pump, avg_power_mw=float(p)))
        row = [float(p), float(n)]
        for r in routings:
            ex = _expected(c, r, n)
            row += [ex.coincidences, ex.accidentals_est]
        rows.append(row)
    return {"kind": "power", "description": "analytic expected counts per power", "columns": cols, "rows": rows}


def _overlay_stage(cfg: ExperimentConfig, positions) -> dict:
    c = cfg.matched()
    lo, hi = float(np.min(positions)), float(np.max(positions))
    dense = np.linspace(lo, hi, max(10 * len(positions), 200))
    rows = []
    for x in dense:
        ex = _expected(c, StageScan(float(x), c.freq, c.filt), c.n_gates)
        corr = ex.coincidences - dark_coincidence_estimate(ex.singles_1, ex.singles_2, ex.n_gates, c.det1, c.det2)
        p2 = multimode_p2(Delay.from_stage_mm(x), c.freq, c.scatter.purity_p, c.filt)
        rows.append([float(x), float(p2), corr])
    return {
        "kind": "stage",
        "description": "broadband beat law P2 and analytic dark-subtracted coincidences",
        "columns": ["position_mm", "p2", "expected_coincidences_corrected"],
        "rows": rows,
        "parameters": {
            "visibility": c.scatter.purity_p,
            "sigma_rad_per_s": c.filt.sigma,
            "freq_diff_rad_per_s": c.freq.difference,
            "n_gates": c.n_gates,
        },
    }


def _paths(out: str) -> tuple[Path, Path, Path]:
    p = Path(out)
    stem = p.with_suffix("") if p.suffix else p
    return p, stem.with_name(stem.name + ".overlay.json"), stem.with_name(stem.name + ".plot.dat")


def cmd_scan(args) -> int:
    sc = resolve_scenario(args.scenario)
    exp = sc.experiment
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.workers is not None:
        kw["workers"] = args.workers
    exp = replace(exp, **kw)
    csv_path, overlay_path, plot_path = _paths(args.out)
    fit_json = None

    if args.kind == "hwp":
        cfg = sc.hwp.overrides.apply(exp)
        if args.n_gates is not None:
            cfg = replace(cfg, n_gates=args.n_gates)
        angles = sc.hwp.grid()
        routings = _routings(args.routing)
        res = hwp_sweep(angles, cfg, routings)
        text = scan_csv(res[routings[0]]) if len(routings) == 1 else wide_scan_csv(res)
        overlay = _overlay_hwp(cfg, angles, routings)
        cols = ["angle_deg"] + [f"{r.value.lower()}_{k}" for r in routings for k in ("coincidences", "accidentals_est")]
        prows = [
            [a] + [v for r in routings for v in (res[r][i].coincidences, res[r][i].accidentals_est)]
            for i, a in enumerate(angles)
        ]
        n_rows = len(angles)
    elif args.kind == "power":
        cfg = sc.power.overrides.apply(exp)
        if args.n_gates is not None:
            cfg = replace(cfg, n_gates=args.n_gates)
        powers = sc.power.grid()
        gates = sc.power.gates(cfg.n_gates)
        routings = _routings(args.routing)
        res = {r: power_sweep(powers, cfg, r, gates) for r in routings}
        text = scan_csv(res[routings[0]]) if len(routings) == 1 else wide_scan_csv(res)
        overlay = _overlay_power(cfg, powers, gates, routings)
        cols = ["power_mw", "n_gates"] + [
            f"{r.value.lower()}_{k}" for r in routings for k in ("coincidences", "accidentals_est")
        ]
        prows = [
            [p, g] + [v for r in routings for v in (res[r][i].coincidences, res[r][i].accidentals_est)]
            for i, (p, g) in enumerate(zip(powers, gates))
        ]
        n_rows = len(powers)
    else:
        cfg = sc.stage.overrides.apply(exp)
        if args.n_gates is not None:
            cfg = replace(cfg, n_gates=args.n_gates)
        positions = sc.stage.grid(cfg.freq)
        out = stage_scan(positions, cfg)
        text = scan_csv(out.results)
        overlay = _overlay_stage(cfg, positions)
        cols = ["position_mm", "singles_1", "singles_2", "coincidences_corrected"]
        prows = [[r.setting, r.singles_1, r.singles_2, r.coincidences_corrected] for r in out.results]
        n_rows = len(positions)
        if args.fit:
            rep = fit_beat(out.curve, cfg.freq, filt=cfg.filt)
            fit_json = rep.as_dict()

    write_text(csv_path, text)
    write_text(overlay_path, dumps(overlay))
    plot = plot_table(cols, prows) + "\n\n" + plot_table(overlay["columns"], overlay["rows"])
    write_text(plot_path, plot)
    summary = {
        "kind": args.kind,
        "csv": str(csv_path),
        "overlay": str(overlay_path),
        "plot": str(plot_path),
        "rows": n_rows,
        "backend": BACKEND,
        "fit": fit_json,
    }
    if args.json:
        sys.stdout.write(dumps(summary))
    else:
        print(f"wrote {n_rows} rows to {csv_path}; overlay {overlay_path}; plot data {plot_path}")
        if fit_json:
            p = fit_json["params"]
            print(f"fit: V = {p['visibility']:.4f} +- {fit_json['visibility_std_err']:.4f}, F = {fit_json['fidelity']:.4f}")
    if fit_json is not None and not fit_json["converged"]:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    curve = beat_curve_from_csv(args.csv_path)
    freq = FrequencyPair.from_detuning(args.freq_diff_hz)
    filt = FilterSpectrum.from_bandwidth_nm(args.bandwidth_nm, args.center_nm)
    rep = fit_beat(curve, freq, filt=filt, free_frequency=args.free_frequency)
    try:
        spectral = extract_period(curve)
    except FitError:
        spectral = None
    v, err = rep.params.visibility, rep.visibility_std_err
    detected = bool(v > 0 and math.isfinite(err) and v > 3.0 * err)
    out = rep.as_dict()
    out.update(spectral_period=spectral, beat_detected=detected, source=str(args.csv_path))
    text = dumps(out)
    if args.out:
        write_text(args.out, text)
    if args.json:
        sys.stdout.write(text)
    else:
        if detected:
            print(f"V = {v:.4f} +- {err:.4f}")
        else:
            print(f"no beat detected: V = {v:.4g} +- {err:.3g}")
        print(f"F = {fidelity_from_visibility(v):.4f}")
        print(f"period = {rep.fitted_period:.5f} mm (model)" + (f", {spectral:.5f} mm (spectrum)" if spectral else ""))
        print(f"sigma = {rep.params.sigma:.4g} rad/s = 2 pi x {rep.params.sigma / (2 * math.pi):.4g} Hz")
        if not rep.converged:
            print("fit did not converge", file=sys.stderr)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sagnacfwm",
        description="Sagnac-loop photon-pair source: state algebra, Jones analysis, counting scans and beat fits.",
        epilog=f"Scenario names are looked up as a path, then in ${ENV_DIR}, then among packaged scenarios.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="loop output amplitudes and fidelity of the p-mixture")
    p.add_argument("--phi", type=float, required=True, help="pump phase difference, rad")
    p.add_argument("--p", type=float, default=1.0, help="coherent fraction, 0..1 (default 1)")
    p.add_argument("--json", action="store_true", help="print JSON")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("jones", help="pump mode-matching report for the configured FPC")
    p.add_argument("--scenario", default="operating_point", help="scenario name or path (default: operating_point)")
    p.add_argument("--preset", choices=["identity", "swap", "quadrature", "symmetric"], help="override the FPC")
    p.add_argument("--theta-rad", type=float, help="retardance of the symmetric preset, rad")
    p.add_argument("--input-angle-deg", type=float, help="linear input polarization angle, degrees")
    p.add_argument("--hwp-deg", type=float, help="input half-wave plate angle, degrees")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_jones)

    p = sub.add_parser("scan", help="Monte-Carlo scan; writes CSV, overlay JSON and plot data")
    p.add_argument("kind", choices=["hwp", "power", "stage"])
    p.add_argument("--scenario", default="operating_point", help="scenario name or path (default: operating_point)")
    p.add_argument("-o", "--out", required=True, help="CSV path; sidecars are written next to it")
    p.add_argument("--routing", choices=["DD", "CD", "both"], default="both", help="hwp/power scans (default both)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--n-gates", type=int, help="gates per point, overriding the scenario")
    p.add_argument("--workers", type=int, help="threads generating gate batches")
    p.add_argument("--fit", action="store_true", help="stage scan: fit the beat and report it")
    p.add_argument("--json", action="store_true", help="print a JSON summary")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit", help="fit a stage-scan CSV to the broadband beat law")
    p.add_argument("csv_path")
    p.add_argument("--freq-diff-hz", type=float, default=1.58e12, help="(w_i - w_s) / 2 pi, Hz (default 1.58e12)")
    p.add_argument("--bandwidth-nm", type=float, default=0.9, help="filter passband for the initial sigma, nm")
    p.add_argument("--center-nm", type=float, default=1544.5, help="filter centre wavelength, nm")
    p.add_argument("--free-frequency", action="store_true", help="also fit the frequency difference")
    p.add_argument("-o", "--out", help="write the FitReport JSON here")
    p.add_argument("--json", action="store_true", help="print the FitReport JSON")
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ScenarioError,
        RecordError,
        ConfigError,
        FitError,
        StateError,
        PolarizationError,
        InterferenceError,
    ) as exc:
        print(f"sagnacfwm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
