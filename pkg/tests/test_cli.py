import json
import math

import jsonschema
import numpy as np
import pytest

from sagnacfwm.cli import EXIT_ERROR, EXIT_OK, main
from sagnacfwm.interference import Delay, beat_period_mm, multimode_p2
from sagnacfwm.records import (
    FIT_SCHEMA,
    JONES_SCHEMA,
    OVERLAY_SCHEMA,
    SCAN_SUMMARY_SCHEMA,
    STATE_SCHEMA,
    read_csv_columns,
    scan_csv,
)
from sagnacfwm.counting import ScanResult
from sagnacfwm.state import FrequencyPair

FREQ = FrequencyPair.from_detuning(1.58e12)
R = 1 / math.sqrt(2)


def run_json(capsys, *argv):
    assert main([*argv, "--json"]) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def amps(out):
    return [complex(out["amplitudes"][k]["re"], out["amplitudes"][k]["im"]) for k in ("cc", "dd", "sc_id", "ic_sd")]


@pytest.fixture
def small(tmp_path):
    """Packaged scenario with a reduced gate budget, written to a file."""
    from importlib import resources

    text = (resources.files("sagnacfwm") / "scenarios" / "operating_point.ini").read_text()
    text = text.replace("n_gates = 4000000", "n_gates = 200000").replace("n_gates = 100000000", "n_gates = 2000000")
    path = tmp_path / "small.ini"
    path.write_text(text)
    return path


class TestState:
    def test_entangled(self, capsys):
        out = run_json(capsys, "state", "--phi", "1.5707963267948966", "--p", "1")
        jsonschema.validate(out, STATE_SCHEMA)
        assert np.allclose(amps(out), [0, 0, R, R], atol=1e-12)
        assert out["fidelity"] == pytest.approx(1.0)

    def test_bunched(self, capsys):
        out = run_json(capsys, "state", "--phi", "0", "--p", "1")
        a = amps(out)
        assert np.allclose(np.abs(a), [R, R, 0, 0], atol=1e-12)
        assert a[0] == pytest.approx(-a[1])

    def test_quarter_phase(self, capsys):
        out = run_json(capsys, "state", "--phi", "0.7854", "--p", "0.9")
        assert np.allclose(np.abs(amps(out)), 0.5, atol=1e-4)
        assert out["fidelity"] == pytest.approx(0.95)

    def test_text_output(self, capsys):
        assert main(["state", "--phi", "0"]) == EXIT_OK
        assert "fidelity = 1.0000" in capsys.readouterr().out

    def test_bad_arguments(self, capsys):
        assert main(["state", "--phi", "0", "--p", "2"]) == EXIT_ERROR
        with pytest.raises(SystemExit) as e:
            main(["state", "--phi", "zero"])
        assert e.value.code == 2


class TestJones:
    @pytest.mark.parametrize(
        "args, cls, t",
        [
            (["--preset", "identity"], "ReflectorMatch", 0.0),
            (["--preset", "swap"], "TransmitterMatch", 1.0),
            (["--preset", "symmetric", "--theta-rad", str(math.pi / 4)], "Unmatched", 0.5),
        ],
    )
    def test_presets(self, capsys, args, cls, t):
        out = run_json(capsys, "jones", *args)
        jsonschema.validate(out, JONES_SCHEMA)
        assert out["classification"] == cls
        assert out["transmission"] == pytest.approx(t, abs=1e-12)

    def test_quadrature_hwp(self, capsys):
        out = run_json(capsys, "jones", "--hwp-deg", "22.5")
        assert out["purity_p"] == pytest.approx(0.0, abs=1e-12)
        out = run_json(capsys, "jones")
        assert out["purity_p"] == pytest.approx(1.0) and out["loop_phase"] == pytest.approx(math.pi / 2)

    def test_errors(self, capsys):
        assert main(["jones", "--preset", "symmetric"]) == EXIT_ERROR
        assert main(["jones", "--scenario", "does-not-exist"]) == EXIT_ERROR


class TestScan:
    def test_hwp_rows_and_columns(self, capsys, small, tmp_path):
        out_csv = tmp_path / "hwp.csv"
        summary = run_json(capsys, "scan", "hwp", "--scenario", str(small), "-o", str(out_csv))
        jsonschema.validate(summary, SCAN_SUMMARY_SCHEMA)
        lines = out_csv.read_text().splitlines()
        assert len(lines) == 18
        assert "dd_coincidences" in lines[0] and "cd_coincidences" in lines[0]
        overlay = json.loads((tmp_path / "hwp.overlay.json").read_text())
        jsonschema.validate(overlay, OVERLAY_SCHEMA)
        assert (tmp_path / "hwp.plot.dat").read_text().startswith("# angle_deg")

    def test_power_zero_coefficients(self, capsys, tmp_path):
        scen = tmp_path / "zero.ini"
        scen.write_text(
            "[detector]\ndark_prob_per_gate = 0\n[scatter]\npair_coeff_per_mw2 = 0\n"
            "[run]\nn_gates = 10000\n[scan.power]\nequal_precision = false\n"
        )
        out_csv = tmp_path / "power.csv"
        run_json(capsys, "scan", "power", "--scenario", str(scen), "-o", str(out_csv))
        cols = read_csv_columns(out_csv)
        for k, v in cols.items():
            if k.endswith(("singles_1", "singles_2", "coincidences", "accidentals_est")):
                assert np.all(v == 0), k

    def test_stage_minimum_near_zero(self, capsys, tmp_path):
        scen = tmp_path / "stage.ini"
        from importlib import resources

        text = (resources.files("sagnacfwm") / "scenarios" / "operating_point.ini").read_text()
        text = text.replace("[scan.stage]\n", "[scan.stage]\nstart_mm = -0.3\nstop_mm = 0.3\n").replace(
            "points = 40", "points = 61"
        ).replace("n_gates = 100000000", "n_gates = 20000000")
        scen.write_text(text)
        out_csv = tmp_path / "stage.csv"
        run_json(capsys, "scan", "stage", "--scenario", str(scen), "-o", str(out_csv))
        cols = read_csv_columns(out_csv)
        assert cols["setting"].size == 61
        x, y = cols["setting"], cols["coincidences_corrected"]
        assert abs(x[np.argmin(y)]) < 0.25 * beat_period_mm(FREQ)
        overlay = json.loads((tmp_path / "stage.overlay.json").read_text())
        jsonschema.validate(overlay, OVERLAY_SCHEMA)

    def test_byte_identical(self, capsys, small, tmp_path):
        texts = []
        for name in ("a.csv", "b.csv"):
            run_json(capsys, "scan", "hwp", "--scenario", str(small), "-o", str(tmp_path / name))
            texts.append((tmp_path / name).read_bytes())
        assert texts[0] == texts[1]
        run_json(capsys, "scan", "hwp", "--scenario", str(small), "-o", str(tmp_path / "c.csv"), "--seed", "2")
        assert (tmp_path / "c.csv").read_bytes() != texts[0]

    def test_stage_with_fit(self, capsys, small, tmp_path):
        summary = run_json(capsys, "scan", "stage", "--scenario", str(small), "-o", str(tmp_path / "s.csv"), "--fit")
        jsonschema.validate(summary["fit"], FIT_SCHEMA)

    def test_unwritable_output(self, capsys, small, tmp_path):
        assert main(["scan", "hwp", "--scenario", str(small), "-o", str(tmp_path / "no" / "x.csv")]) == EXIT_ERROR


def write_stage_csv(path, y, x):
    rows = [ScanResult(float(a), 10**6, 10**6, 0, 0.0, 10**6, float(b)) for a, b in zip(x, y)]
    path.write_text(scan_csv(rows))


class TestFit:
    X = np.linspace(-0.15, 0.15, 41)

    def test_noiseless_round_trip(self, capsys, tmp_path):
        filt_sigma = 2 * math.pi * 1.09e11
        from sagnacfwm.interference import FilterSpectrum

        y = 800.0 * multimode_p2(Delay.from_stage_mm(self.X - 0.003), FREQ, 0.95, FilterSpectrum(sigma=filt_sigma))
        path = tmp_path / "c.csv"
        write_stage_csv(path, y, self.X)
        out = run_json(capsys, "fit", str(path))
        jsonschema.validate(out, FIT_SCHEMA)
        assert out["params"]["visibility"] == pytest.approx(0.95, abs=1e-6)
        assert out["params"]["sigma"] == pytest.approx(filt_sigma, rel=1e-4)
        assert out["fidelity"] == pytest.approx(0.975, abs=1e-6)
        assert out["fitted_period"] == pytest.approx(0.0949, abs=1e-4)
        assert out["beat_detected"]

    def test_no_beat(self, capsys, tmp_path):
        path = tmp_path / "flat.csv"
        write_stage_csv(path, np.random.default_rng(2).poisson(400, self.X.size).astype(float), self.X)
        out = run_json(capsys, "fit", str(path))
        assert not out["beat_detected"]

    def test_output_file_and_text(self, capsys, tmp_path):
        path = tmp_path / "c.csv"
        write_stage_csv(path, 100 * (1 - 0.5 * np.cos(FREQ.difference * Delay.from_stage_mm(self.X).delta_tau)), self.X)
        report = tmp_path / "r.json"
        assert main(["fit", str(path), "-o", str(report)]) == EXIT_OK
        assert "V = " in capsys.readouterr().out
        jsonschema.validate(json.loads(report.read_text()), FIT_SCHEMA)

    def test_missing_file(self, capsys, tmp_path):
        assert main(["fit", str(tmp_path / "none.csv")]) == EXIT_ERROR
        assert "error" in capsys.readouterr().err
