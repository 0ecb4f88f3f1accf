import json
import math

import numpy as np
import pytest

from sagnacfwm.counting import Routing, ScanResult
from sagnacfwm.records import (
    RecordError,
    beat_curve_from_csv,
    dumps,
    plot_table,
    read_csv_columns,
    scan_csv,
    wide_scan_csv,
)


def result(setting, corrected=None):
    return ScanResult(setting, 100, 90, 12, 100 * 90 / 1000, 1000, corrected)


def test_scan_csv_columns_and_round_trip(tmp_path):
    text = scan_csv([result(0.0), result(11.25)])
    lines = text.splitlines()
    assert lines[0] == "setting,singles_1,singles_2,coincidences,accidentals_est,n_gates"
    assert lines[2] == "11.25,100,90,12,9,1000"
    path = tmp_path / "s.csv"
    path.write_text(text)
    cols = read_csv_columns(path)
    assert cols["coincidences"].tolist() == [12.0, 12.0]


def test_stage_csv_prefers_corrected(tmp_path):
    path = tmp_path / "stage.csv"
    path.write_text(scan_csv([result(x, corrected=10.5 + x) for x in np.linspace(0, 1, 8)]))
    assert "coincidences_corrected" in path.read_text().splitlines()[0]
    curve = beat_curve_from_csv(path)
    assert curve.counts[0] == 10.5 and len(curve) == 8


def test_wide_csv():
    text = wide_scan_csv({Routing.DD: [result(0.0)], Routing.CD: [result(0.0)]})
    header = text.splitlines()[0].split(",")
    assert header[0] == "setting" and header[1] == "dd_singles_1" and header[-1] == "cd_n_gates"
    with pytest.raises(RecordError):
        wide_scan_csv({Routing.DD: [result(0.0)], Routing.CD: []})


@pytest.mark.parametrize(
    "content", ["", "setting,coincidences\n1,2,3\n", "setting,coincidences\n1,abc\n", "x,y\n1,2\n"]
)
def test_bad_csv(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(RecordError):
        beat_curve_from_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(RecordError):
        read_csv_columns(tmp_path / "nope.csv")


def test_json_cleaning():
    out = json.loads(dumps({"a": np.float64(1.5), "b": float("nan"), "c": 1 + 2j, "d": np.arange(2), "e": np.bool_(True)}))
    assert out == {"a": 1.5, "b": None, "c": {"re": 1.0, "im": 2.0}, "d": [0, 1], "e": True}


def test_plot_table():
    text = plot_table(["x", "y"], [[1, math.pi]])
    assert text == "# x y\n1 3.14159265359\n"
