import csv
import io
import json
import math

import numpy as np
import pytest

from mdlgamma import report
from mdlgamma.analysis.stats import fit_rate


def test_json_header_and_stability():
    payload = {"b": np.float64(1.5), "a": [np.int64(2), np.array([1.0, 2.0])], "flag": np.bool_(True),
               "bad": math.inf}
    text = report.to_json(payload, "demo")
    doc = json.loads(text)
    assert doc["format"] == "mdlgamma-report" and doc["version"] == 1 and doc["kind"] == "demo"
    assert doc["data"] == {"a": [2, [1.0, 2.0]], "b": 1.5, "bad": "inf", "flag": True}
    assert report.to_json(payload, "demo") == text


def test_read_json_rejects_foreign(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        report.read_json(p)
    p.write_text(json.dumps({"format": "mdlgamma-report", "version": 99}))
    with pytest.raises(ValueError):
        report.read_json(p)


def test_csv_roundtrip_exact_floats():
    rows = [{"h": 0.1, "err": 1 / 3}, {"h": 0.05, "err": 2 / 3, "extra": "x"}]
    text = report.rows_to_csv(rows)
    back = list(csv.DictReader(io.StringIO(text)))
    assert float(back[0]["err"]) == 1 / 3 and back[1]["extra"] == "x" and back[0]["extra"] == ""


def test_svg_slope_annotation():
    fit = fit_rate([0.2, 0.1, 0.05], [4e-2, 1e-2, 2.5e-3])
    svg = report.loglog_svg(fit.x, fit.y, fit.slope, fit.intercept, title="a<b")
    assert svg.startswith("<svg") and "slope = 2.000" in svg and "a&lt;b" in svg


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MDLGAMMA_OUT", str(tmp_path / "envdir"))
    assert report.output_dir() == tmp_path / "envdir"
    assert report.output_dir(tmp_path / "explicit") == tmp_path / "explicit"
