import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from src.enums import OutputFormat
from src.output import report_writer
from src.output.report_writer import (
    ReportWriteError,
    build_body,
    meta_path,
    render_csv,
    render_json,
    write_report,
)


def make_body(**overrides):
    rows = [
        {"key": 1, "n": 1, "label": "M_1", "estimate": {"re": 1.0, "im": 0.1}, "std_error": {"re": 0.1, "im": 0.1},
         "trials": 10, "seed": 0, "bound_ratio": None, "truncation": None, "zero_count": False},
        {"label": "cascade recursion", "max_error": 1e-14, "tolerance": 1e-10, "passed": True},
    ]
    args = dict(
        experiment="mean", params={"gamma": 0.7, "beta": 0.3}, n=4, trials=10, seed=0,
        config={"b": math.inf}, rows=rows,
    )
    args.update(overrides)
    return build_body(**args)


def test_body_is_json_safe():
    body = make_body(summary={"flag": np.bool_(True), "count": np.int64(3), "value": complex(1, 2),
                              "missing": float("nan")})
    assert body["summary"] == {"flag": True, "count": 3, "value": {"re": 1.0, "im": 2.0}, "missing": "nan"}
    assert body["config"]["b"] == "inf"
    assert body["fits"] == []
    json.loads(render_json(body))


def test_render_json_is_deterministic():
    assert render_json(make_body()) == render_json(make_body())
    assert render_json(make_body()).endswith("\n")


def test_render_csv_splits_complex_columns():
    lines = render_csv(make_body()["rows"]).splitlines()
    assert lines[0].split(",") == report_writer.CSV_COLUMNS
    first = lines[1].split(",")
    assert first[2:6] == ["1.0", "0.1", "0.1", "0.1"]
    assert lines[1].endswith(",,,,1")
    assert lines[2].endswith("1e-14,1e-10,True,,,,")


def test_render_csv_fills_named_grid_column():
    rows = [{"key": 2.5, "x": 2.5, "label": "P(sup >= e^{gamma x})", "estimate": 0.01, "std_error": 0.001}]
    record = next(csv.DictReader(io.StringIO(render_csv(rows))))
    assert record["x"] == "2.5"
    assert record["l"] == ""
    assert record["n"] == ""


def test_write_report_and_meta(tmp_path):
    path = write_report(tmp_path / "nested" / "mean.json", make_body())
    assert json.loads(path.read_text())["experiment"] == "mean"
    meta = json.loads(meta_path(path).read_text())
    assert {"timestamp", "host", "python", "numpy", "app"} <= set(meta)
    assert meta_path(Path("out/run.csv")).name == "run.meta.json"


def test_write_csv_report(tmp_path):
    path = write_report(tmp_path / "mean.csv", make_body(), OutputFormat.CSV)
    assert path.read_text().startswith("key,label")


def test_transient_write_error_is_retried(tmp_path, monkeypatch):
    monkeypatch.setattr("time.sleep", lambda seconds: None)
    calls = {"count": 0}
    original = Path.write_text

    def flaky(self, *args, **kwargs):
        calls["count"] += 1
        if calls["count"] == 1:
            raise OSError("temporarily unavailable")
        return original(self, *args, **kwargs)

    monkeypatch.setattr(Path, "write_text", flaky)
    path = write_report(tmp_path / "mean.json", make_body())
    assert path.exists()
    assert calls["count"] == 3


def test_persistent_write_error_raises(tmp_path, monkeypatch):
    monkeypatch.setattr("time.sleep", lambda seconds: None)

    def broken(self, *args, **kwargs):
        raise OSError("read-only file system")

    monkeypatch.setattr(Path, "write_text", broken)
    with pytest.raises(ReportWriteError) as excinfo:
        write_report(tmp_path / "mean.json", make_body())
    assert isinstance(excinfo.value.cause, OSError)
