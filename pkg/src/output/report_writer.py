"""
Report persistence: a deterministic JSON body, a CSV mirror of its rows
and a ``<name>.meta.json`` sidecar with the non-deterministic run metadata.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from datetime import datetime, timezone

UTC = timezone.utc
from pathlib import Path
from typing import Any, Dict, List, Optional

import backoff
import numpy as np

from src.config import Config
from src.enums import OutputFormat

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "key", "label", "estimate_re", "estimate_im", "std_error_re", "std_error_im",
    "trials", "seed", "bound_ratio", "truncation", "zero_count",
    "max_error", "tolerance", "passed", "extra", "x", "l", "n",
]


class ReportWriteError(RuntimeError):
    """Raised when a report cannot be written after all retries."""

    def __init__(self, path: Path, cause: Exception) -> None:
        super().__init__(f"failed to write report {path}: {cause}")
        self.path = path
        self.cause = cause


def _jsonable(value: Any) -> Any:
    """Make numpy scalars, complex numbers and non-finite floats JSON safe."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def build_body(
    experiment: str,
    params: Dict[str, float],
    n: int,
    trials: int,
    seed: int,
    config: Dict[str, Any],
    rows: List[Dict[str, Any]],
    fits: Optional[List[Dict[str, Any]]] = None,
    summary: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    return _jsonable({
        "experiment": experiment,
        "params": params,
        "n": n,
        "trials": trials,
        "seed": seed,
        "config": config,
        "rows": rows,
        "fits": fits or [],
        "summary": summary or {},
    })


def render_json(body: Dict[str, Any]) -> str:
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _split(value: Any):
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return value["re"], value["im"]
    return value, ""


def render_csv(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        estimate_re, estimate_im = _split(row.get("estimate", ""))
        se_re, se_im = _split(row.get("std_error", ""))
        writer.writerow({
            "key": row.get("key", ""),
            "label": row.get("label", ""),
            "estimate_re": estimate_re,
            "estimate_im": estimate_im,
            "std_error_re": se_re,
            "std_error_im": se_im,
            "trials": row.get("trials", ""),
            "seed": row.get("seed", ""),
            "bound_ratio": "" if row.get("bound_ratio") is None else row["bound_ratio"],
            "truncation": row.get("truncation") or "",
            "zero_count": row.get("zero_count", ""),
            "max_error": row.get("max_error", ""),
            "tolerance": row.get("tolerance", ""),
            "passed": row.get("passed", ""),
            "extra": json.dumps(row["extra"], sort_keys=True) if row.get("extra") else "",
            "x": row.get("x", ""),
            "l": row.get("l", ""),
            "n": row.get("n", ""),
        })
    return buffer.getvalue()


def build_meta() -> Dict[str, Any]:
    return {
        "timestamp": datetime.now(UTC).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "host": platform.node(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "app": Config.APPNAME,
    }


@backoff.on_exception(backoff.expo, OSError, max_tries=Config.MAX_RETRIES)
def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def meta_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.meta.json")


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    """Write a JSON-safe rendering of ``payload`` with the report retries."""
    path = Path(path)
    try:
        _write_text(path, render_json(_jsonable(payload)))
    except OSError as exc:
        logger.error("❌ Could not write %s: %s", path, exc)
        raise ReportWriteError(path, exc) from exc
    return path


def write_report(path: Path, body: Dict[str, Any], fmt: OutputFormat = OutputFormat.JSON) -> Path:
    """
    Write the body in ``fmt`` plus the metadata sidecar; I/O errors are
    retried and finally surfaced as :class:`ReportWriteError`.
    """
    path = Path(path)
    text = render_json(body) if fmt is OutputFormat.JSON else render_csv(body["rows"])
    try:
        _write_text(path, text)
        _write_text(meta_path(path), render_json(build_meta()))
    except OSError as exc:
        logger.error("❌ Could not write report %s: %s", path, exc)
        raise ReportWriteError(path, exc) from exc
    logger.info("📝 Report written to %s", path)
    return path
