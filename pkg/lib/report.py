# lib/report.py
"""
Command reports: labeled results with their tolerances, rendered either as an aligned
table (pandas) or as stable, timestamp-free JSON so that equal seeds give equal bytes.
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from config import RESULTS_DIR
from lib.errors import ScenarioFormatError, ValidationError
from lib.scenario import encode_complex, encode_matrix

FORMATS = ("human", "json")
KINDS = ("real", "complex", "count", "flag", "text", "matrix")


@dataclass
class ReportEntry:
    label: str
    kind: str
    value: object
    tolerance: Optional[float] = None
    passed: Optional[bool] = None


@dataclass
class Report:
    command: str
    inputs: str
    seed: Optional[int] = None
    tolerances: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add(self, label, value, tolerance=None, passed=None, kind=None):
        """Appends an entry; the kind is inferred from the value when not given."""
        kind = kind or _infer_kind(value)
        if kind not in KINDS:
            raise ValidationError(f"unknown report entry kind {kind!r}")
        entry = ReportEntry(label, kind, _normalize(kind, value), tolerance, passed)
        self.results.append(entry)
        return entry

    def check(self, label, value, tolerance):
        """Adds a real residual entry that passes when value <= tolerance."""
        return self.add(label, float(value), tolerance=tolerance, passed=bool(value <= tolerance), kind="real")

    @property
    def failed(self):
        return [e for e in self.results if e.passed is False]

    def entry(self, label):
        for e in self.results:
            if e.label == label:
                return e
        raise KeyError(label)


def _infer_kind(value):
    if isinstance(value, (bool, np.bool_)):
        return "flag"
    if isinstance(value, (int, np.integer)):
        return "count"
    if isinstance(value, (float, np.floating)):
        return "real"
    if isinstance(value, (complex, np.complexfloating)):
        return "complex"
    if isinstance(value, np.ndarray):
        return "matrix"
    return "text"


def _normalize(kind, value):
    if kind == "flag":
        return bool(value)
    if kind == "count":
        return int(value)
    if kind == "real":
        return float(value)
    if kind == "complex":
        return complex(value)
    if kind == "matrix":
        return np.array(value, dtype=np.complex128)
    return str(value)


def digest_inputs(paths=(), arguments=None):
    """SHA-256 over the bytes of every input file, then the sorted argument map."""
    h = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as f:
            h.update(f.read())
    h.update(json.dumps(arguments or {}, sort_keys=True, default=str).encode("utf-8"))
    return h.hexdigest()


# --- JSON ------------------------------------------------------------------------------

def _encode_value(entry):
    if entry.kind == "real" and not np.isfinite(entry.value):
        return None
    if entry.kind == "complex":
        return encode_complex(entry.value)
    if entry.kind == "matrix":
        return encode_matrix(entry.value)
    return entry.value


def report_to_dict(report):
    return {
        "command": report.command,
        "inputs": report.inputs,
        "seed": report.seed,
        "tolerances": dict(report.tolerances),
        "results": [
            {
                "label": e.label,
                "kind": e.kind,
                "value": _encode_value(e),
                "tolerance": e.tolerance,
                "passed": e.passed,
            }
            for e in report.results
        ],
        "warnings": list(report.warnings),
    }


def report_from_dict(data):
    if not isinstance(data, dict) or "results" not in data:
        raise ScenarioFormatError("not a report object")
    report = Report(data["command"], data["inputs"], data.get("seed"), dict(data.get("tolerances", {})),
                    warnings=list(data.get("warnings", [])))
    for i, raw in enumerate(data["results"]):
        kind = raw.get("kind")
        value = raw.get("value")
        if kind == "complex":
            value = complex(value[0], value[1])
        elif kind == "matrix":
            value = np.array([[complex(x[0], x[1]) for x in row] for row in value], dtype=np.complex128)
        elif kind == "real" and value is None:
            value = float("nan")
        elif kind not in KINDS:
            raise ScenarioFormatError(f"unknown kind {kind!r}", f"results[{i}]")
        report.add(raw["label"], value, raw.get("tolerance"), raw.get("passed"), kind)
    return report


# --- human table -----------------------------------------------------------------------

def _fmt_real(x):
    return f"{x:.10g}"


def _table_row(e):
    re_part, im_part = "", ""
    if e.kind == "complex":
        re_part, im_part = _fmt_real(e.value.real), _fmt_real(e.value.imag)
    elif e.kind == "real":
        re_part = _fmt_real(e.value)
    elif e.kind == "matrix":
        re_part = f"<{e.value.shape[0]}x{e.value.shape[1]} matrix>"
    elif e.kind == "flag":
        re_part = "yes" if e.value else "no"
    else:
        re_part = str(e.value)
    status = "" if e.passed is None else ("pass" if e.passed else "FAIL")
    tolerance = "" if e.tolerance is None else f"{e.tolerance:.1e}"
    return {"quantity": e.label, "re": re_part, "im": im_part, "tolerance": tolerance, "status": status}


def render_human(report):
    lines = [f"command: {report.command}", f"inputs:  sha256:{report.inputs}"]
    if report.seed is not None:
        lines.append(f"seed:    {report.seed}")
    if report.tolerances:
        lines.append("tolerances: " + ", ".join(f"{k}={v:g}" for k, v in sorted(report.tolerances.items())))
    if report.results:
        table = pd.DataFrame([_table_row(e) for e in report.results],
                             columns=["quantity", "re", "im", "tolerance", "status"])
        lines.append("")
        lines.append(table.to_string(index=False))
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def dumps_report(report, fmt="human"):
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if fmt == "human":
        return render_human(report)
    raise ValidationError(f"unknown report format {fmt!r}; expected one of {FORMATS}", "--format")


def report_path(path):
    """A bare file name is placed under the results directory."""
    if os.path.dirname(path):
        return path
    return os.path.join(RESULTS_DIR, path)


def save_report(report, path, fmt="human"):
    text = dumps_report(report, fmt)
    path = report_path(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logging.info(f"Saved {fmt} report to {path}")
    return path


def load_report(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioFormatError(f"malformed JSON: {e}", str(path))
    return report_from_dict(data)
