"""Versioned run reports, plot data, trace streams and reference comparison.

A report is a JSON document::

    {"schema": "mqkansa.report/1",
     "columns": ["c", "RMS", "RMSbdy", "COND", "residual", "solve_seconds", "error"],
     "rows": [["8.0e+16", "3.6e-148", ...], ...],
     "summary": {...}}

Every number is decimal scientific notation text; missing values are
``null``.  A CSV copy of the table is written next to it for spreadsheets.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .precision import log10_abs, parse_decimal, PrecisionContext

SCHEMA = "mqkansa.report/1"
SUPPORTED_SCHEMAS = (SCHEMA,)
COLUMNS = ("c", "RMS", "RMSbdy", "COND", "residual", "solve_seconds", "error")
NUMERIC = ("c", "RMS", "RMSbdy", "COND", "residual", "solve_seconds")

DEFAULT_TOLERANCES = {"RMS": 2.0, "RMSbdy": 2.0, "COND": 3.0}

# log10 distance under which two c values count as the same row
_C_MATCH = 1e-9


class SchemaError(ValueError):
    """The report or reference does not follow a supported schema."""


def format_seconds(t: float) -> str:
    return f"{t:.6e}"


def record_row(rec) -> list:
    """Report row for a :class:`~mqkansa.search.SweepRecord`."""
    def dec(x):
        return None if x is None else x.to_decimal()
    return [rec.c.to_decimal(), dec(rec.rms), dec(rec.rms_boundary), dec(rec.cond),
            dec(rec.residual), format_seconds(rec.solve_seconds), rec.error]


def build_report(records: Sequence, summary: dict | None = None) -> dict:
    return {"schema": SCHEMA, "columns": list(COLUMNS),
            "rows": [record_row(r) for r in records], "summary": summary or {}}


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_report(report: dict, path: str) -> None:
    """``path`` (JSON) plus a CSV table with the same stem."""
    _atomic_write(path, json.dumps(report, indent=1) + "\n")
    stem = os.path.splitext(path)[0]
    with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(report["columns"])
        for row in report["rows"]:
            w.writerow(["" if v is None else v for v in row])


def load_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not JSON ({exc})") from None
    check_schema(data, path)
    return data


def check_schema(data, where: str = "report") -> None:
    if not isinstance(data, dict) or "schema" not in data:
        raise SchemaError(f"{where}: missing 'schema'")
    if data["schema"] not in SUPPORTED_SCHEMAS:
        raise SchemaError(f"{where}: unsupported schema {data['schema']!r}; "
                          f"expected one of {', '.join(SUPPORTED_SCHEMAS)}")
    cols = data.get("columns")
    if not isinstance(cols, list) or "c" not in cols:
        raise SchemaError(f"{where}: 'columns' must be a list containing 'c'")
    unknown = [c for c in cols if c not in COLUMNS]
    if unknown:
        raise SchemaError(f"{where}: unknown columns {unknown}")
    rows = data.get("rows")
    if not isinstance(rows, list) or any(not isinstance(r, list) or len(r) != len(cols) for r in rows):
        raise SchemaError(f"{where}: every row must be a list of {len(cols)} cells")


def _log10_cell(text) -> float | None:
    if text is None or text == "":
        return None
    # parse exactly: values like 1e-700 underflow a double
    ctx = PrecisionContext(50)
    return log10_abs(parse_decimal(str(text), ctx))


def plot_rows(records: Iterable) -> list[tuple[str, str, str]]:
    """(log10 c, log10 RMS, log10 RMSbdy) per successful record, as decimal text."""
    out = []
    for r in records:
        if not r.ok:
            continue
        out.append((f"{r.c.log10():.6f}", f"{r.rms.log10():.6f}", f"{r.rms_boundary.log10():.6f}"))
    return out


def write_plot_data(records: Iterable, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["log10_c", "log10_RMS", "log10_RMSbdy"])
        w.writerows(plot_rows(records))


class TraceWriter:
    """Append-only JSON-lines stream, one record per solve, flushed immediately."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self.count = 0

    def __call__(self, rec) -> None:
        self.count += 1
        entry = {"seq": self.count, **rec.to_dict()}
        self._fh.write(json.dumps(entry) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class CellResult:
    c: str
    column: str
    reported: str | None
    reference: str
    delta: float | None
    tolerance: float
    ok: bool

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        d = "missing" if self.delta is None else f"{self.delta:.3f}"
        return (f"{status} c={_short(self.c)} {self.column}: reported={_short(self.reported)} "
                f"reference={_short(self.reference)} |dlog10|={d} tol={self.tolerance:g}")


def _short(text) -> str:
    if text is None:
        return "-"
    lg = _log10_cell(text)
    if lg is None or not math.isfinite(lg):
        return str(text)
    e = math.floor(lg)
    return f"{10 ** (lg - e):.4g}e{e:+d}"


def _rows_by_c(data: dict) -> list[tuple[float, dict]]:
    cols = data["columns"]
    out = []
    for row in data["rows"]:
        cells = dict(zip(cols, row))
        out.append((_log10_cell(cells["c"]), cells))
    return out


def verify(report: dict, reference: dict, tolerances: dict | None = None) -> list[CellResult]:
    """Compare every reference cell with the report in log10 space.

    A reference row whose c is absent from the report fails every column it
    carries.  Report rows without a reference counterpart are ignored.
    """
    check_schema(report, "report")
    check_schema(reference, "reference")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    got = _rows_by_c(report)
    results = []
    for lc, ref in _rows_by_c(reference):
        match = next((cells for lg, cells in got if abs(lg - lc) <= _C_MATCH), None)
        for col in ("RMS", "RMSbdy", "COND"):
            if ref.get(col) is None:
                continue
            reported = None if match is None else match.get(col)
            if reported is None:
                results.append(CellResult(ref["c"], col, None, ref[col], None, tol[col], False))
                continue
            delta = abs(_log10_cell(reported) - _log10_cell(ref[col]))
            results.append(CellResult(ref["c"], col, reported, ref[col], delta, tol[col],
                                      delta <= tol[col]))
    return results
