"""Reading observation CSVs and writing/reading fit reports.

Observation files have a header ``y1,y2,delta[,x1,...,xd]``; an empty or
``inf`` y2 means the subject is right-censored.

A fit report is plain text: ``key = value`` lines, then blocks that start
with ``[name]`` followed by a CSV table.  Floats are written with ``repr``,
so reading a report back gives bit-identical numbers.
"""
from __future__ import annotations

import csv
import io
import math
from typing import Optional

import numpy as np

from .errors import DataError
from .model import BernsteinPHModel, Dataset, Observation

REQUIRED = ("y1", "y2", "delta")


def _number(text: str, row: int, col: str, allow_inf=False) -> float:
    t = text.strip()
    if allow_inf and t.lower() in ("", "inf", "+inf", "infinity"):
        return math.inf
    try:
        v = float(t)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if math.isnan(v):
        raise DataError(f"row {row}, column {col!r}: NaN is not allowed")
    return v


def parse_observations(text: str, tau: Optional[float] = None) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty CSV: a header row is required") from None
    if tuple(header[:3]) != REQUIRED:
        raise DataError(f"header must start with y1,y2,delta; got {','.join(header[:3])}")
    xcols = header[3:]
    for j, name in enumerate(xcols, start=1):
        if name != f"x{j}":
            raise DataError(f"covariate column {j + 3} must be named x{j}, got {name!r}")
    y1, y2, delta, x = [], [], [], []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"row {row_no}: expected {len(header)} columns, found {len(row)}")
        y1.append(_number(row[0], row_no, "y1"))
        y2.append(_number(row[1], row_no, "y2", allow_inf=True))
        d = _number(row[2], row_no, "delta")
        if d not in (0.0, 1.0):
            raise DataError(f"row {row_no}, column 'delta': must be 0 or 1, got {row[2]!r}")
        try:
            Observation(y1[-1], y2[-1], int(d))
        except DataError as exc:
            raise DataError(f"row {row_no}: {exc}") from None
        delta.append(int(d))
        x.append([_number(v, row_no, name) for v, name in zip(row[3:], xcols)])
    if not y1:
        raise DataError("CSV has a header but no observations")
    return Dataset.from_arrays(y1, y2, delta, np.array(x, dtype=float).reshape(len(y1), len(xcols)), tau)


def read_observations(path: str, tau: Optional[float] = None) -> Dataset:
    with open(path, newline="") as fh:
        return parse_observations(fh.read(), tau)


def write_observations(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(REQUIRED) + [f"x{j + 1}" for j in range(dataset.d)])
    for a, b, c, xr in zip(dataset.y1, dataset.y2, dataset.delta, dataset.x):
        w.writerow([repr(float(a)), "inf" if math.isinf(b) else repr(float(b)), int(c)] + [repr(float(v)) for v in xr])
    return buf.getvalue()


# Fit reports ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_report(header: dict, blocks: dict) -> str:
    """``blocks`` maps a name to (column names, rows)."""
    lines = [f"{k} = {_fmt(v)}" for k, v in header.items()]
    for name, (cols, rows) in blocks.items():
        lines.append("")
        lines.append(f"[{name}]")
        lines.append(",".join(cols))
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> tuple[dict, dict]:
    header: dict = {}
    blocks: dict = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            blocks[current] = []
            continue
        if current is None:
            if "=" not in line:
                raise DataError(f"malformed report header line: {raw!r}")
            k, v = line.split("=", 1)
            header[k.strip()] = v.strip()
        else:
            blocks[current].append(line.split(","))
    return header, {k: (v[0], v[1:]) if v else ([], []) for k, v in blocks.items()}


def model_from_report(text: str) -> BernsteinPHModel:
    header, blocks = parse_report(text)
    try:
        m = int(header["m"])
        has_tail = header["has_tail"] == "true"
        tau = float(header["tau"])
        p = [float(r[1]) for r in blocks["p"][1]]
        gamma = [float(r[1]) for r in blocks["gamma"][1]] if "gamma" in blocks else []
        x0 = [float(r[1]) for r in blocks["x0"][1]] if "x0" in blocks else []
    except (KeyError, IndexError, ValueError) as exc:
        raise DataError(f"report is missing or has a malformed field: {exc}") from None
    return BernsteinPHModel(m, has_tail, np.array(p), np.array(gamma), np.array(x0), tau)
