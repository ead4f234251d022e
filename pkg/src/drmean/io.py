"""CSV/JSON-lines reading and writing for datasets and result tables."""
import csv
import json
import math
import re
import warnings

import numpy as np

from .errors import MalformedCsv, PresentOutcomeWarning
from .estimators import Dataset
from .numeric import add_intercept

_XCOL = re.compile(r"x(\d+)$")


def fmt(v):
    """15 significant digits; None and NaN become empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else "%.15g" % v
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(fmt(v))
    return v


def write_table(fh, columns, rows, fmt_name="csv"):
    """Write dict rows as CSV (header first) or JSON lines."""
    if fmt_name == "csv":
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
    elif fmt_name == "jsonl":
        for row in rows:
            fh.write(json.dumps({c: _json_value(row.get(c)) for c in columns}) + "\n")
    else:
        raise ValueError(f"unknown format {fmt_name!r}")


def read_dataset_csv(path):
    """Read columns x1..xp, t, y. Returns a Dataset with an intercept column.

    ``y`` must be present wherever t = 1; a value where t = 0 is ignored with
    a PresentOutcomeWarning.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedCsv(f"{path}: empty file") from None
        xcols = sorted((int(m.group(1)), i) for i, h in enumerate(header) if (m := _XCOL.match(h)))
        for need in ("t", "y"):
            if need not in header:
                raise MalformedCsv(f"{path}: missing required column {need!r}")
        if not xcols:
            raise MalformedCsv(f"{path}: no covariate columns named x1, x2, ...")
        if [k for k, _ in xcols] != list(range(1, len(xcols) + 1)):
            raise MalformedCsv(f"{path}: covariate columns must be x1..x{len(xcols)} without gaps")
        ti, yi = header.index("t"), header.index("y")
        X, t, y = [], [], []
        ignored = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedCsv(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                xs = [float(row[i]) for _, i in xcols]
            except ValueError:
                raise MalformedCsv(f"{path}: row {lineno}: non-numeric covariate") from None
            tv = row[ti].strip()
            if tv not in ("0", "1"):
                raise MalformedCsv(f"{path}: row {lineno}, column t: expected 0 or 1, got {tv!r}")
            yv = row[yi].strip()
            if tv == "1":
                if not yv:
                    raise MalformedCsv(f"{path}: row {lineno}: respondent (t=1) has no y value")
                try:
                    yval = float(yv)
                except ValueError:
                    raise MalformedCsv(f"{path}: row {lineno}, column y: not a number {yv!r}") from None
            else:
                if yv:
                    ignored += 1
                yval = np.nan
            X.append(xs)
            t.append(float(tv))
            y.append(yval)
    if not X:
        raise MalformedCsv(f"{path}: no data rows")
    if ignored:
        warnings.warn(f"{ignored} y values given for nonrespondents were ignored", PresentOutcomeWarning, stacklevel=2)
    return Dataset(add_intercept(np.array(X)), np.array(t), np.array(y))


def write_dataset_csv(fh, x, t, y):
    """Write covariates (without intercept), t and y; y is left empty where t = 0."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = x.shape[1]
    fh.write(",".join([f"x{j}" for j in range(1, p + 1)] + ["t", "y"]) + "\n")
    for i in range(x.shape[0]):
        yv = repr(float(y[i])) if t[i] == 1 else ""
        fh.write(",".join([repr(float(v)) for v in x[i]] + [str(int(t[i])), yv]) + "\n")
