import os
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from drmean.errors import ConfigError
from drmean.estimators import Dataset
from drmean.numeric import add_intercept
from drmean.scenarios import load_scenario

ROOT = Path(__file__).resolve().parents[1]
CLASSIC_PATH = Path(os.environ.get("DRMEAN_CLASSIC_SCENARIO", ROOT / "scenarios" / "classic.toml"))

# six-unit fixture shared by the estimator and CLI oracles
SIX_X = [0, 1, 2, 3, 4, 5]
SIX_Y = [1, 3, 2, 5, 4, 6]
SIX_T = [1, 1, 0, 1, 0, 1]
SIX_PI = [0.9, 0.5, 0.8, 0.4, 0.7, 0.6]


def fraction_ols(x, y, w=None):
    """Exact weighted simple regression via the 2x2 normal equations."""
    w = [Fraction(1)] * len(x) if w is None else [Fraction(v) for v in w]
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    s0 = sum(w)
    s1 = sum(wi * xi for wi, xi in zip(w, x))
    s2 = sum(wi * xi * xi for wi, xi in zip(w, x))
    t0 = sum(wi * yi for wi, yi in zip(w, y))
    t1 = sum(wi * xi * yi for wi, xi, yi in zip(w, x, y))
    det = s0 * s2 - s1 * s1
    return (s2 * t0 - s1 * t1) / det, (s0 * t1 - s1 * t0) / det


@pytest.fixture
def six():
    y = np.array(SIX_Y, dtype=float)
    return Dataset(add_intercept(np.array(SIX_X, dtype=float)), np.array(SIX_T, dtype=float), y)


@pytest.fixture
def six_oracle():
    resp = [i for i, t in enumerate(SIX_T) if t]
    b0, b1 = fraction_ols([SIX_X[i] for i in resp], [SIX_Y[i] for i in resp])
    m = [b0 + b1 * x for x in SIX_X]
    r = {i: Fraction(SIX_Y[i]) - m[i] for i in resp}
    return {"b0": b0, "b1": b1, "m": m, "r": r, "resp": resp}


@pytest.fixture(scope="session")
def classic_spec():
    try:
        return load_scenario(CLASSIC_PATH)
    except (ConfigError, FileNotFoundError) as exc:
        pytest.skip(f"classic benchmark constants not supplied: {exc}")


# --- acceptance reporting ---------------------------------------------------

_ACCEPTANCE = []


def record_criterion(number, passed, detail):
    _ACCEPTANCE.append((number, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"criterion {number:>4}: {'PASS' if passed else 'FAIL'}  {detail}")
