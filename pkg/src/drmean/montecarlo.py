"""Replicated simulation over the model-specification grid, and metrics."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DrMeanError
from .estimators import EstimatorConfig, run_estimator
from .numeric import add_intercept, fit_logistic
from .propensity import make_propensity_scores
from .scenarios import generate_sample

BOTH_CORRECT = "both_correct"
Y_CORRECT_ONLY = "y_correct_only"
PI_CORRECT_ONLY = "pi_correct_only"
BOTH_WRONG = "both_wrong"

# cell -> (outcome model sees z, propensity model sees z)
_GRID = {
    BOTH_CORRECT: (True, True),
    Y_CORRECT_ONLY: (True, False),
    PI_CORRECT_ONLY: (False, True),
    BOTH_WRONG: (False, False),
}
GRID_CELLS = tuple(_GRID)


@dataclass(frozen=True)
class GridCell:
    """Covariate views for the two working models.

    ``y_cols`` / ``pi_cols`` name columns such as ``"z2"`` or ``"x1"``;
    None means all latent (``*_latent`` True) or all observed columns.
    """

    name: str
    y_latent: bool = False
    pi_latent: bool = False
    y_cols: tuple = None
    pi_cols: tuple = None

    @classmethod
    def named(cls, name):
        if isinstance(name, GridCell):
            return name
        if name not in _GRID:
            raise ConfigError(f"unknown spec-grid cell {name!r}; expected one of {GRID_CELLS}")
        y, p = _GRID[name]
        return cls(name, y, p)


def _design(sample, latent, cols):
    if cols is None:
        return sample.design(latent)
    parts = []
    for c in cols:
        src = {"z": sample.z, "x": sample.x}.get(c[:1])
        if src is None or not c[1:].isdigit() or not 1 <= int(c[1:]) <= src.shape[1]:
            raise ConfigError(f"unknown covariate column {c!r}")
        parts.append(src[:, int(c[1:]) - 1])
    return add_intercept(np.column_stack(parts) if parts else np.empty((sample.z.shape[0], 0)))


@dataclass
class RunConfig:
    scenario: object
    n: int
    reps: int
    estimators: list
    seed: int = 0
    spec_grid: list = field(default_factory=lambda: [BOTH_WRONG])
    threads: int = 1
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        self.estimators = [
            e if isinstance(e, EstimatorConfig) else EstimatorConfig.from_name(e) for e in self.estimators
        ]
        self.spec_grid = [GridCell.named(c) for c in self.spec_grid]
        if not self.spec_grid:
            raise ConfigError("spec_grid must name at least one cell")


@dataclass
class Failure:
    rep: int
    cell: str
    estimator: str
    message: str


@dataclass
class SimulationResult:
    """``table[r, c, e]`` holds the estimate of replicate r, cell c, estimator e (NaN on failure)."""

    table: np.ndarray
    cells: list
    estimators: list
    failures: list
    mu_true: float

    def estimates(self, cell, estimator):
        c = self.cells.index(cell)
        e = self.estimators.index(estimator)
        return self.table[:, c, e]


def _replicate(config, r):
    cells = config.spec_grid
    ests = config.estimators
    row = np.full((len(cells), len(ests)), np.nan)
    failures = []
    try:
        sample = generate_sample(config.scenario, config.n, config.seed, r)
    except DrMeanError as exc:
        for cell in cells:
            for e in ests:
                failures.append(Failure(r, cell.name, e.label, f"generation: {exc}"))
        return row, failures
    for ci, cell in enumerate(cells):
        d = sample.dataset.with_design(_design(sample, cell.y_latent, cell.y_cols))
        ps = ps_error = None
        if any(e.needs_propensity for e in ests):
            try:
                fit = fit_logistic(_design(sample, cell.pi_latent, cell.pi_cols), d.t)
                ps = make_propensity_scores(fit, config.epsilon)
            except DrMeanError as exc:
                ps_error = f"propensity model: {type(exc).__name__}: {exc}"
        for ei, e in enumerate(ests):
            if e.needs_propensity and ps is None:
                failures.append(Failure(r, cell.name, e.label, ps_error))
                continue
            try:
                row[ci, ei] = run_estimator(e, d, ps).mu_hat
            except (DrMeanError, np.linalg.LinAlgError) as exc:
                failures.append(Failure(r, cell.name, e.label, f"{type(exc).__name__}: {exc}"))
    return row, failures


def run_simulation(config):
    """Run every replicate; results do not depend on thread count or order."""
    table = np.full((config.reps, len(config.spec_grid), len(config.estimators)), np.nan)
    failures = []
    reps = range(config.reps)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outs = list(pool.map(lambda r: _replicate(config, r), reps))
    else:
        outs = [_replicate(config, r) for r in reps]
    for r, (row, fails) in enumerate(outs):
        table[r] = row
        failures.extend(fails)
    return SimulationResult(
        table,
        [c.name for c in config.spec_grid],
        [e.label for e in config.estimators],
        failures,
        float(config.scenario.outcome_intercept),
    )


@dataclass
class MetricsRow:
    estimator: str
    bias: float
    pct_bias: float
    rmse: float
    mae: float
    var: float
    mse: float
    n_ok: int = 0
    n_failed: int = 0
    cell: str = ""


def compute_metrics(estimates, mu_true, mae="median", estimator=""):
    """Bias, %bias, RMSE, MAE, variance and MSE of replicate estimates.

    ``pct_bias`` is 100 |bias| / sd with the R - 1 divisor; ``mae`` is the
    median absolute error unless ``mae="mean"``. With fewer than two
    estimates, ``pct_bias`` and ``var`` are None. NaN entries count as failures.
    """
    est = np.asarray(estimates, dtype=float).ravel()
    ok = est[np.isfinite(est)]
    failed = est.size - ok.size
    if ok.size == 0:
        raise ValueError("no finite estimates")
    err = ok - mu_true
    bias = float(err.mean())
    mse = float(np.mean(err**2))
    if mae == "median":
        mae_v = float(np.median(np.abs(err)))
    elif mae == "mean":
        mae_v = float(np.mean(np.abs(err)))
    else:
        raise ValueError(f"mae must be 'median' or 'mean', got {mae!r}")
    var = pct = None
    if ok.size >= 2:
        var = float(np.var(ok, ddof=1))
        sd = np.sqrt(var)
        pct = float(100.0 * abs(bias) / sd) if sd > 0 else (0.0 if bias == 0 else float("inf"))
    return MetricsRow(estimator, bias, pct, float(np.sqrt(mse)), mae_v, var, mse, int(ok.size), int(failed))


def metrics_table(result, mae="median"):
    rows = []
    for ci, cell in enumerate(result.cells):
        for ei, est in enumerate(result.estimators):
            col = result.table[:, ci, ei]
            if not np.isfinite(col).any():
                rows.append(MetricsRow(est, None, None, None, None, None, None, 0, col.size, cell))
                continue
            row = compute_metrics(col, result.mu_true, mae, est)
            row.cell = cell
            rows.append(row)
    return rows
