"""Simulated incomplete-data scenarios with misspecified working models.

Latent covariates z are independent standard normals. The outcome is linear
in z, the response propensity is logistic in z, and the analyst sees
x = g(z) for a list of transformation expressions g. Response depends on z
only, so missingness is ignorable given x whenever g is one-to-one.
"""
import dataclasses
import itertools
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .estimators import Dataset
from .expressions import bind, eval_many, parse_expression
from .numeric import add_intercept, fit_logistic, quantiles, solve_least_squares

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# observed-covariate variant whose fourth transform mixes z3 and z4
ALTERNATIVE_X4 = "(z3+z4+20)^2"

VALIDATION_MIN_N = 1000
PI_QUANTILE_PROBS = (0.01, 0.25, 0.5, 0.75, 0.99)

# independent RNG streams within one replicate
_LATENT, _NOISE, _RESPONSE = 0, 1, 2


@dataclass
class ScenarioSpec:
    d: int
    outcome_intercept: float
    outcome_coefs: list
    noise_sd: float
    propensity_intercept: float
    propensity_coefs: list
    transforms: list = field(default_factory=list)
    observe_latent: bool = False
    reverse_roles: bool = False
    y_model_correct: bool = False
    pi_model_correct: bool = False
    name: str = "scenario"

    def __post_init__(self):
        self.outcome_coefs = [float(c) for c in self.outcome_coefs]
        self.propensity_coefs = [float(c) for c in self.propensity_coefs]
        if len(self.outcome_coefs) != self.d or len(self.propensity_coefs) != self.d:
            raise ConfigError(f"coefficient vectors must have length d = {self.d}")
        if not self.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")
        if not self.transforms and not self.observe_latent:
            raise ConfigError("transforms may be empty only when observe_latent is set")
        self.transforms = list(self.transforms)
        self.asts = [bind(parse_expression(s), self.d) for s in self.transforms]

    def replace(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        kw.update(changes)
        return ScenarioSpec(**kw)


def with_alternative_x4(spec):
    """Variant with the fourth observed covariate replaced by (z3+z4+20)^2."""
    if len(spec.transforms) < 4 or spec.d < 4:
        raise ConfigError("alternative x4 needs at least four transforms and d >= 4")
    tr = list(spec.transforms)
    tr[3] = ALTERNATIVE_X4
    return spec.replace(transforms=tr, name=f"{spec.name}+alt_x4")


def reversed_roles(spec):
    return spec.replace(reverse_roles=not spec.reverse_roles, name=f"{spec.name}+reversed")


@dataclass
class GeneratedSample:
    dataset: Dataset
    z: np.ndarray
    x: np.ndarray
    y_full: np.ndarray
    pi_true: np.ndarray
    mu_true: float

    @property
    def t(self):
        return self.dataset.t

    def design(self, correct):
        """Intercept plus z when ``correct``, else plus the observed x."""
        return add_intercept(self.z if correct else self.x)


def analytic_true_mean(spec):
    return float(spec.outcome_intercept)


def rng_stream(seed, replicate, stream):
    """Counter-based generator keyed by (seed, replicate, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def observed_covariates(spec, z):
    if spec.observe_latent:
        return z.copy()
    return np.column_stack([eval_many(a, z) for a in spec.asts])


def generate_sample(spec, n, seed, replicate=0):
    """Draw one sample of ``n`` units; deterministic in (spec, n, seed, replicate)."""
    if n < 1:
        raise ValueError("n must be positive")
    z = rng_stream(seed, replicate, _LATENT).standard_normal((n, spec.d))
    noise = rng_stream(seed, replicate, _NOISE).standard_normal(n)
    u = rng_stream(seed, replicate, _RESPONSE).random(n)
    y_full = spec.outcome_intercept + z @ np.asarray(spec.outcome_coefs) + spec.noise_sd * noise
    pi = expit(spec.propensity_intercept + z @ np.asarray(spec.propensity_coefs))
    t = (u < pi).astype(float)
    if spec.reverse_roles:
        t = 1.0 - t
        pi = 1.0 - pi
    pi = np.clip(pi, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    x = observed_covariates(spec, z)
    X = add_intercept(z if spec.y_model_correct else x)
    return GeneratedSample(Dataset(X, t, y_full), z, x, y_full, pi, analytic_true_mean(spec))


@dataclass
class ValidationReport:
    r2_y_on_x: float
    corr_lp: float
    corr_true_y: float
    corr_true_pi: float
    propensity_quantiles: dict
    monotone_check: dict

    def as_items(self):
        items = [
            ("r2_y_on_x", self.r2_y_on_x),
            ("corr_lp", self.corr_lp),
            ("corr_true_y", self.corr_true_y),
            ("corr_true_pi", self.corr_true_pi),
        ]
        items += [(f"pi_hat_q{p:g}", v) for p, v in self.propensity_quantiles.items()]
        items += [(f"monotone[{k}]", v) for k, v in self.monotone_check.items()]
        return items


def _corr(a, b):
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))


def monotone_check(spec, points=61, lattice=7):
    """Per transform: True when finite differences along every latent axis keep one sign.

    Lines run over [-3, 3] along one axis with the other coordinates on a
    coarse lattice over the same range. Heuristic only.
    """
    fine = np.linspace(-3.0, 3.0, points)
    coarse = np.linspace(-3.0, 3.0, lattice)
    result = {}
    for text, ast in zip(spec.transforms, spec.asts):
        ok = True
        for k in range(spec.d):
            others = [coarse] * (spec.d - 1)
            for rest in itertools.product(*others):
                z = np.empty((points, spec.d))
                z[:, [j for j in range(spec.d) if j != k]] = rest
                z[:, k] = fine
                diff = np.diff(eval_many(ast, z))
                if np.any(diff > 0) and np.any(diff < 0):
                    ok = False
                    break
            if not ok:
                break
        result[text] = ok
    return result


def validate_scenario(spec, n=100_000, seed=0):
    """Full-data summary of how strongly the working models are misspecified."""
    if n < VALIDATION_MIN_N:
        raise ValueError(f"validation needs n >= {VALIDATION_MIN_N}")
    s = generate_sample(spec, n, seed)
    X = add_intercept(s.x)
    yfit = solve_least_squares(X, s.y_full)
    r2 = 1.0 - np.sum(yfit.residuals**2) / np.sum((s.y_full - s.y_full.mean()) ** 2)
    pfit = fit_logistic(X, s.t)
    true_y = spec.outcome_intercept + s.z @ np.asarray(spec.outcome_coefs)
    true_eta = spec.propensity_intercept + s.z @ np.asarray(spec.propensity_coefs)
    if spec.reverse_roles:
        true_eta = -true_eta
    q = quantiles(pfit.probabilities, PI_QUANTILE_PROBS)
    return ValidationReport(
        r2_y_on_x=float(np.clip(r2, 0.0, 1.0)),
        corr_lp=_corr(yfit.fitted, pfit.linear_predictors),
        corr_true_y=_corr(yfit.fitted, true_y),
        corr_true_pi=_corr(pfit.linear_predictors, true_eta),
        propensity_quantiles=dict(zip(PI_QUANTILE_PROBS, map(float, q))),
        monotone_check=monotone_check(spec),
    )


# --- configuration files -------------------------------------------------

_NUMERIC = ("noise_sd", "outcome.intercept", "propensity.intercept")


def _placeholders(raw):
    bad = []
    for key in _NUMERIC:
        sect, _, leaf = key.rpartition(".")
        val = raw.get(sect, {}).get(leaf) if sect else raw.get(leaf)
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            bad.append(key)
    for sect in ("outcome", "propensity"):
        coefs = raw.get(sect, {}).get("coefs")
        if not isinstance(coefs, list) or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in coefs
        ):
            bad.append(f"{sect}.coefs")
    return bad


def scenario_from_dict(raw):
    bad = _placeholders(raw)
    if bad:
        raise ConfigError(
            "scenario constants missing or still placeholders: " + ", ".join(bad)
        )
    try:
        return ScenarioSpec(
            d=int(raw["d"]),
            outcome_intercept=float(raw["outcome"]["intercept"]),
            outcome_coefs=raw["outcome"]["coefs"],
            noise_sd=float(raw["noise_sd"]),
            propensity_intercept=float(raw["propensity"]["intercept"]),
            propensity_coefs=raw["propensity"]["coefs"],
            transforms=raw.get("transforms", {}).get("x", []),
            observe_latent=bool(raw.get("observe_latent", False)),
            reverse_roles=bool(raw.get("reverse_roles", False)),
            y_model_correct=bool(raw.get("y_model_correct", False)),
            pi_model_correct=bool(raw.get("pi_model_correct", False)),
            name=str(raw.get("name", "scenario")),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario file lacks required key {exc}") from None


def load_scenario(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(raw)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(float(v)) if isinstance(v, float) else str(v)


def dump_scenario(spec):
    """TOML text that ``load_scenario`` reads back into an equal spec."""
    top = ["name", "d", "noise_sd", "observe_latent", "reverse_roles", "y_model_correct", "pi_model_correct"]
    lines = [f"{k} = {_toml_value(getattr(spec, k))}" for k in top]
    lines += [
        "",
        "[outcome]",
        f"intercept = {_toml_value(float(spec.outcome_intercept))}",
        f"coefs = {_toml_value(spec.outcome_coefs)}",
        "",
        "[propensity]",
        f"intercept = {_toml_value(float(spec.propensity_intercept))}",
        f"coefs = {_toml_value(spec.propensity_coefs)}",
        "",
        "[transforms]",
        f"x = {_toml_value(spec.transforms)}",
    ]
    return "\n".join(lines) + "\n"
