"""Run configuration: a flat-sectioned TOML document.

Example::

    [model]
    beta = 1e-5
    gamma = 0.1
    mu = 1e-4
    sigma = 9e-5
    N = 1000

    [incidence]
    family = "h1"
    kappa = 1.0
    alpha = 0.01

    [ensemble]
    x0 = 10
    t_end = 2000
    n_trajectories = 500

    [output]
    dir = "out"
    formats = ["csv", "json"]

``incidence = { family = "h1", kappa = 1, alpha = 0.01 }`` at top level is
equivalent to the ``[incidence]`` section.  Exactly one experiment section
(classify, xi, lyapunov, simulate, ensemble, stationary) is allowed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .errors import ConfigError, ParameterDomainError
from .incidence import make_incidence
from .model import ModelParams
from .sim import DEFAULT_CLAMP_EPS, DEFAULT_DT, Scheme

REQUIRED = object()


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


# semantic type -> (checker, description)
_TYPES = {
    "positive real": (lambda v: _is_real(v) and v > 0, "a positive real number"),
    "non-negative real": (lambda v: _is_real(v) and v >= 0, "a non-negative real number"),
    "count": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1,
              "a positive integer"),
    "non-negative count": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
                           "a non-negative integer"),
    "seed": (lambda v: isinstance(v, int) and not isinstance(v, bool) and 0 <= v < 2 ** 64,
             "an unsigned 64-bit integer"),
    "string": (lambda v: isinstance(v, str), "a string"),
    "bool": (lambda v: isinstance(v, bool), "true or false"),
    "formats": (lambda v: isinstance(v, list) and v and all(x in ("csv", "json") for x in v),
                'a non-empty list drawn from ["csv", "json"]'),
    "scheme": (lambda v: isinstance(v, str) and v.lower() in
               ("euler_maruyama", "em", "milstein", "rk4"), '"euler_maruyama", "milstein" or "rk4"'),
    "family": (lambda v: v in ("h1", "h2"), '"h1" or "h2"'),
    "optional real": (lambda v: _is_real(v), "a finite real number"),
}

MODEL_SCHEMA = {
    "beta": ("positive real", REQUIRED),
    "gamma": ("non-negative real", REQUIRED),
    "mu": ("non-negative real", REQUIRED),
    "sigma": ("non-negative real", REQUIRED),
    "N": ("positive real", REQUIRED),
}

INCIDENCE_SCHEMA = {
    "family": ("family", REQUIRED),
    "kappa": ("positive real", None),
    "alpha": ("positive real", None),
}

OUTPUT_SCHEMA = {
    "dir": ("string", "out"),
    "formats": ("formats", ["csv", "json"]),
}

_PATH = {
    "x0": ("positive real", REQUIRED),
    "t_end": ("positive real", REQUIRED),
    "dt": ("positive real", DEFAULT_DT),
    "scheme": ("scheme", "euler_maruyama"),
    "clamp_eps": ("non-negative real", DEFAULT_CLAMP_EPS),
    "record_every": ("count", 1),
}

_ENSEMBLE = dict(_PATH, **{
    "n_trajectories": ("count", 100),
    "master_seed": ("seed", 0),
    "burn_in": ("non-negative real", 0.0),
    "histogram_bins": ("count", 100),
    "extinction_threshold": ("positive real", 1e-6),
    "crossing_level": ("optional real", None),
    "hit_a": ("optional real", None),
    "hit_b": ("optional real", None),
    "save_trajectories": ("non-negative count", 0),
})

EXPERIMENTS = {
    "classify": {"n_grid": ("count", 10_000)},
    "xi": {"n_grid": ("count", 10_000)},
    "lyapunov": {"n_grid": ("count", 1000)},
    "simulate": dict(_PATH, **{
        "seed": ("seed", 0),
        "n_paths": ("count", 1),
        "ode": ("bool", False),
    }),
    "ensemble": _ENSEMBLE,
    # burn_in default for stationary runs is 10% of t_end
    "stationary": dict(_ENSEMBLE, burn_in=("non-negative real", None)),
}


def _validate_section(name, data, schema):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
    out = {}
    for key, (kind, default) in schema.items():
        if key not in data:
            if default is REQUIRED:
                raise ConfigError(f"missing required key {key!r} in [{name}]")
            out[key] = default
            continue
        value = data[key]
        check, desc = _TYPES[kind]
        if not check(value):
            raise ConfigError(f"{name}.{key}: expected {desc}, got {value!r}")
        out[key] = float(value) if kind.endswith("real") else value
    return out


@dataclass
class RunConfig:
    model: dict
    incidence: dict
    experiment: str
    settings: dict
    output_dir: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])

    @property
    def params(self):
        return ModelParams(**self.model)

    def incidence_function(self):
        return make_incidence(self.incidence["family"], self.incidence["kappa"],
                              self.incidence["alpha"])

    def resolved(self):
        """Everything that determines the results (the output location excluded)."""
        return {
            "model": dict(self.model),
            "incidence": dict(self.incidence),
            self.experiment: {k: v for k, v in self.settings.items() if v is not None},
            "output": {"formats": list(self.formats)},
        }

    def to_toml(self):
        return tomli_w.dumps(self.resolved())


def _apply_defaults(cfg):
    s = cfg.settings
    if cfg.experiment == "stationary" and s.get("burn_in") is None:
        s["burn_in"] = 0.1 * s["t_end"]
    f = cfg.incidence_function()
    cfg.incidence["kappa"] = f.kappa
    cfg.incidence["alpha"] = f.alpha
    if "t_end" in s and not s["dt"] < s["t_end"]:
        raise ConfigError(f"{cfg.experiment}.dt must be smaller than t_end")
    if cfg.experiment in ("ensemble", "stationary"):
        if not s["burn_in"] < s["t_end"]:
            raise ConfigError(f"{cfg.experiment}.burn_in must be smaller than t_end")
        if (s["hit_a"] is None) != (s["hit_b"] is None):
            raise ConfigError(f"{cfg.experiment}: hit_a and hit_b must be given together")
        if s["scheme"].lower() == "rk4":
            raise ConfigError(f"{cfg.experiment}.scheme: ensembles need a stochastic scheme")
        if not s["extinction_threshold"] < 1:
            raise ConfigError(f"{cfg.experiment}.extinction_threshold: expected a fraction of N below 1")
    if "scheme" in s:
        s["scheme"] = Scheme.parse(s["scheme"]).value
    if "x0" in s and not 0 < s["x0"] < cfg.model["N"]:
        raise ConfigError(f"{cfg.experiment}.x0 must lie in (0, N)")


def parse_config(text, experiment=None):
    """Parse and validate a config document.

    ``experiment`` names the experiment the caller intends to run.  When the
    document has no experiment section one with all defaults is created for
    it; when it has a different one a :class:`ConfigError` is raised.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    allowed = {"model", "incidence", "output"} | set(EXPERIMENTS)
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} at top level")
    if "model" not in data:
        raise ConfigError("missing required section [model]")
    if "incidence" not in data:
        raise ConfigError("missing required section [incidence]")
    model = _validate_section("model", data["model"], MODEL_SCHEMA)
    if model["gamma"] + model["mu"] <= 0:
        raise ConfigError("model.gamma + model.mu must be positive")
    inc = _validate_section("incidence", data["incidence"], INCIDENCE_SCHEMA)
    out = _validate_section("output", data.get("output", {}), OUTPUT_SCHEMA)

    blocks = [k for k in data if k in EXPERIMENTS]
    if len(blocks) > 1:
        raise ConfigError(f"exactly one experiment section allowed, found {blocks}")
    if blocks:
        name = blocks[0]
        if experiment is not None and name != experiment:
            raise ConfigError(f"config defines experiment [{name}] but {experiment!r} was requested")
        raw = data[name]
    elif experiment is not None:
        name, raw = experiment, {}
    else:
        raise ConfigError("config has no experiment section")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    settings = _validate_section(name, raw, EXPERIMENTS[name])
    cfg = RunConfig(model, inc, name, settings, out["dir"], list(out["formats"]))
    try:
        cfg.params  # positivity and consistency checks
        _apply_defaults(cfg)
    except ParameterDomainError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path, experiment=None):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8: {exc}") from exc
    return parse_config(text, experiment)
