"""INI run configuration (stdlib :mod:`configparser`).

Sections and keys (all optional unless marked)::

    [problem]
    omega_bar = sqrt2            ; preset name or comma separated floats
    gamma0 =                     ; default: measured at order 20
    epsilon = 1e-3
    lambda = 1.0
    forcing = cos_phi_cos_x      ; preset name, or a path to a JSON function
    d = 1

    [numerics]
    box = 16, 16                 ; (Lphi, Lx)
    N0 = 8
    max_steps = 8
    tol = 1e-9

    [exponents]                  ; any subset of tau, delta, kappa1, kappa2,
                                 ; kappa3, s0, s1, S, sigma
    [scan]
    lambda_min = 0.5
    lambda_max = 1.5
    n_lambda = 200
    N_list = 4, 8
    epsilons =                   ; default: [problem] epsilon
    tau1 = 2.0 ; tau0 = 1.0 ; tilde_coeff = 2 ; theta_factor = 10
    j0_report = 1 ; box = 8, 8 ; check_G0 = true

    [diagnose]
    lambda =  ; theta = 0 ; N = 4 ; j0 = 1 ; Gamma = 2 ; C1 = 2 ; tau1 = 2

    [run]
    threads = 1
    seed = 0
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

from . import __version__
from .diophantine import PRESETS, FrequencyData
from .errors import ConfigError, KirchhoffError
from .fourier import TorusFunction
from .kirchhoff import FORCING_PRESETS, ProblemData, forcing_preset
from .nash_moser import ExponentSet


def _floats(text, what):
    try:
        return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma separated numbers, got {text!r}") from None


def _ints(text, what):
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{what}: expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _bool(text, what):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    omega_bar: str = "sqrt2"
    gamma0: float | None = None
    epsilon: float = 1e-3
    lam: float = 1.0
    forcing: str = "cos_phi_cos_x"
    d: int = 1
    box: tuple = (16, 16)
    N0: int = 8
    max_steps: int = 8
    tol: float = 1e-9
    exponents: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    diagnose: dict = field(default_factory=dict)
    threads: int = 1
    seed: int = 0
    base_dir: str = "."

    # -- derived objects --------------------------------------------------
    def frequency(self):
        name = self.omega_bar.strip()
        try:
            if name in PRESETS:
                return FrequencyData.preset(name, self.gamma0)
            w = _floats(name, "problem.omega_bar")
            if not w:
                raise ConfigError(f"problem.omega_bar: unknown preset {name!r}")
            return FrequencyData(w, self.gamma0 if self.gamma0 is not None else 1.0)
        except KirchhoffError as e:
            raise ConfigError(f"problem.omega_bar: {e}") from None

    def forcing_function(self, nu):
        name = self.forcing.strip()
        if name in FORCING_PRESETS:
            return forcing_preset(name, nu, self.d)
        path = os.path.join(self.base_dir, name)
        if not os.path.exists(path):
            raise ConfigError(f"problem.forcing: unknown preset or missing file {name!r}")
        with open(path) as fh:
            try:
                return TorusFunction.from_json(fh.read())
            except (ValueError, KeyError) as e:
                raise ConfigError(f"problem.forcing: cannot read {path}: {e}") from None

    def problem(self, epsilon=None):
        fd = self.frequency()
        try:
            return ProblemData(fd, self.epsilon if epsilon is None else epsilon,
                               self.forcing_function(fd.nu))
        except KirchhoffError as e:
            raise ConfigError(f"problem: {e}") from None

    def exponent_set(self, nu):
        base = ExponentSet.greedy(nu, self.d).to_dict()
        unknown = set(self.exponents) - set(base)
        if unknown:
            raise ConfigError(f"exponents: unknown key(s) {sorted(unknown)}")
        base.update(self.exponents)
        return ExponentSet(**base)

    def canonical(self):
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}
        out["box"] = list(self.box)
        return out

    def hash(self):
        text = json.dumps(self.canonical(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()

    def stamp(self):
        return {"config_hash": self.hash(), "version": __version__}


_PROBLEM = {"omega_bar": str, "gamma0": float, "epsilon": float, "lambda": float,
            "forcing": str, "d": int}
_NUMERICS = {"box": "ints", "N0": int, "max_steps": int, "tol": float}
_EXPONENTS = ("tau", "delta", "kappa1", "kappa2", "kappa3", "s0", "s1", "S", "sigma")
_SCAN = {"lambda_min": float, "lambda_max": float, "n_lambda": int, "N_list": "ints",
         "epsilons": "floats", "tau1": float, "tau0": float, "tilde_coeff": int,
         "theta_factor": float, "j0_report": "ints", "box": "ints", "check_G0": bool,
         "N_bar": int, "solver_N0": int, "max_steps": int, "tol": float}
_DIAGNOSE = {"lambda": float, "theta": float, "N": int, "j0": "ints", "Gamma": int,
             "C1": float, "tau1": float}
_RUN = {"threads": int, "seed": int}


def _convert(section, key, raw, kind):
    what = f"{section}.{key}"
    if kind == "ints":
        return _ints(raw, what)
    if kind == "floats":
        return _floats(raw, what)
    if kind is bool:
        return _bool(raw, what)
    try:
        return kind(raw.strip()) if kind is not str else raw.strip()
    except ValueError:
        raise ConfigError(f"{what}: cannot parse {raw!r} as {kind.__name__}") from None


def _section(cp, name, spec):
    out = {}
    if not cp.has_section(name):
        return out
    # configparser lower-cases keys; map back to the canonical spelling
    canon = {k.lower(): k for k in spec}
    for key, raw in cp.items(name):
        if key not in canon:
            raise ConfigError(f"{name}.{key}: unknown key")
        k = canon[key]
        if raw.strip() == "":
            continue
        out[k] = _convert(name, k, raw, spec[k])
    return out


def parse_config(text, base_dir="."):
    """Parse INI text into a :class:`RunConfig` (raises :class:`ConfigError`)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    known = {"problem", "numerics", "exponents", "scan", "diagnose", "run"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s) {sorted(extra)}")
    cfg = RunConfig(base_dir=base_dir)
    p = _section(cp, "problem", _PROBLEM)
    for k, v in p.items():
        setattr(cfg, "lam" if k == "lambda" else k, v)
    n = _section(cp, "numerics", _NUMERICS)
    for k, v in n.items():
        setattr(cfg, k, v)
    if len(cfg.box) != 2:
        raise ConfigError("numerics.box: expected two integers (Lphi, Lx)")
    cfg.exponents = _section(cp, "exponents", {k: float for k in _EXPONENTS})
    cfg.scan = _section(cp, "scan", _SCAN)
    cfg.diagnose = _section(cp, "diagnose", _DIAGNOSE)
    for k, v in _section(cp, "run", _RUN).items():
        setattr(cfg, k, v)
    if cfg.epsilon < 0:
        raise ConfigError("problem.epsilon: must be non-negative")
    if cfg.d < 1:
        raise ConfigError("problem.d: must be >= 1")
    return cfg


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


__all__ = ["RunConfig", "parse_config", "load_config"]
