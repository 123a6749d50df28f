"""INI experiment configs and their translation into runnable experiments.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``;``
and ``#`` start comments; lists are whitespace separated. Sections and
keys (defaults in brackets):

``[experiment]``
    name, T, x_lo, x_hi, window (two numbers), t_report [T], seed [0]
``[grid]``
    family (uniform | staggered | local_timestep | moving | perturbed),
    h (one or more, halving), lambda [0.5], dt_rule (lambda | half | cube)
    [lambda], region, r (local_timestep), velocity (``sine A`` or
    ``tapered V``, moving), remap_time, remap_ratio (new cell width / h),
    remap_jitter (fraction of a new cell; optional remap layer), jitter, angle (perturbed)
``[model]``
    name (burgers | advection | trivial | selfsimilar), c, d, base, lower, upper
``[initial]``
    type (riemann | indicator | piecewise_constant); left, right, x0;
    a, b, value; breaks, values, outside [0]
``[scheme]``
    name, alpha, reconstruction, fault (none | bias), bias
``[reference]``
    type (none | burgers_shock | burgers_rarefaction | advection |
    trivial_indicator), smoothed (true: also report the Gaussian reference)
``[verify]``
    battery (default | none), focus, entropy_a, quad_refine, march (full | streaming)
``[assert]``
    min_rate, max_final_l1, min_final_l1, l1_nondecreasing, weak_decreasing,
    max_balance, max_mass_drift, max_smoothed_l1, flux_properties
"""

import configparser
from dataclasses import dataclass, field
import math
import re

import numpy as np

from .grid import (build_local_timestep_grid, build_moving_vertex_grid, build_perturbed_grid,
                   build_staggered_grid, build_uniform_grid, insert_remap_layer)
from .initial import InitialData
from .models import model_from_name
from .numerics import BiasedFlux, build_scheme
from .verify import (Experiment, default_battery, exact_reference, smoothed_reference,
                     streaming_counterexample)

KEYS = {
    "experiment": {"name", "t", "x_lo", "x_hi", "window", "t_report", "seed"},
    "grid": {"family", "h", "lambda", "dt_rule", "region", "r", "velocity", "remap_time",
             "remap_ratio", "remap_jitter", "jitter", "angle"},
    "model": {"name", "c", "d", "base", "lower", "upper"},
    "initial": {"type", "left", "right", "x0", "a", "b", "value", "breaks", "values", "outside"},
    "scheme": {"name", "alpha", "reconstruction", "fault", "bias"},
    "reference": {"type", "smoothed"},
    "verify": {"battery", "focus", "entropy_a", "quad_refine", "march"},
    "assert": {"min_rate", "max_final_l1", "min_final_l1", "l1_nondecreasing", "weak_decreasing",
               "max_balance", "max_mass_drift", "max_smoothed_l1", "flux_properties"},
}
FAMILIES = ("uniform", "staggered", "local_timestep", "moving", "perturbed")
DT_RULES = ("lambda", "half", "cube")


class ConfigError(ValueError):
    """Invalid config; the message carries the file, line and column when known."""


@dataclass
class ExperimentConfig:
    """Parsed experiment description; ``sections`` keeps the raw key/value maps."""

    name: str
    path: str
    sections: dict
    lines: dict = field(default_factory=dict)
    seed: int = 0

    def raw(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def where(self, section, key):
        ln = self.lines.get((section, key))
        return f"{self.path}:{ln[0]}:{ln[1]}" if ln else f"{self.path} [{section}]"

    def _fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: {section}.{key}: {msg}")

    def get(self, section, key, default=None, required=False):
        v = self.raw(section, key)
        if v is None:
            if required:
                raise ConfigError(f"{self.path}: missing required key {section}.{key}")
            return default
        return v

    def float(self, section, key, default=None, required=False):
        v = self.get(section, key, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            self._fail(section, key, f"expected a number, got {v!r}")

    def int(self, section, key, default=None, required=False):
        v = self.get(section, key, None, required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            self._fail(section, key, f"expected an integer, got {v!r}")

    def floats(self, section, key, default=None, required=False):
        v = self.get(section, key, None, required)
        if v is None:
            return default
        try:
            return [float(t) for t in v.split()]
        except ValueError:
            self._fail(section, key, f"expected numbers, got {v!r}")

    def bool(self, section, key, default=False):
        v = self.get(section, key)
        if v is None:
            return default
        s = v.strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        self._fail(section, key, f"expected true/false, got {v!r}")

    def choice(self, section, key, options, default=None):
        v = self.get(section, key, default, required=default is None)
        if v not in options:
            self._fail(section, key, f"{v!r} is not one of {', '.join(options)}")
        return v


def _key_positions(text):
    """(section, key) -> (line, column) of every key in an INI text."""
    pos, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"(\s*)([^=:;#\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            pos[(section, m.group(2).strip().lower())] = (n, len(m.group(1)) + 1)
    return pos


def parse_config(text, path="<config>"):
    """Parse INI text into an ExperimentConfig (syntax errors name the line)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as e:
        ln = getattr(e, "lineno", None)
        if ln is None and getattr(e, "errors", None):
            ln = e.errors[0][0]
        where = f"{path}:{ln}:1" if ln else path
        raise ConfigError(f"{where}: {e.message if hasattr(e, 'message') else e}") from None
    sections = {s: dict(cp[s]) for s in cp.sections()}
    cfg = ExperimentConfig(name="", path=path, sections=sections, lines=_key_positions(text))
    cfg.name = cfg.get("experiment", "name", required=True)
    cfg.seed = cfg.int("experiment", "seed", 0)
    validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror}") from None
    return parse_config(text, str(path))


def validate(cfg):
    """Check that every section and key is known, names resolve and h values halve."""
    for section, keys in cfg.sections.items():
        if section not in KEYS:
            raise ConfigError(f"{cfg.path}: unknown section [{section}]; "
                              f"expected one of {', '.join(KEYS)}")
        for key in keys:
            if key not in KEYS[section]:
                cfg._fail(section, key, "unknown key")
    cfg.choice("grid", "family", FAMILIES)
    cfg.choice("grid", "dt_rule", DT_RULES, "lambda")
    hs = cfg.floats("grid", "h", required=True)
    if not hs:
        cfg._fail("grid", "h", "needs at least one value")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        cfg._fail("grid", "h", "values must decrease strictly")
    for s, k in (("experiment", "T"), ("experiment", "x_lo"), ("experiment", "x_hi")):
        cfg.float(s, k.lower(), required=True)
    w = cfg.floats("experiment", "window", required=True)
    if len(w) != 2 or not w[0] < w[1]:
        cfg._fail("experiment", "window", "needs two increasing numbers")
    build_model(cfg)
    build_initial(cfg)
    cfg.choice("scheme", "name", ("lax_friedrichs", "staggered_lax_friedrichs",
                                  "spacetime_lax_friedrichs"))
    cfg.choice("scheme", "fault", ("none", "bias"), "none")
    cfg.choice("reference", "type", ("none", "burgers_shock", "burgers_rarefaction",
                                     "advection", "trivial_indicator"), "none")
    cfg.choice("verify", "battery", ("default", "none"), "default")
    cfg.choice("verify", "march", ("full", "streaming"), "full")


def build_model(cfg):
    name = cfg.get("model", "name", required=True)
    params = {}
    for key in ("c", "lower", "upper"):
        v = cfg.float("model", key)
        if v is not None:
            params[key] = v
    if name == "selfsimilar":
        params["d"] = cfg.int("model", "d", 1)
        params["base"] = cfg.get("model", "base", "burgers")
    try:
        return model_from_name(name, **params)
    except (ValueError, TypeError) as e:
        cfg._fail("model", "name", str(e))


def build_initial(cfg):
    kind = cfg.choice("initial", "type", ("riemann", "indicator", "piecewise_constant"))
    if kind == "riemann":
        return InitialData.riemann(cfg.float("initial", "left", required=True),
                                   cfg.float("initial", "right", required=True),
                                   cfg.float("initial", "x0", 0.0))
    if kind == "indicator":
        return InitialData.indicator(cfg.float("initial", "a", 0.0), cfg.float("initial", "b", 1.0),
                                     cfg.float("initial", "value", 1.0))
    breaks = cfg.floats("initial", "breaks", required=True)
    values = cfg.floats("initial", "values", required=True)
    if len(values) != len(breaks) - 1:
        cfg._fail("initial", "values", "needs one value per interval between breaks")
    return InitialData.piecewise_constant(breaks, values, cfg.float("initial", "outside", 0.0))


def _velocity(cfg):
    spec = (cfg.get("grid", "velocity", "sine 0.1")).split()
    try:
        kind, amp = spec[0], float(spec[1])
    except (IndexError, ValueError):
        cfg._fail("grid", "velocity", "expected 'sine A' or 'tapered V'")
    x_lo, x_hi = cfg.float("experiment", "x_lo"), cfg.float("experiment", "x_hi")
    if kind == "sine":
        return lambda t, x: amp * math.sin(math.pi * x)
    if kind == "tapered":
        ramp = 0.4 * (x_hi - x_lo) / 3.0

        def v(t, x):
            return amp * min(max((x_hi - x) / ramp, 0.0), 1.0) * min(max((x - x_lo) / ramp, 0.0), 1.0)
        return v
    cfg._fail("grid", "velocity", f"unknown velocity kind {kind!r}")


def dt_of(cfg, h):
    rule = cfg.choice("grid", "dt_rule", DT_RULES, "lambda")
    lam = cfg.float("grid", "lambda", 0.5)
    return {"lambda": lam * h, "half": 0.5 * h, "cube": h**3}[rule]


def grid_builder(cfg):
    """h -> grid for the configured family (plus an optional remap layer)."""
    fam = cfg.choice("grid", "family", FAMILIES)
    T = cfg.float("experiment", "t", required=True)
    x_lo = cfg.float("experiment", "x_lo", required=True)
    x_hi = cfg.float("experiment", "x_hi", required=True)
    lam = cfg.float("grid", "lambda", 0.5)

    def build(h):
        if fam == "uniform":
            g = build_uniform_grid(h, lam, T, x_lo, x_hi)
        elif fam == "staggered":
            g = build_staggered_grid(h, dt_of(cfg, h), T, x_lo, x_hi)
        elif fam == "local_timestep":
            region = cfg.floats("grid", "region", required=True)
            g = build_local_timestep_grid(h, lam, tuple(region), cfg.int("grid", "r", 2), T,
                                          x_lo, x_hi)
        elif fam == "moving":
            g = build_moving_vertex_grid(h, lam, T, x_lo, x_hi, _velocity(cfg))
        else:
            g = build_perturbed_grid(h, T, x_lo, x_hi, cfg.float("grid", "jitter", 0.2),
                                     cfg.seed, cfg.float("grid", "angle", 0.3))
        t_remap = cfg.float("grid", "remap_time")
        if t_remap is not None:
            ratio = cfg.float("grid", "remap_ratio", required=True)
            n = max(2, int(round((x_hi - x_lo) / (ratio * h))))
            jit = cfg.float("grid", "remap_jitter", 0.0)
            rng = np.random.default_rng(cfg.seed)
            nb = np.linspace(x_lo, x_hi, n + 1)
            nb[1:-1] += jit * (x_hi - x_lo) / n * rng.uniform(-1, 1, n - 1)
            dt = g.meta.get("dt", h)
            t_exact = round(t_remap / dt) * dt
            starts = [d[0] for d in g.layer_desc]
            t_exact = min(starts, key=lambda s: abs(s - t_exact))
            g = insert_remap_layer(g, t_exact, nb)
        return g
    return build


def scheme_builder(cfg):
    name = cfg.get("scheme", "name")
    fault = cfg.get("scheme", "fault", "none")
    params = {"lam": cfg.float("grid", "lambda", 0.5)}
    alpha = cfg.float("scheme", "alpha")
    if alpha is not None:
        params["alpha"] = alpha
    params["reconstruction"] = cfg.get("scheme", "reconstruction", "constant")

    def build(model, grid):
        s = build_scheme(name, model, grid, **params)
        if fault == "bias":
            s.flux_def = BiasedFlux(s.flux_def, cfg.float("scheme", "bias", 1e-3))
        return s
    return build


def reference_for(cfg, u0):
    kind = cfg.get("reference", "type", "none")
    if kind == "none":
        return None
    if kind in ("burgers_shock", "burgers_rarefaction"):
        ref = exact_reference(kind, uL=u0.left[0], uR=u0.right[0],
                              x0=u0.breaks[0] if u0.breaks else 0.0)
    elif kind == "advection":
        ref = exact_reference(kind, c=cfg.float("model", "c", 1.0), u0=u0)
    else:
        ref = exact_reference(kind, a=u0.breaks[0], b=u0.breaks[-1])
    return lambda t, h: ref.at(t)


def smoothed_for(u0):
    return lambda t, h: smoothed_reference(t, h, u0)


def default_focus(cfg, u0):
    """Battery centre: Riemann data follow the mean wave speed to t = T/2."""
    T = cfg.float("experiment", "t")
    if cfg.get("initial", "type") == "riemann" and cfg.get("model", "name") == "burgers":
        return u0.breaks[0] + 0.5 * (u0.left[0] + u0.right[0]) * 0.5 * T
    x_lo, x_hi = cfg.float("experiment", "x_lo"), cfg.float("experiment", "x_hi")
    return 0.5 * (x_lo + x_hi)


def build_experiment(cfg, quad_refine=None):
    """ExperimentConfig -> verify.Experiment."""
    model = build_model(cfg)
    u0 = build_initial(cfg)
    T = cfg.float("experiment", "t")
    x_lo, x_hi = cfg.float("experiment", "x_lo"), cfg.float("experiment", "x_hi")
    battery = []
    if cfg.get("verify", "battery", "default") == "default" and cfg.get("verify", "march", "full") == "full":
        battery = default_battery(T, x_lo, x_hi, cfg.float("verify", "focus", default_focus(cfg, u0)))
    streaming = None
    if cfg.get("verify", "march", "full") == "streaming":
        if cfg.get("grid", "family") != "staggered" or cfg.get("model", "name") != "trivial":
            cfg._fail("verify", "march", "streaming needs the staggered family and the trivial model")
        streaming = streaming_counterexample(lambda h: dt_of(cfg, h), T, x_lo, x_hi, u0)
    qr = cfg.bool("verify", "quad_refine", False) if quad_refine is None else quad_refine
    return Experiment(
        name=cfg.name, model=model, u0=u0,
        t_report=cfg.float("experiment", "t_report", T),
        window=tuple(cfg.floats("experiment", "window")),
        build_grid=grid_builder(cfg), build_scheme=scheme_builder(cfg),
        reference=reference_for(cfg, u0), battery=battery,
        entropy_a=tuple(cfg.floats("verify", "entropy_a", [])),
        streaming=streaming, quad_refine=qr,
    )


__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "validate",
           "build_model", "build_initial", "grid_builder", "scheme_builder", "reference_for",
           "smoothed_for", "build_experiment", "dt_of", "FAMILIES", "DT_RULES"]
