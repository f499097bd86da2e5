"""
Flat INI-style experiment configs.

A config is a ``version = 1`` line followed by sections. Every key is
checked against a schema; unknown keys, bad types and violated constraints
are all collected before anything is reported.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

CONFIG_VERSION = 1
_TOP = "__top__"


class ConfigError(ValueError):
    """One or more problems in a config; ``errors`` lists them as ``section.key: message``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("NaN is not allowed")
    return v


def _int(s):
    f = float(s)
    if f != int(f):
        raise ValueError("expected an integer")
    return int(f)


def _bool(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(s):
    return tuple(_float(x) for x in s.replace(",", " ").split())


def _ints(s):
    return tuple(_int(x) for x in s.replace(",", " ").split())


def _str(s):
    return s.strip()


def _lam(s):
    return "auto" if s.strip().lower() == "auto" else _float(s)


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "manifold": {
        "k": (_int, 3), "profile": (_str, "euclidean"), "alpha": (_float, None),
        "blend_a": (_float, 1.0), "blend_b": (_float, 2.0),
        "grid": (_str, "stretched"), "r_max": (_float, 200.0), "dr_core": (_float, 0.02),
        "ratio": (_float, 1.02), "dr_max": (_float, 0.1), "cells": (_int, 4096),
    },
    "potential": {
        "family": (_str, "zero"), "omega": (_float, 0.0), "b": (_float, 3.0),
        "theta": (_float, 1.0), "radii": (_floats, ()), "values": (_floats, ()),
    },
    "evolution": {
        "p": (_float, 2.0), "amplitude": (_float, 0.01), "sigma": (_float, 1.0),
        "t_max": (_float, 1e3), "u_max": (_float, 1e8), "dt_min_factor": (_float, 1e-12),
        "decay_window": (_float, 0.1), "eps_boundary": (_float, 1e-3), "dt_max": (_float, None),
        "transform": (_bool, False),
    },
    "sweep": {
        "p_min": (_float, 1.3), "p_max": (_float, 2.2), "p_step": (_float, 0.1),
        "amplitudes": (_floats, (1e-3, 1e-2, 1e-1)), "t_max": (_float, 1e3), "workers": (_int, 1),
    },
    "duhamel": {
        "p": (_float, 2.0), "lam": (_lam, "auto"), "delta": (_float, math.exp(4.0)),
        "tol": (_float, 1e-8), "max_iter": (_int, 30), "dt": (_float, 0.05),
        "r_max": (_float, 100.0), "dr_core": (_float, 0.05), "ratio": (_float, 1.02), "dr_max": (_float, 0.5),
        "eps": (_float, 0.5), "horizons": (_floats, (1e4, 1e6, 1e8)),
    },
    "testfn": {
        "p": (_float, 2.0), "ladder": (_ints, (4, 8, 16, 32, 64)), "eps": (_float, 0.0),
        "delta1": (_float, 0.0), "delta2": (_float, 0.0),
    },
    "riesz": {
        "x_min": (_float, 1e-2), "x_max": (_float, 1e3), "points": (_int, 41),
        "r_min": (_float, 1e-3), "r_max": (_float, 1e4), "samples": (_int, 141),
    },
    "kernel": {
        "times": (_floats, (1.0, 4.0, 16.0, 64.0)), "dt": (_float, 0.005), "source": (_int, 0),
    },
    "output": {"dir": (_str, "out"), "prefix": (_str, "")},
}


@dataclass
class ExperimentConfig:
    version: int
    sections: dict = field(default_factory=dict)
    present: frozenset = frozenset()
    path: Path | None = None

    def __getitem__(self, section):
        return self.sections[section]

    def has(self, section: str) -> bool:
        return section in self.present


def _constraints(sec: dict[str, dict]) -> list[str]:
    errs = []
    m = sec["manifold"]

    def need(cond, where, msg):
        if not cond:
            errs.append(f"{where}: {msg}")

    need(m["k"] >= 2, "manifold.k", "dimension must be >= 2")
    need(m["profile"] in ("euclidean", "logpoly"), "manifold.profile", "must be euclidean or logpoly")
    if m["profile"] == "logpoly":
        need(m["alpha"] is not None and m["alpha"] > 0, "manifold.alpha", "logpoly needs alpha > 0")
        need(1.0 <= m["blend_a"] < m["blend_b"], "manifold.blend_a", "need 1 <= blend_a < blend_b")
    need(m["grid"] in ("stretched", "uniform"), "manifold.grid", "must be stretched or uniform")
    need(m["r_max"] > 0, "manifold.r_max", "must be positive")
    need(m["dr_core"] > 0, "manifold.dr_core", "must be positive")
    need(1.0 <= m["ratio"] <= 1.02, "manifold.ratio", "must lie in [1, 1.02]")
    need(m["cells"] >= 8, "manifold.cells", "need at least 8 cells")
    v = sec["potential"]
    need(v["family"] in ("zero", "inverse_power", "regularized_inverse_square", "hardy", "tabulated"),
         "potential.family", f"unknown family {v['family']!r}")
    need(v["b"] > 0, "potential.b", "must be positive")
    need(v["theta"] > 0, "potential.theta", "must be positive")
    if v["family"] == "hardy":
        lo = -((m["k"] - 2) ** 2) / 4.0
        need(lo <= v["omega"] < 0, "potential.omega", f"hardy needs omega in [{lo}, 0)")
    if v["family"] == "tabulated":
        need(len(v["radii"]) >= 2 and len(v["radii"]) == len(v["values"]),
             "potential.radii", "tabulated potential needs matching radii and values")
    e = sec["evolution"]
    need(e["p"] > 1, "evolution.p", "p must exceed 1")
    need(e["amplitude"] > 0, "evolution.amplitude", "must be positive")
    need(e["sigma"] > 0, "evolution.sigma", "must be positive")
    need(e["t_max"] > 0, "evolution.t_max", "must be positive")
    need(e["u_max"] > 100 * e["amplitude"], "evolution.u_max", "must be much larger than the amplitude")
    need(0 < e["decay_window"] < 1, "evolution.decay_window", "must lie in (0, 1)")
    s = sec["sweep"]
    need(1 < s["p_min"] <= s["p_max"] <= 10, "sweep.p_min", "p-grid must lie in (1, 10] with p_min <= p_max")
    need(s["p_step"] > 0, "sweep.p_step", "must be positive")
    need(len(s["amplitudes"]) > 0 and all(a > 0 for a in s["amplitudes"]), "sweep.amplitudes",
         "need positive amplitudes")
    need(s["t_max"] > 0, "sweep.t_max", "must be positive")
    need(s["workers"] >= 1, "sweep.workers", "must be >= 1")
    d = sec["duhamel"]
    need(d["p"] > 1, "duhamel.p", "p must exceed 1")
    need(d["lam"] == "auto" or d["lam"] > 0, "duhamel.lam", "must be positive or 'auto'")
    need(d["delta"] > math.e, "duhamel.delta", "need ln(delta) > 1")
    need(d["tol"] > 0, "duhamel.tol", "must be positive")
    need(d["max_iter"] >= 1, "duhamel.max_iter", "must be >= 1")
    need(d["dt"] > 0, "duhamel.dt", "must be positive")
    t = sec["testfn"]
    need(t["p"] > 1, "testfn.p", "p must exceed 1")
    need(len(t["ladder"]) >= 2 and all(i >= 2 for i in t["ladder"]), "testfn.ladder",
         "need at least two scale indices >= 2")
    r = sec["riesz"]
    need(0 < r["x_min"] < r["x_max"], "riesz.x_min", "need 0 < x_min < x_max")
    need(0 < r["r_min"] < r["r_max"], "riesz.r_min", "need 0 < r_min < r_max")
    need(r["points"] >= 2 and r["samples"] >= 8, "riesz.points", "need points >= 2 and samples >= 8")
    k = sec["kernel"]
    need(len(k["times"]) > 0 and all(x > 0 for x in k["times"]), "kernel.times", "need positive times")
    need(k["dt"] > 0, "kernel.dt", "must be positive")
    return errs


def parse_text(text: str, path=None) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(f"[{_TOP}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    errs: list[str] = []
    top = dict(cp[_TOP])
    version = None
    if "version" not in top:
        errs.append("version: missing version key")
    else:
        try:
            version = _int(top.pop("version"))
            if version != CONFIG_VERSION:
                errs.append(f"version: unsupported version {version}")
        except ValueError:
            errs.append("version: expected an integer")
    for k in top:
        errs.append(f"{k}: unknown top-level key")
    sections = {name: {k: d for k, (_, d) in keys.items()} for name, keys in SCHEMA.items()}
    present = set()
    bad_type = False
    for name in cp.sections():
        if name == _TOP:
            continue
        if name not in SCHEMA:
            errs.append(f"[{name}]: unknown section")
            continue
        present.add(name)
        for key, raw in cp[name].items():
            if key not in SCHEMA[name]:
                errs.append(f"{name}.{key}: unknown key in section [{name}]")
                continue
            parser = SCHEMA[name][key][0]
            try:
                sections[name][key] = parser(raw)
            except ValueError as exc:
                errs.append(f"{name}.{key}: type mismatch ({exc})")
                bad_type = True
    if not bad_type and version is not None:
        errs.extend(_constraints(sections))
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(version, sections, frozenset(present), None if path is None else Path(path))


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"file: cannot read {p}: {exc.strerror}"]) from None
    return parse_text(text, p)


def _render_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_render_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: ExperimentConfig) -> str:
    """Normalised text of the sections present in ``cfg`` (defaults made explicit, ``None`` left out)."""
    out = [f"version = {cfg.version}", ""]
    for name in SCHEMA:
        if name not in cfg.present:
            continue
        out.append(f"[{name}]")
        for key in SCHEMA[name]:
            val = cfg.sections[name][key]
            if val is None or val == ():
                continue
            out.append(f"{key} = {_render_value(val)}")
        out.append("")
    return "\n".join(out)
