"""Scenario configuration: a TOML file plus command-line overrides, and a small
expression grammar for potentials such as ``0.3*Y20``.

Expression grammar
------------------
Numbers, ``+ - * / **``, parentheses and unary minus, combined with

* ``x``, ``y``, ``z`` (sphere) or ``x1`` ... ``x4`` (tori): coordinate functions;
* ``sin``, ``cos``, ``exp``: applied pointwise;
* ``Ylm`` on the sphere, e.g. ``Y20`` or ``Y2m1`` for m = -1: the real spherical
  harmonic of degree l and order m scaled to sup norm one.
"""

from __future__ import annotations

import ast
import math
import operator
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .backends import Geometry
from .fields import ScalarField


class ConfigError(ValueError):
    """Invalid configuration or expression; the CLI maps it to exit code 2."""


RESOLUTION_BOUNDS = {"torus2": (4, 128), "torus4": (2, 16), "sphere": (4, 64)}
DEFAULT_RESOLUTION = {"torus2": 32, "torus4": 8, "sphere": 24}


@dataclass(frozen=True)
class ScenarioConfig:
    backend: str = "torus2"
    resolution: int | None = None
    seed: int = 0
    seeds: int = 1
    suites: tuple = ()
    tol: float | None = None
    hbar: float = 1.0
    fd_step: float = 1e-4
    dt: float = 1e-2
    steps: int = 5000
    target: float = 1e-6
    flow: str = "kr"
    h0: str = "0.3*Y20"
    h1: str = "0.1*Y20"
    geodesic_start: str = "0"
    slices: int = 20
    maxiter: int = 60
    out: str | None = None

    def __post_init__(self):
        if self.backend not in RESOLUTION_BOUNDS:
            raise ConfigError(f"unknown backend '{self.backend}' (expected one of {sorted(RESOLUTION_BOUNDS)})")
        lo, hi = RESOLUTION_BOUNDS[self.backend]
        if self.resolution is not None and not lo <= int(self.resolution) <= hi:
            raise ConfigError(f"resolution {self.resolution} outside [{lo}, {hi}] for {self.backend}")
        for name in ("fd_step", "dt", "target", "hbar"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be a positive number, got {val!r}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        for name in ("seeds", "steps", "slices", "maxiter"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.flow not in ("kr", "ding"):
            raise ConfigError(f"unknown flow type '{self.flow}' (expected kr or ding)")
        object.__setattr__(self, "suites", tuple(self.suites))

    @property
    def effective_resolution(self) -> int:
        return int(self.resolution) if self.resolution is not None else DEFAULT_RESOLUTION[self.backend]

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["suites"] = list(self.suites)
        return out


_FIELDS = {f.name for f in fields(ScenarioConfig)}


def _flatten(table: dict) -> dict:
    """Accept either flat keys or the nested tables [scene], [numerics], [flow], [output]."""
    flat = {}
    for key, val in table.items():
        if isinstance(val, dict):
            for k2, v2 in val.items():
                k2 = "flow" if k2 == "type" else k2
                flat[k2 if k2 in _FIELDS else f"{key}.{k2}"] = v2
        else:
            flat[key] = val
    return flat


def load_config(path, **overrides) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    flat = _flatten(table)
    if "type" in flat:
        flat["flow"] = flat.pop("type")
    unknown = sorted(set(flat) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        cfg = ScenarioConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.with_overrides(**overrides)


# ---------------------------------------------------------------------------
# expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_HARMONIC = re.compile(r"^Y(\d)(m?)(\d)$")


def _named_field(name: str, geom: Geometry) -> np.ndarray:
    if geom.normal() is not None:
        pts = geom.points
        if name in ("x", "y", "z"):
            return pts["xyz".index(name)]
        m = _HARMONIC.match(name)
        if m:
            l, sign, mm = int(m.group(1)), m.group(2), int(m.group(3))
            order = -mm if sign else mm
            if abs(order) > l:
                raise ConfigError(f"harmonic {name} has |m| > l")
            vals = geom.harmonic(l, order)
            return vals / np.max(np.abs(vals)) if l > 0 else np.ones(geom.shape)
    else:
        m = re.match(r"^x(\d)$", name)
        if m and 1 <= int(m.group(1)) <= geom.D:
            return geom.coords[int(m.group(1)) - 1]
    raise ConfigError(f"unknown name '{name}' in expression for backend {geom.kind}")


def parse_expression(text: str, geom: Geometry) -> ScalarField:
    """Evaluate an expression over named basis fields on ``geom``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression '{text}'") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Name):
            return _named_field(node.id, geom)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported construct in expression '{text}'")

    val = ev(tree)
    return ScalarField(geom, np.broadcast_to(np.asarray(val, dtype=float), geom.shape).copy())


def write_example(path) -> Path:
    """A commented example configuration."""
    text = """# kahlerlab scenario
backend = "sphere"
seed = 42
suites = ["fano"]

[numerics]
tol = 1e-6
fd_step = 1e-4

[flow]
type = "kr"
dt = 1e-2
steps = 3000
h0 = "0.3*Y20"
"""
    path = Path(path)
    path.write_text(text)
    return path
