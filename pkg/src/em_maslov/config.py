"""Run configuration: YAML files and the built-in gallery systems."""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import geometry as geo
from .errors import ConfigError

_OPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "e": math.e}


def number(value: Any, what: str = "value") -> float:
    """Float from a number or a small arithmetic expression such as '3*pi/2'."""
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{what}: expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"{what}: unsupported expression {value!r}")

    try:
        return float(ev(ast.parse(value, mode="eval")))
    except SyntaxError as exc:
        raise ConfigError(f"{what}: cannot parse {value!r}") from exc


@dataclass
class RunConfig:
    name: str
    spec: geo.GeometrySpec
    x0: np.ndarray
    v0: np.ndarray
    T: float
    kappa_target: Optional[float] = None
    N: int = 128
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def kappa(self) -> float:
        return self.spec.energy(self.x0, self.v0)


def _metric(node: Any, n: int, p: int, where):
    if node is None:
        node = {"builtin": "flat"}
    if isinstance(node, str):
        node = {"builtin": node}
    if not isinstance(node, dict):
        raise ConfigError(where("metric", "must be a builtin name or a table"))
    if "builtin" in node:
        kind = node["builtin"]
        if kind == "flat":
            return geo.flat_metric(n, p) + (None,)
        if kind == "minkowski":
            if p != 1:
                raise ConfigError(where("metric", "minkowski needs metric_index 1"))
            return geo.flat_metric(n, 1) + (None,)
        if kind == "round_sphere":
            if n != 2 or p != 0:
                raise ConfigError(where("metric", "round_sphere needs dim 2 and metric_index 0"))
            r = number(node.get("radius", 1.0), "metric.radius")
            return geo.round_sphere_metric(r) + (geo.sphere_chart_margin,)
        raise ConfigError(where("metric", f"unknown builtin {kind!r}"))
    if "terms" in node:
        field_ = geo.PolynomialMatrixField(n, _terms(node["terms"], n, where, "metric"), antisymmetric=False)
        return field_.value, field_.gradient, field_.hessian, None
    raise ConfigError(where("metric", "needs 'builtin' or 'terms'"))


def _sigma(node: Any, n: int, where):
    if node is None or node == "zero":
        node = {"builtin": "zero"}
    if isinstance(node, str):
        node = {"builtin": node}
    if not isinstance(node, dict):
        raise ConfigError(where("sigma", "must be a builtin name or a table"))
    if "builtin" in node:
        kind = node["builtin"]
        if kind == "zero":
            return geo.zero_form(n)
        if kind == "uniform":
            i, j = node.get("indices", [0, 1])
            return geo.uniform_form(n, number(node.get("b", 1.0), "sigma.b"), int(i), int(j))
        if kind == "area":
            if n != 2:
                raise ConfigError(where("sigma", "area form needs dim 2"))
            return geo.sphere_area_form(number(node.get("b", 1.0), "sigma.b"), number(node.get("radius", 1.0), "sigma.radius"))
        raise ConfigError(where("sigma", f"unknown builtin {kind!r}"))
    if "terms" in node:
        field_ = geo.PolynomialMatrixField(n, _terms(node["terms"], n, where, "sigma"), antisymmetric=True)
        return field_.value, field_.gradient
    raise ConfigError(where("sigma", "needs 'builtin' or 'terms'"))


def _terms(items, n, where, key):
    if not isinstance(items, list):
        raise ConfigError(where(key, "terms must be a list"))
    out = []
    for t in items:
        try:
            out.append(geo.PolyTerm(int(t["i"]), int(t["j"]), number(t["coeff"], f"{key}.coeff"),
                                    tuple(int(k) for k in t.get("powers", [0] * n))))
        except (KeyError, TypeError) as exc:
            raise ConfigError(where(key, f"malformed term {t!r}")) from exc
    try:
        geo.PolynomialMatrixField(n, out, antisymmetric=(key == "sigma"))
    except ValueError as exc:
        raise ConfigError(where(key, str(exc))) from exc
    return out


def _vector(value, n, what, where):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(where(what, f"needs a list of {n} numbers"))
    return np.array([number(v, what) for v in value])


def parse_config(data: dict, lines: Optional[dict] = None, source: str = "<config>") -> RunConfig:
    lines = lines or {}

    def where(key, msg):
        ln = lines.get(key)
        loc = f"{source}, line {ln}" if ln else source
        return f"{loc}: {key}: {msg}"

    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    for key in ("dim", "x0", "v0", "T"):
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")
    n = int(data["dim"])
    p = int(data.get("metric_index", 0))
    if not 0 <= p <= n:
        raise ConfigError(where("metric_index", "must lie in [0, dim]"))
    g, dg, d2g, margin = _metric(data.get("metric"), n, p, where)
    s, ds = _sigma(data.get("sigma"), n, where)
    provider = data.get("provider", "analytic")
    if provider not in ("analytic", "finite-difference"):
        raise ConfigError(where("provider", f"unknown provider {provider!r}"))
    spec = geo.GeometrySpec(
        n, p, g, s, provider=provider, dmetric=dg, d2metric=d2g, dsigma=ds,
        fd_step=number(data.get("fd_step", 1e-5), "fd_step"),
        fd_step2=number(data.get("fd_step2", 1e-3), "fd_step2"),
        chart_margin=margin, name=str(data.get("name", "custom")),
    )
    x0 = _vector(data["x0"], n, "x0", where)
    v0 = _vector(data["v0"], n, "v0", where)
    kt = data.get("kappa_target")
    if kt is not None:
        kt = number(kt, "kappa_target")
        e = spec.energy(x0, v0)
        if e == 0.0 or np.sign(e) != np.sign(kt):
            raise ConfigError(where("kappa_target", f"cannot rescale v0 with energy {e:g} to {kt:g}"))
        v0 = v0 * math.sqrt(kt / e)
    T = number(data["T"], "T")
    if T <= 0:
        raise ConfigError(where("T", "must be positive"))
    return RunConfig(spec.name, spec, x0, v0, T, kt, int(data.get("N", 128)), int(data.get("seed", 0)), dict(data))


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {line}: {exc.problem}") from exc
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            lines[k.value] = k.start_mark.line + 1
    cfg = parse_config(data, lines, str(path))
    if "name" not in (data or {}):
        cfg.name = path.stem
    return cfg


GALLERY = {
    "flat-trivial": {
        "name": "flat-trivial", "dim": 2, "metric": "flat", "sigma": "zero",
        "x0": [0.0, 0.0], "v0": [1.0, 0.0], "kappa_target": 0.5, "T": 1.0,
    },
    "landau": {
        "name": "landau", "dim": 2, "metric": "flat", "sigma": {"builtin": "uniform", "b": 1.0},
        "x0": [0.0, 0.0], "v0": [1.0, 0.0], "kappa_target": 0.5, "T": "3*pi/2",
    },
    "round-sphere": {
        "name": "round-sphere", "dim": 2, "metric": "round_sphere", "sigma": "zero",
        "x0": ["pi/2", 0.0], "v0": [0.0, 1.0], "kappa_target": 0.5, "T": "3*pi/2",
    },
    "minkowski-line": {
        "name": "minkowski-line", "dim": 2, "metric_index": 1, "metric": "minkowski", "sigma": "zero",
        "x0": [0.0, 0.0], "v0": [1.0, 0.0], "kappa_target": -0.5, "T": 2.0,
    },
    "minkowski-field": {
        "name": "minkowski-field", "dim": 2, "metric_index": 1, "metric": "minkowski",
        "sigma": {"builtin": "uniform", "b": 1.0},
        "x0": [0.0, 0.0], "v0": [1.0, 0.0], "kappa_target": -0.5, "T": 2.0,
    },
}


def gallery_config(name: str, **overrides) -> RunConfig:
    if name not in GALLERY:
        raise ConfigError(f"unknown gallery system {name!r}; choose from {sorted(GALLERY)}")
    data = dict(GALLERY[name])
    data.update({"N": 128, "seed": 0})
    data.update(overrides)
    return parse_config(data, source=f"gallery:{name}")


def dump_gallery_yaml(name: str) -> str:
    data = dict(GALLERY[name])
    data.update({"provider": "analytic", "N": 128, "seed": 0})
    return yaml.safe_dump(data, sort_keys=False)
