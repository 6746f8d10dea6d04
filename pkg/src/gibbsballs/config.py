"""Run configuration: defaults, YAML loading and validation with line numbers."""
from __future__ import annotations

import copy

import yaml

from .models import make_model, dom_level
from .poisson import RadiusLaw
from .space import Configuration, Window

DEFAULTS = {
    "model": {"name": "hard_sphere", "params": {}},
    "lam": 0.5,
    "alpha": None,
    "window": {"lo": [0.0], "hi": [1.0], "r_max": 0.25, "W": 32},
    "radius": {"kind": "delta", "R": 0.2},
    "sampler": "thin",
    "reps": 100,
    "seed": 0,
    "workers": 1,
    "estimator": {"method": "factory", "n_max": None, "quad_budget": 400, "bias_budget": 0.05},
    "couple": {"gamma1": [], "gamma2": [[1.1, 0.2]], "shared": False, "depth_cap": 10000},
    "percolate": {"d": 2, "radius": {"kind": "delta", "R": 0.5},
                  "alphas": [0.0, 0.5, 0.7, 0.8], "distances": [2, 4, 6, 8],
                  "threshold_sizes": [4, 8], "threshold_reps": 100, "W": 24},
    "decay": {"cell": 0.1, "separations": [0.1, 0.2, 0.3, 0.4, 0.5], "influence": None},
    "verify": {"reps": 2000, "fixture": None},
}


class ConfigError(ValueError):
    """Validation failure tied to a field path and, when known, a source line."""

    def __init__(self, path: str, message: str, line: int | None = None, source: str = "<config>"):
        self.path, self.line, self.source = path, line, source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(f"{where}{path}: {message}")


def _lines(node, prefix="", out=None):
    """Map dotted field paths to 1-based source lines from a YAML node tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _lines(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            _lines(v, path, out)
    return out


def _merge(base: dict, over: dict, lines: dict, source: str, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        path = f"{prefix}.{k}" if prefix else k
        if k not in base:
            raise ConfigError(path, "unknown field", lines.get(path), source)
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("params",):
            out[k] = _merge(base[k], v, lines, source, path)
        else:
            out[k] = v
    return out


class RunConfig:
    """Validated configuration with constructed model, window and radius law."""

    def __init__(self, data: dict, lines: dict | None = None, source: str = "<config>"):
        self.data = data
        self._lines = lines or {}
        self.source = source
        self._validate()

    # construction ---------------------------------------------------------
    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        try:
            node = yaml.compose(text)
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError("<root>", f"invalid YAML: {exc}", mark.line + 1 if mark else None, source)
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "top level must be a mapping", 1, source)
        lines = _lines(node) if node is not None else {}
        return cls(_merge(DEFAULTS, raw, lines, source), lines, source)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(copy.deepcopy(DEFAULTS))

    def dump(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)

    # validation -----------------------------------------------------------
    def _fail(self, path, message):
        raise ConfigError(path, message, self._lines.get(path), self.source)

    def _number(self, path, value, lo=None, strict=False, allow_none=False):
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._fail(path, f"expected a number, got {value!r}")
        if lo is not None and (value < lo or (strict and value == lo)):
            self._fail(path, f"must be {'>' if strict else '>='} {lo}, got {value}")
        return value

    def _validate(self):
        d = self.data
        try:
            self.model = make_model(d["model"]["name"], **(d["model"].get("params") or {}))
        except (TypeError, ValueError) as exc:
            self._fail("model", str(exc))
        self.lam = float(self._number("lam", d["lam"], 0))
        try:
            floor = dom_level(self.model, self.lam)
        except ValueError as exc:
            self._fail("model", str(exc))
        self.alpha = floor if d["alpha"] is None else float(self._number("alpha", d["alpha"], 0))
        if self.alpha < floor * (1 - 1e-12):
            self._fail("alpha", f"must be >= the dominating level {floor}")
        if not self.model.is_local:
            self._fail("model", "model does not satisfy the locality assumption")
        w = d["window"]
        for key in ("lo", "hi"):
            if not isinstance(w[key], list) or not w[key]:
                self._fail(f"window.{key}", "expected a non-empty list")
            for i, v in enumerate(w[key]):
                self._number(f"window.{key}[{i}]", v)
        try:
            self.window = Window(tuple(w["lo"]), tuple(w["hi"]), float(w["r_max"]), int(w["W"]))
        except ValueError as exc:
            self._fail("window", str(exc))
        try:
            self.Q = RadiusLaw.from_spec(d["radius"])
        except (TypeError, ValueError, KeyError) as exc:
            self._fail("radius", str(exc))
        if self.Q.r_sup > self.window.r_max:
            self._fail("radius", f"radius law exceeds window.r_max={self.window.r_max}")
        if d["sampler"] not in ("thin", "rejection"):
            self._fail("sampler", "must be 'thin' or 'rejection'")
        self._number("reps", d["reps"], 0)
        self._number("seed", d["seed"], 0)
        self._number("workers", d["workers"], 1)
        for key in ("reps", "seed", "workers"):
            if not isinstance(d[key], int):
                self._fail(key, "expected an integer")
        c = d["couple"]
        self.gamma1 = self._boundary("couple.gamma1", c["gamma1"])
        self.gamma2 = self._boundary("couple.gamma2", c["gamma2"])
        self._number("couple.depth_cap", c["depth_cap"], 1)
        p = d["percolate"]
        try:
            self.perc_Q = RadiusLaw.from_spec(p["radius"])
        except (TypeError, ValueError, KeyError) as exc:
            self._fail("percolate.radius", str(exc))
        for i, a in enumerate(p["alphas"]):
            self._number(f"percolate.alphas[{i}]", a, 0)
        for i, a in enumerate(p["distances"]):
            self._number(f"percolate.distances[{i}]", a, 0, strict=True)

    def _boundary(self, path, rows):
        dim = self.window.d
        if not isinstance(rows, list):
            self._fail(path, "expected a list of [x..., r] rows")
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim + 1:
                self._fail(f"{path}[{i}]", f"expected {dim + 1} numbers [x..., r]")
            for v in row:
                self._number(f"{path}[{i}]", v)
        cfg = Configuration.from_rows(rows, dim) if rows else Configuration.empty(dim)
        if len(cfg) and self.window.contains(cfg.centers, cfg.radii).any():
            self._fail(path, "boundary balls must lie outside the window")
        return cfg

    def __getitem__(self, key):
        return self.data[key]
