"""Scenario files: YAML with numeric expressions and located diagnostics.

Numbers may be written as expressions such as ``sqrt(2)``, ``pi/2`` or
``golden``; only arithmetic on literals and these names is accepted.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .geometry import StarShapedSystem, system_from_config

COMMANDS = ("orbits", "spectrum", "cz", "convexity", "linking", "rotation", "fried", "section",
            "return-map", "area")

_NAMES = {"pi": math.pi, "e": math.e, "golden": (1 + math.sqrt(5)) / 2, "phi": (1 + math.sqrt(5)) / 2,
          "tau": 2 * math.pi}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}

# allowed parameter keys per command, with defaults
PARAMS = {
    "orbits": {"action_cap": None, "n_angle": 4},
    "spectrum": {"orbit": None, "k": 1, "N": 512, "frame": "global", "delta": 0.0, "half_width_turns": 5,
                 "richardson": True},
    "cz": {"orbit": None, "k": [1], "N": 512, "frame": "global", "delta": 0.0, "richardson": False},
    "convexity": {"action_cap": None, "N": 512, "strict": False, "n_angle": 4},
    "linking": {"curves": None, "gauss": True, "self_linking": False},
    "rotation": {"link": None, "component": None, "twist": 0, "periods": 64},
    "fried": {"link": None, "samples": 32, "horizon": 2000.0, "tube_excl": 1e-2, "rho_tol": 1e-4,
              "mu_tol": 1e-4, "coefficients": None, "half_check": True},
    "section": {"binding": "gamma1", "theta0": 0.0, "tilt": 0.0, "n_rho": 8, "n_phi": 16},
    "return-map": {"binding": "gamma1", "theta0": 0.0, "start": [0.5, 0.0], "iterations": 20,
                   "rectangles": 10},
    "area": {"binding": "gamma1", "theta0": 0.0},
}
REQUIRED = {
    "orbits": ("action_cap",), "spectrum": ("orbit",), "cz": ("orbit",), "convexity": ("action_cap",),
    "linking": ("curves",), "rotation": ("link", "component"), "fried": ("link",),
}
SAMPLING = ("fried",)
TOLERANCE_KEYS = {"spec_tol"}


def eval_number(value, where: str = "value"):
    """Evaluate a literal or a small arithmetic expression to a float."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    try:
        tree = ast.parse(value.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"{where}: cannot parse expression {value!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"{where}: unsupported element in expression {value!r}")

    try:
        out = ev(tree)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"{where}: {exc} in {value!r}") from None
    return float(out)


def _line_map(text: str) -> dict[str, int]:
    """Dotted path -> 1-based line of each node in a YAML document."""
    out: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        out[path or "<root>"] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return out


@dataclass
class Scenario:
    command: str
    system: StarShapedSystem
    system_cfg: dict
    params: dict
    seed: int | None
    tolerances: dict = field(default_factory=dict)
    out_dir: str | None = None
    csv: bool = True
    source: str = ""

    def describe(self) -> dict:
        return {"command": self.command, "system": self.system.label,
                "seed": None if self.seed is None else str(self.seed)}


class _Located:
    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def err(self, path, msg):
        line = self.lines.get(path)
        loc = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{loc}: {path}: {msg}")


def _normalize_system(raw, loc):
    if not isinstance(raw, dict):
        raise loc.err("system", "expected a mapping")
    cfg = {}
    for k, v in raw.items():
        if k in ("kind", "name"):
            cfg[k] = v
        else:
            try:
                cfg[k] = eval_number(v, f"system.{k}")
            except ConfigError as exc:
                raise loc.err(f"system.{k}", str(exc).split(": ", 1)[-1]) from None
    return cfg


def _check_orbit_spec(spec, path, loc):
    if isinstance(spec, str):
        if spec not in ("gamma1", "gamma2"):
            raise loc.err(path, f"orbit name must be gamma1 or gamma2, got {spec!r}")
        return spec
    if isinstance(spec, dict):
        extra = set(spec) - {"name", "point", "period", "reversed", "label"}
        if extra:
            raise loc.err(path, f"unknown orbit keys {sorted(extra)}")
        out = dict(spec)
        if "point" in spec:
            pt = spec["point"]
            if not isinstance(pt, list) or len(pt) != 4:
                raise loc.err(f"{path}.point", "expected a list of 4 numbers")
            out["point"] = [eval_number(v, f"{path}.point[{i}]") for i, v in enumerate(pt)]
            if "period" in spec:
                out["period"] = eval_number(spec["period"], f"{path}.period")
        elif "name" in spec:
            _check_orbit_spec(spec["name"], f"{path}.name", loc)
        else:
            raise loc.err(path, "orbit needs a name or a point")
        if not isinstance(spec.get("reversed", False), bool):
            raise loc.err(f"{path}.reversed", "expected true/false")
        return out
    raise loc.err(path, "orbit must be a name or a mapping")


def _check_params(command, raw, loc):
    raw = dict(raw or {})
    allowed = PARAMS[command]
    unknown = set(raw) - set(allowed)
    if unknown:
        raise loc.err("params", f"unknown parameters for {command}: {sorted(unknown)}")
    for req in REQUIRED.get(command, ()):
        if raw.get(req) is None:
            raise loc.err("params", f"missing required parameter {req!r}")
    out = dict(allowed)
    out.update(raw)
    for key, default in allowed.items():
        val = out[key]
        path = f"params.{key}"
        if key in ("orbit", "component"):
            out[key] = _check_orbit_spec(val, path, loc)
        elif key in ("link", "curves"):
            if not isinstance(val, list) or not val:
                raise loc.err(path, "expected a non-empty list of orbits")
            out[key] = [_check_orbit_spec(v, f"{path}[{i}]", loc) for i, v in enumerate(val)]
        elif key == "k":
            ks = val if isinstance(val, list) else [val]
            if not ks or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in ks):
                raise loc.err(path, "expected a positive integer or a list of them")
            out[key] = ks if isinstance(val, list) else ks[0]
        elif key == "coefficients":
            if val is not None and not (isinstance(val, list) and all(isinstance(x, int) for x in val)):
                raise loc.err(path, "expected a list of integers")
        elif key == "start":
            if not isinstance(val, list) or len(val) != 2:
                raise loc.err(path, "expected [rho, phi]")
            out[key] = [eval_number(v, f"{path}[{i}]") for i, v in enumerate(val)]
        elif key == "frame":
            if val not in ("global", "disk_aligned"):
                raise loc.err(path, "expected global or disk_aligned")
        elif key == "binding":
            if val not in ("gamma1", "gamma2"):
                raise loc.err(path, "expected gamma1 or gamma2")
        elif isinstance(default, bool):
            if not isinstance(val, bool):
                raise loc.err(path, "expected true/false")
        elif isinstance(default, int) or key in ("N", "samples", "iterations", "rectangles", "n_angle",
                                                   "n_rho", "n_phi", "periods", "half_width_turns", "twist"):
            if not isinstance(val, int) or isinstance(val, bool):
                raise loc.err(path, "expected an integer")
        elif isinstance(default, float) or default is None:
            try:
                out[key] = float(eval_number(val, path))
            except ConfigError as exc:
                raise loc.err(path, str(exc).split(": ", 1)[-1]) from None
    if command in ("spectrum", "cz", "convexity"):
        N = out["N"]
        if N < 128 or N & (N - 1):
            raise loc.err("params.N", "must be a power of two >= 128")
    if command in ("orbits", "convexity") and not out["action_cap"] > 0:
        raise loc.err("params.action_cap", "must be positive")
    if command == "fried":
        if out["samples"] < 1:
            raise loc.err("params.samples", "must be >= 1")
        if out["coefficients"] is not None and len(out["coefficients"]) != len(out["link"]):
            raise loc.err("params.coefficients", "one coefficient per link component")
    if command == "linking" and len(out["curves"]) != 2 and not out["self_linking"]:
        raise loc.err("params.curves", "linking needs exactly two curves (or self_linking: true)")
    return out


def parse_scenario(text: str, source: str = "<config>", command: str | None = None,
                   seed_override: int | None = None) -> Scenario:
    """Validate a scenario document completely before any computation."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    loc = _Located(_line_map(text), source)
    if not isinstance(data, dict):
        raise loc.err("<root>", "expected a mapping at top level")
    unknown = set(data) - {"command", "system", "params", "seed", "tolerances", "output"}
    if unknown:
        raise loc.err("<root>", f"unknown top-level keys {sorted(unknown)}")
    cmd = data.get("command", command)
    if command is not None and cmd != command:
        raise loc.err("command", f"config is for {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise loc.err("command", f"expected one of {', '.join(COMMANDS)}, got {cmd!r}")
    if "system" not in data:
        raise loc.err("<root>", "missing 'system'")
    sys_cfg = _normalize_system(data["system"], loc)
    try:
        system = system_from_config(sys_cfg)
    except ConfigError as exc:
        raise loc.err("system", str(exc).split(": ", 1)[-1]) from None
    params = _check_params(cmd, data.get("params"), loc)
    seed = data.get("seed")
    if seed_override is not None:
        seed = seed_override
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64):
        raise loc.err("seed", "expected an unsigned 64-bit integer")
    if cmd in SAMPLING and seed is None:
        raise loc.err("seed", f"{cmd} samples randomly and needs a seed")
    tol = data.get("tolerances") or {}
    if not isinstance(tol, dict):
        raise loc.err("tolerances", "expected a mapping")
    bad = set(tol) - TOLERANCE_KEYS
    if bad:
        raise loc.err("tolerances", f"unknown tolerance keys {sorted(bad)}; known: {sorted(TOLERANCE_KEYS)}")
    tol = {k: eval_number(v, f"tolerances.{k}") for k, v in tol.items()}
    out = data.get("output") or {}
    if not isinstance(out, dict) or set(out) - {"dir", "csv"}:
        raise loc.err("output", "expected a mapping with keys dir, csv")
    if cmd in ("section", "return-map", "area") and not system.is_split:
        raise loc.err("system", f"{cmd} needs a split system")
    return Scenario(cmd, system, sys_cfg, params, seed, tol, out.get("dir"), bool(out.get("csv", True)), source)


def load_scenario(path, command: str | None = None, seed_override: int | None = None) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_scenario(text, str(path), command, seed_override)
