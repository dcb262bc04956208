"""Run configuration: YAML document -> validated solver inputs.

Every error message is anchored to a line of the source document.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .coupled import PhysicsParams, SolverConfig, constant_vector, edge_linear_temperature
from .exceptions import ConfigurationError, InvalidParameterError
from .grid import EDGES, BoundaryPartition, build_grid


class ConfigError(ConfigurationError):
    pass


SCHEMA = {
    "domain": {"lx": True, "ly": True, "nx": True, "ny": True},
    "boundary": {"gamma1": True, "tw": True},
    "physics": {"K": True, "lambda": True},
    "solver": {"picard_tol": False, "picard_max_iter": False, "linear_tol": False,
               "linear_max_iter": False, "damping": False, "advection_scheme": False},
    "output": {"directory": False, "formats": False, "emit_report": False},
    "verify": {"seed": False, "samples": False},
}
REQUIRED_SECTIONS = ("domain", "boundary", "physics")
TW_KEYS = {"constant": {"value"}, "edge-linear": {"edges", "default"}, "node-table": {"path"}}


class _Lines:
    """Line numbers (1-based) of every mapping key, indexed by key path."""

    def __init__(self, text):
        self.lines = {(): 1}
        try:
            root = yaml.compose(text)
        except yaml.YAMLError:
            root = None
        if root is not None:
            self._walk(root, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                self.lines[path + (key,)] = k.start_mark.line + 1
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def __call__(self, *path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path, 1)


@dataclass
class RunConfig:
    grid: object
    partition: BoundaryPartition
    params: PhysicsParams
    solver: SolverConfig
    output_dir: str
    formats: tuple
    emit_report: bool
    seed: int = 0
    samples: int = 100
    source: str = "<config>"


def _fail(src, line, msg):
    raise ConfigError(f"{src}:{line}: {msg}")


def _num(data, key, src, lines, path, kind=float):
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(src, lines(*path, key), f"{'.'.join(path + (key,))} must be a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            _fail(src, lines(*path, key), f"{'.'.join(path + (key,))} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _check_keys(data, allowed, required, src, lines, path):
    name = ".".join(path) or "top level"
    if not isinstance(data, dict):
        _fail(src, lines(*path), f"{name} must be a mapping")
    for k in data:
        if k not in allowed:
            _fail(src, lines(*path, k), f"unknown key {k!r} in {name}")
    for k in required:
        if k not in data:
            _fail(src, lines(*path), f"missing required key {k!r} in {name}")


def _read_table(path, columns, src, line):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or list(reader.fieldnames) != list(columns):
                _fail(src, line, f"{path}: expected header {','.join(columns)}")
            return [{k: float(r[k]) for k in columns} for r in reader]
    except (OSError, ValueError) as exc:
        _fail(src, line, f"cannot read node table {path}: {exc}")


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def parse_config(data, lines, src="<config>", base_dir="."):
    if data is None:
        data = {}
    _check_keys(data, SCHEMA, REQUIRED_SECTIONS, src, lines, ())
    for sec, keys in SCHEMA.items():
        if sec in data and data[sec] is None and sec not in REQUIRED_SECTIONS:
            data[sec] = {}
        if sec in data:
            _check_keys(data[sec], keys, [k for k, req in keys.items() if req], src, lines, (sec,))

    d = data["domain"]
    try:
        grid = build_grid(*(_num(d, k, src, lines, ("domain",), int if k in ("nx", "ny") else float)
                            for k in ("lx", "ly", "nx", "ny")))
    except InvalidParameterError as exc:
        _fail(src, lines("domain"), str(exc))

    b = data["boundary"]
    g1 = b["gamma1"]
    if isinstance(g1, str):
        g1 = [g1]
    if not isinstance(g1, list) or not all(isinstance(e, str) for e in g1):
        _fail(src, lines("boundary", "gamma1"), "boundary.gamma1 must be a list of edge names")
    try:
        partition = BoundaryPartition(g1)
    except ConfigurationError as exc:
        _fail(src, lines("boundary", "gamma1"), str(exc))

    tw = _parse_tw(b["tw"], grid, src, lines, base_dir)

    p = data["physics"]
    lam = _num(p, "lambda", src, lines, ("physics",))
    K = _parse_K(p["K"], grid, src, lines, base_dir)
    try:
        params = PhysicsParams(K, lam, tw)
    except InvalidParameterError as exc:
        _fail(src, lines("physics"), str(exc))

    s = data.get("solver", {}) or {}
    kw = {}
    for k in SCHEMA["solver"]:
        if k in s:
            if k == "advection_scheme":
                kw[k] = s[k]
            else:
                kw[k] = _num(s, k, src, lines, ("solver",), int if k.endswith("max_iter") else float)
    try:
        solver = SolverConfig(**kw)
    except InvalidParameterError as exc:
        _fail(src, lines("solver"), str(exc))

    o = data.get("output", {}) or {}
    formats = o.get("formats", ["csv"])
    if isinstance(formats, str):
        formats = [formats]
    if not isinstance(formats, list) or not set(formats) <= {"csv", "vtk"}:
        _fail(src, lines("output", "formats"), "output.formats must be a subset of [csv, vtk]")
    emit = o.get("emit_report", True)
    if not isinstance(emit, bool):
        _fail(src, lines("output", "emit_report"), "output.emit_report must be true or false")
    outdir = _resolve(base_dir, str(o.get("directory", "out")))

    v = data.get("verify", {}) or {}
    seed = _num(v, "seed", src, lines, ("verify",), int) if "seed" in v else 0
    samples = _num(v, "samples", src, lines, ("verify",), int) if "samples" in v else 100
    return RunConfig(grid, partition, params, solver, outdir, tuple(formats), emit, seed, samples, src)


def _parse_tw(entry, grid, src, lines, base_dir):
    path = ("boundary", "tw")
    if not isinstance(entry, dict) or "kind" not in entry:
        _fail(src, lines(*path), "boundary.tw must be a mapping with a 'kind'")
    kind = entry["kind"]
    if kind not in TW_KEYS:
        _fail(src, lines(*path, "kind"), f"unknown tw kind {kind!r}; expected one of {sorted(TW_KEYS)}")
    allowed = TW_KEYS[kind] | {"kind"}
    required = {"constant": ["value"], "edge-linear": ["edges"], "node-table": ["path"]}[kind]
    _check_keys(entry, allowed, required, src, lines, path)
    if kind == "constant":
        return np.full(grid.shape, _num(entry, "value", src, lines, path))
    if kind == "edge-linear":
        edges = entry["edges"]
        if not isinstance(edges, dict):
            _fail(src, lines(*path, "edges"), "boundary.tw.edges must map edge names to values")
        clean = {}
        for e, val in edges.items():
            if e not in EDGES:
                _fail(src, lines(*path, "edges", e), f"unknown edge {e!r}")
            vals = val if isinstance(val, list) else [val]
            if len(vals) not in (1, 2) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in vals):
                _fail(src, lines(*path, "edges", e), f"edge {e!r} needs a number or [start, end]")
            clean[e] = float(vals[0]) if len(vals) == 1 else (float(vals[0]), float(vals[1]))
        default = _num(entry, "default", src, lines, path) if "default" in entry else 0.0
        return edge_linear_temperature(grid, clean, default)
    rows = _read_table(_resolve(base_dir, str(entry["path"])), ("i", "j", "value"),
                       src, lines(*path, "path"))
    tw = np.full(grid.shape, np.nan)
    for r in rows:
        tw[int(r["i"]), int(r["j"])] = r["value"]
    if np.any(np.isnan(tw[grid.boundary_mask])):
        _fail(src, lines(*path, "path"), "node table does not cover every boundary node")
    return np.nan_to_num(tw)


def _parse_K(entry, grid, src, lines, base_dir):
    path = ("physics", "K")
    if isinstance(entry, list):
        if len(entry) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry):
            _fail(src, lines(*path), "physics.K must be [kx, ky] or {path: ...}")
        return constant_vector(grid, *entry)
    if isinstance(entry, dict):
        _check_keys(entry, {"path"}, ["path"], src, lines, path)
        rows = _read_table(_resolve(base_dir, str(entry["path"])), ("i", "j", "kx", "ky"),
                           src, lines(*path, "path"))
        K = np.full((2,) + grid.shape, np.nan)
        for r in rows:
            K[:, int(r["i"]), int(r["j"])] = r["kx"], r["ky"]
        if np.any(np.isnan(K)):
            _fail(src, lines(*path, "path"), "K node table does not cover every node")
        return K
    _fail(src, lines(*path), "physics.K must be [kx, ky] or {path: ...}")


def load_yaml(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}:1: cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError(f"{path}:{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    return data, _Lines(text)


def load_config(path):
    data, lines = load_yaml(path)
    return parse_config(data, lines, src=str(path), base_dir=os.path.dirname(os.path.abspath(path)))
