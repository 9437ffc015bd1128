"""Run configuration: a sectioned YAML file, validated fail-closed.

Every key is optional; omitted keys take the defaults below. Unknown sections or keys
are errors. Example::

    mesh:
      dimension: 2
      bounds: [[-0.5, 0.5], [-0.5, 0.5]]
      subdivisions: [32, 32]
      diagonal_rule: fixed        # or alternating; or give `file: mesh.txt`
    physics: {alpha: 1.0, beta: 1.0}
    scheme:
      theta: 0.75
      T: 5.0
      steps: 1000
      snapshot_interval: 50
    torque:
      kind: stt                   # none | stt | sot
      lambda: 1.0
      mu: 1.0
      j: [1.0, 0.0]
    initial: {kind: paper_skyrmion}
    output: {dir: out/stt}
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigParseError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key:
            where += f"key '{key}'"
        if line:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class MeshSection:
    dimension: int = 2
    bounds: tuple = ((-0.5, 0.5), (-0.5, 0.5))
    subdivisions: tuple = (32, 32)
    diagonal_rule: str = "fixed"
    file: str | None = None


@dataclass(frozen=True)
class PhysicsSection:
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class SchemeSection:
    theta: float = 0.75
    T: float = 5.0
    steps: int = 1000
    snapshot_interval: int = 50
    tol: float = 1e-10
    max_iter: int | None = None
    theta_override: bool = False
    linear_solver: str = "gmres"


@dataclass(frozen=True)
class TorqueSection:
    kind: str = "none"
    # field names mirror the config keys; `lambda` is reserved in Python
    lam: float = 1.0
    mu: float = 1.0
    j: tuple | None = None
    c: tuple = (1.0,) * 8


@dataclass(frozen=True)
class InitialSection:
    kind: str = "paper_skyrmion"
    vector: tuple = (0.0, 0.0, 1.0)
    path: str | None = None


@dataclass(frozen=True)
class OutputSection:
    dir: str = "output"


@dataclass(frozen=True)
class OracleSection:
    compare_oracle: bool = False
    modes: int = 32
    quadrature: int = 512
    substeps: int = 50
    times: tuple = (0.25,)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSection = field(default_factory=MeshSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    torque: TorqueSection = field(default_factory=TorqueSection)
    initial: InitialSection = field(default_factory=InitialSection)
    output: OutputSection = field(default_factory=OutputSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    base_dir: str = field(default=".", compare=False)

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q


SECTIONS = {
    "mesh": MeshSection,
    "physics": PhysicsSection,
    "scheme": SchemeSection,
    "torque": TorqueSection,
    "initial": InitialSection,
    "output": OutputSection,
    "oracle": OracleSection,
}
_RENAMED = {("torque", "lambda"): "lam"}
_FIELD_TO_KEY = {(s, f): k for (s, k), f in _RENAMED.items()}


def _key_lines(text: str) -> dict:
    """Map 'section' and 'section.key' to 1-based line numbers."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigParseError(str(exc).splitlines()[0], line=mark.line + 1 if mark else None) from exc
    lines = {}
    if isinstance(root, yaml.MappingNode):
        for knode, vnode in root.value:
            lines[knode.value] = knode.start_mark.line + 1
            if isinstance(vnode, yaml.MappingNode):
                for k2, _ in vnode.value:
                    lines[f"{knode.value}.{k2.value}"] = k2.start_mark.line + 1
    return lines


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _coerce(section: str, key: str, ftype: str, value: Any, line):
    full = f"{section}.{key}"

    def bad(msg):
        return ConfigParseError(msg, full, line)

    if value is None:
        if "None" in ftype:
            return None
        raise bad("must not be null")
    if ftype.startswith("float"):
        if isinstance(value, str):
            # YAML 1.1 reads exponent-only literals such as 1e-10 as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if not _is_num(value):
            raise bad(f"expected a number, got {value!r}")
        return float(value)
    if ftype.startswith("int"):
        if not isinstance(value, int) or isinstance(value, bool):
            raise bad(f"expected an integer, got {value!r}")
        return value
    if ftype.startswith("bool"):
        if not isinstance(value, bool):
            raise bad(f"expected true/false, got {value!r}")
        return value
    if ftype.startswith("str"):
        if not isinstance(value, str):
            raise bad(f"expected a string, got {value!r}")
        return value
    if ftype.startswith("tuple"):
        if not isinstance(value, list):
            raise bad(f"expected a list, got {value!r}")
        if key == "bounds":
            if not all(isinstance(b, list) and len(b) == 2 and all(_is_num(x) for x in b) for b in value):
                raise bad("expected a list of [lo, hi] pairs")
            return tuple(tuple(float(x) for x in b) for b in value)
        if key == "subdivisions":
            if not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
                raise bad("expected a list of integers")
            return tuple(value)
        if not all(_is_num(x) for x in value):
            raise bad("expected a list of numbers")
        return tuple(float(x) for x in value)
    raise AssertionError(ftype)


def config_from_dict(data: dict, lines: dict | None = None, base_dir: str = ".") -> RunConfig:
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError("top level must be a mapping of sections")
    sections = {}
    for sname, body in data.items():
        if sname not in SECTIONS:
            raise ConfigParseError("unknown section", sname, lines.get(sname))
        if body is None:
            body = {}
        if not isinstance(body, dict):
            raise ConfigParseError("section must be a mapping", sname, lines.get(sname))
        cls = SECTIONS[sname]
        ftypes = {f.name: str(f.type) for f in dataclasses.fields(cls)}
        kw = {}
        for key, value in body.items():
            fname = _RENAMED.get((sname, key), key)
            if fname not in ftypes or (sname, fname) in _FIELD_TO_KEY and key == fname:
                raise ConfigParseError("unknown key", f"{sname}.{key}", lines.get(f"{sname}.{key}"))
            kw[fname] = _coerce(sname, key, ftypes[fname], value, lines.get(f"{sname}.{key}"))
        if sname == "mesh" and kw.get("dimension") == 1:
            kw.setdefault("bounds", ((0.0, 1.0),))
            kw.setdefault("subdivisions", (256,))
        sections[sname] = cls(**kw)
    cfg = RunConfig(**sections, base_dir=str(base_dir))
    validate(cfg, lines)
    return cfg


def validate(cfg: RunConfig, lines: dict | None = None) -> None:
    lines = lines or {}

    def err(key, msg):
        return ConfigParseError(msg, key, lines.get(key) or lines.get(key.split(".")[0]))

    m, s, t, i, o = cfg.mesh, cfg.scheme, cfg.torque, cfg.initial, cfg.oracle
    if m.file is not None:
        if not cfg.resolve(m.file).is_file():
            raise err("mesh.file", f"mesh file {m.file!r} does not exist")
    else:
        if m.dimension not in (1, 2):
            raise err("mesh.dimension", "must be 1 or 2")
        if len(m.bounds) != m.dimension or any(hi <= lo for lo, hi in m.bounds):
            raise err("mesh.bounds", f"need {m.dimension} non-empty [lo, hi] intervals")
        if len(m.subdivisions) != m.dimension or any(n < 1 for n in m.subdivisions):
            raise err("mesh.subdivisions", f"need {m.dimension} positive integers")
        if m.diagonal_rule not in ("fixed", "alternating"):
            raise err("mesh.diagonal_rule", "must be 'fixed' or 'alternating'")
    if not (cfg.physics.alpha > 0):
        raise err("physics.alpha", "must be positive")
    if not (cfg.physics.beta > 0):
        raise err("physics.beta", "must be positive")
    lo = 0.0 if s.theta_override else 0.5
    if not (lo < s.theta <= 1.0):
        raise err(
            "scheme.theta",
            f"theta = {s.theta} is outside (1/2, 1], the range in which the scheme is proven to "
            "converge; set scheme.theta_override: true to allow (0, 1]",
        )
    if not s.T > 0:
        raise err("scheme.T", "must be positive")
    if s.steps < 1:
        raise err("scheme.steps", "must be >= 1")
    if s.snapshot_interval < 1:
        raise err("scheme.snapshot_interval", "must be >= 1")
    if not s.tol > 0:
        raise err("scheme.tol", "must be positive")
    if s.max_iter is not None and s.max_iter < 1:
        raise err("scheme.max_iter", "must be >= 1")
    if s.linear_solver not in ("gmres", "direct"):
        raise err("scheme.linear_solver", "must be 'gmres' or 'direct'")
    if t.kind not in ("none", "stt", "sot"):
        raise err("torque.kind", "must be one of none, stt, sot")
    if t.kind == "stt":
        if t.j is None:
            raise err("torque.j", "required when torque.kind = stt")
        if abs(math.hypot(*t.j) - 1.0) > 1e-12:
            raise err("torque.j", "must be a unit vector")
    if t.j is not None and m.file is None and len(t.j) != m.dimension:
        raise err("torque.j", f"must have {m.dimension} components")
    if len(t.c) != 8:
        raise err("torque.c", "needs exactly 8 coefficients")
    if i.kind not in ("paper_skyrmion", "constant", "file", "smooth_1d"):
        raise err("initial.kind", "must be one of paper_skyrmion, constant, file, smooth_1d")
    if i.kind == "constant":
        if len(i.vector) != 3 or abs(math.sqrt(sum(v * v for v in i.vector)) - 1.0) > 1e-8:
            raise err("initial.vector", "must be a unit vector in R^3")
    if i.kind == "file":
        if i.path is None or not cfg.resolve(i.path).is_file():
            raise err("initial.path", f"initial-condition file {i.path!r} does not exist")
    if i.kind == "paper_skyrmion" and m.file is None and m.dimension != 2:
        raise err("initial.kind", "paper_skyrmion is defined on a 2D domain")
    if o.compare_oracle and (m.file is not None or m.dimension != 1):
        raise err("oracle.compare_oracle", "the spectral oracle needs a generated 1D mesh")
    if o.modes < 1 or o.quadrature < o.modes or o.substeps < 1:
        raise err("oracle", "need 1 <= modes <= quadrature and substeps >= 1")


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from exc
    lines = _key_lines(text)
    data = yaml.safe_load(text)
    return config_from_dict(data, lines, base_dir=str(path.parent))


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for sname, cls in SECTIONS.items():
        sec = getattr(cfg, sname)
        body = {}
        for f in dataclasses.fields(cls):
            v = getattr(sec, f.name)
            if isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            body[_FIELD_TO_KEY.get((sname, f.name), f.name)] = v
        out[sname] = body
    return out


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
