"""Plain-text scenario files.

Grammar
-------
One ``key = value`` pair per line. ``#`` starts a comment; blank lines are
ignored; keys may appear only once. Values are

* numbers: ``2``, ``1e-3``
* vectors: ``x,y,z`` (comma separated, no spaces needed)
* lists: ``10, 40, 160``
* booleans: ``true`` / ``false``
* body descriptors (keys ``body1`` and ``body2``)::

      ball center=-2,0,0 radius=1
      ellipsoid center=0,0,0 semiaxes=2,1,1 [rotation=r11,r12,...,r33]
      superellipsoid center=0,0,0 semiaxes=1,1,1 exponent=4 [rotation=...]

  ``rotation`` lists the 3x3 frame row by row; its columns are the body axes.

Every scenario needs ``kind``; ``seed`` (default 0) and ``out`` are optional
everywhere. The remaining keys depend on the kind (see ``SCHEMAS``). Unknown
keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Ball, ConvexBody, Ellipsoid, Scene

KINDS = ("trace", "trap-report", "reconcentrate", "certify-weight", "minimal-c1", "m-alpha", "solve",
         "compare-free", "nonconcentration", "morawetz-check", "volume-lemma")


@dataclass(frozen=True)
class Param:
    kind: str  # float | int | vec3 | floats | bool
    default: object = None
    check: object = None  # callable(value) -> error message or None
    doc: str = ""

    @property
    def required(self) -> bool:
        return self.default is None


def _positive(v):
    vals = v if isinstance(v, (list, tuple)) else [v]
    return None if all(x > 0 for x in vals) else "must be positive"


def _unit_interval(v):
    vals = v if isinstance(v, (list, tuple)) else [v]
    return None if all(0 < x < 1 for x in vals) else "must lie in (0, 1)"


def _cfl(v):
    return None if 0 < v <= 0.9 else "must lie in (0, 0.9]"


def _nonzero_vec(v):
    return None if any(x != 0 for x in v) else "must be a nonzero vector"


def _at_least(n):
    def check(v):
        return None if v >= n else f"must be at least {n}"
    return check


def _nonempty(v):
    return None if len(v) > 0 else "must not be empty"


def _all(*checks):
    def check(v):
        for c in checks:
            msg = c(v)
            if msg:
                return msg
        return None
    return check


ORIGIN = (0.0, 0.0, 0.0)

SCHEMAS: dict[str, dict[str, Param]] = {
    "trace": {
        "origin": Param("vec3"),
        "direction": Param("vec3", check=_nonzero_vec),
        "horizon": Param("float", check=_positive),
        "escape_radius": Param("float", check=_positive),
    },
    "trap-report": {
        "x0": Param("vec3", ORIGIN),
        "escape_radius": Param("float", check=_positive),
        "horizons": Param("floats", check=_all(_nonempty, _positive)),
        "samples": Param("int", check=_at_least(1)),
    },
    "reconcentrate": {
        "x": Param("vec3"),
        "x0": Param("vec3"),
        "t": Param("float", check=_positive),
        "eps": Param("floats", check=_all(_nonempty, _positive)),
        "angular_resolution": Param("float", 0.02, _positive),
    },
    "certify-weight": {
        "c1": Param("float", check=_positive),
        "samples": Param("int", 100_000, _at_least(1)),
    },
    "minimal-c1": {
        "tol": Param("float", 1e-3, _positive),
        "samples": Param("int", 20_000, _at_least(1)),
    },
    "m-alpha": {
        "c1": Param("float", check=_positive),
        "A": Param("float", check=_positive),
        "alphas": Param("floats", check=_all(_nonempty, _unit_interval)),
        "samples": Param("int", 1_000_000, _at_least(1)),
    },
    "solve": {
        "h": Param("float", check=_positive),
        "L": Param("float", check=_positive),
        "steps": Param("int", check=_at_least(1)),
        "cfl": Param("float", 0.5, _cfl),
        "every": Param("int", 5, _at_least(1)),
        "quintic": Param("bool", True),
        "center": Param("vec3", (0.0, 3.0, 0.0)),
        "shell_radius": Param("float", 1.2, _positive),
        "sigma": Param("float", 0.35, _positive),
        "amplitude": Param("float", 1.0),
        "A": Param("float", 0.0, lambda v: None if v >= 0 else "must be nonnegative"),
        "c1": Param("float", 0.0, lambda v: None if v >= 0 else "must be nonnegative"),
    },
    "compare-free": {
        "h": Param("float", check=_positive),
        "sigma": Param("float", 0.75, _positive),
        "lam": Param("float", 1.0, _positive),
        "distances": Param("floats", check=_all(_nonempty, _positive)),
    },
    "nonconcentration": {
        "h": Param("float", check=_positive),
        "L": Param("float", check=_positive),
        "sigma": Param("float", 1.0, _positive),
        "center": Param("vec3"),
        "lams": Param("floats", check=_all(_nonempty, _positive)),
        "C": Param("floats", check=_all(_nonempty, _positive)),
        "T": Param("float", check=_positive),
    },
    "morawetz-check": {
        "h": Param("float", check=_positive),
        "L": Param("float", check=_positive),
        "c1": Param("float", check=_positive),
        "T": Param("float", check=_positive),
        "cfl": Param("float", 0.5, _cfl),
        "quintic": Param("bool", True),
        "center": Param("vec3", (0.0, 1.75, 0.0)),
        "sigma": Param("float", 0.75, _positive),
        "amplitude": Param("float", 1.0),
    },
    "volume-lemma": {
        "ts": Param("floats", (10.0, 30.0, 100.0), _all(_nonempty, _positive)),
        "Rs": Param("floats", (0.1, 1.0), _all(_nonempty, _positive)),
        "rs": Param("floats", (0.5, 2.0), _all(_nonempty, _positive)),
        "eps0": Param("float", 0.2, _positive),
        "samples": Param("int", 100_000, _at_least(10_000)),
    },
}

COMMON = {"kind", "seed", "out", "body1", "body2"}


@dataclass
class ScenarioConfig:
    kind: str
    scene: Scene
    params: dict
    seed: int = 0
    out: str | None = None
    bodies: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    path: str | None = None

    def resolved(self) -> dict:
        """Every tunable of the run, defaults included, in JSON-friendly form."""
        def clean(v):
            if isinstance(v, tuple):
                return [clean(x) for x in v]
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v
        return {
            "bodies": dict(sorted(self.bodies.items())),
            "kind": self.kind,
            "params": {k: clean(self.params[k]) for k in sorted(self.params)},
            "seed": self.seed,
        }


def _numbers(text: str, key: str, line: int) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(p == "" for p in parts):
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", key, line)
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}", key, line) from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError("numbers must be finite", key, line)
    return vals


def _convert(p: Param, text: str, key: str, line: int):
    if p.kind == "float":
        vals = _numbers(text, key, line)
        if len(vals) != 1:
            raise ConfigError("expected a single number", key, line)
        return vals[0]
    if p.kind == "int":
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}", key, line) from None
        if not v.is_integer():
            raise ConfigError(f"expected an integer, got {text!r}", key, line)
        return int(v)
    if p.kind == "vec3":
        vals = _numbers(text, key, line)
        if len(vals) != 3:
            raise ConfigError("expected three comma-separated numbers", key, line)
        return tuple(vals)
    if p.kind == "floats":
        return tuple(_numbers(text, key, line))
    if p.kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected true or false, got {text!r}", key, line)
    raise AssertionError(p.kind)


def parse_body(text: str, key: str = "body", line: int | None = None) -> ConvexBody:
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty body descriptor", key, line)
    shape, fields = tokens[0].lower(), {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"expected name=value in body descriptor, got {tok!r}", key, line)
        name, val = tok.split("=", 1)
        if name in fields:
            raise ConfigError(f"duplicate body field {name!r}", key, line)
        fields[name] = val
    allowed = {
        "ball": {"center", "radius"},
        "ellipsoid": {"center", "semiaxes", "rotation"},
        "superellipsoid": {"center", "semiaxes", "exponent", "rotation"},
    }
    if shape not in allowed:
        raise ConfigError(f"unknown body shape {shape!r} (ball, ellipsoid, superellipsoid)", key, line)
    extra = set(fields) - allowed[shape]
    if extra:
        raise ConfigError(f"unknown body field(s) {sorted(extra)} for {shape}", key, line)
    required = allowed[shape] - {"rotation"}
    missing = required - set(fields)
    if missing:
        raise ConfigError(f"missing body field(s) {sorted(missing)} for {shape}", key, line)

    def vec(name, n):
        vals = _numbers(fields[name], key, line)
        if len(vals) != n:
            raise ConfigError(f"body field {name!r} needs {n} numbers", key, line)
        return np.array(vals)

    center = vec("center", 3)
    try:
        if shape == "ball":
            r = _numbers(fields["radius"], key, line)
            if len(r) != 1 or r[0] <= 0:
                raise ConfigError("radius must be one positive number", key, line)
            return Ball(center, r[0])
        semi = vec("semiaxes", 3)
        if np.any(semi <= 0):
            raise ConfigError("semiaxes must be positive", key, line)
        rot = vec("rotation", 9).reshape(3, 3) if "rotation" in fields else None
        if rot is not None and not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise ConfigError("rotation must be orthonormal", key, line)
        if shape == "ellipsoid":
            return Ellipsoid(center, semi, rot)
        p = _numbers(fields["exponent"], key, line)
        if len(p) != 1 or not float(p[0]).is_integer() or p[0] < 2 or int(p[0]) % 2:
            raise ConfigError("exponent must be an even integer >= 2", key, line)
        return ConvexBody(center, semi, int(p[0]), rot)
    except ValueError as exc:
        raise ConfigError(str(exc), key, line) from None


def parse_text(text: str, path: str | None = None) -> ScenarioConfig:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", None, lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("missing key", None, lineno)
        if key in raw:
            raise ConfigError(f"duplicate key (first set on line {raw[key][1]})", key, lineno)
        raw[key] = (value, lineno)

    if "kind" not in raw:
        raise ConfigError("missing required key", "kind", None)
    kind, kline = raw["kind"]
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", "kind", kline)
    schema = SCHEMAS[kind]
    for key, (_, lineno) in raw.items():
        if key not in COMMON and key not in schema:
            raise ConfigError(f"unknown key for kind {kind!r}", key, lineno)

    seed = 0
    if "seed" in raw:
        seed = _convert(Param("int"), raw["seed"][0], "seed", raw["seed"][1])
        if seed < 0:
            raise ConfigError("seed must be nonnegative", "seed", raw["seed"][1])

    bodies, descriptors = [], {}
    for key in ("body1", "body2"):
        if key in raw:
            value, lineno = raw[key]
            bodies.append(parse_body(value, key, lineno))
            descriptors[key] = value
    if "body2" in raw and "body1" not in raw:
        raise ConfigError("body2 given without body1", "body2", raw["body2"][1])

    params = {}
    for name, p in schema.items():
        if name in raw:
            value, lineno = raw[name]
            v = _convert(p, value, name, lineno)
            if p.check is not None:
                msg = p.check(v)
                if msg:
                    raise ConfigError(msg, name, lineno)
            params[name] = v
        elif p.required:
            raise ConfigError(f"missing required key for kind {kind!r}", name, None)
        else:
            params[name] = p.default

    out = raw["out"][0] if "out" in raw else None
    lines = {k: v[1] for k, v in raw.items()}
    return ScenarioConfig(kind, Scene(bodies), params, seed, out, descriptors, lines, path)


def bundled(name: str = "two_balls") -> str:
    """Path of a scenario shipped with the package."""
    from importlib import resources
    return str(resources.files("convexscatter") / "scenarios" / f"{name}.cfg")


def load(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None) from None
    return parse_text(text, path)
