import numpy as np
import pytest

from convexscatter.config import KINDS, SCHEMAS, bundled, load, parse_body, parse_text
from convexscatter.errors import ConfigError
from convexscatter.geometry import Ball, ConvexBody, Ellipsoid

BALLS = "body1 = ball center=-2,0,0 radius=1\nbody2 = ball center=2,0,0 radius=1\n"


def test_bundled_scenario_loads():
    cfg = load(bundled())
    assert cfg.kind == "certify-weight"
    assert cfg.params == {"c1": 2.0, "samples": 100_000}
    assert len(cfg.scene.bodies) == 2 and cfg.scene.gap == pytest.approx(2.0)


def test_comments_blank_lines_and_defaults():
    cfg = parse_text("# header\n\nkind = trap-report  # inline\n" + BALLS +
                     "escape_radius = 10\nhorizons = 10, 40\nsamples = 100\n")
    assert cfg.params["x0"] == (0.0, 0.0, 0.0)
    assert cfg.params["horizons"] == (10.0, 40.0)
    assert cfg.seed == 0 and cfg.out is None


def test_every_kind_has_a_schema():
    assert set(KINDS) == set(SCHEMAS)


def test_resolved_lists_every_tunable():
    cfg = parse_text("kind = solve\n" + BALLS + "h = 0.2\nL = 4\nsteps = 10\nseed = 3\n")
    res = cfg.resolved()
    assert set(res["params"]) == set(SCHEMAS["solve"])
    assert res["seed"] == 3 and res["kind"] == "solve"
    assert res["bodies"]["body1"].startswith("ball")


@pytest.mark.parametrize("text, key, line", [
    ("kind = trace\nbogus = 1\n", "bogus", 2),
    ("kind = trap-report\n" + BALLS + "escape_radius = 10\nhorizons = 10\nsamples = 0\n", "samples", 6),
    ("kind = trap-report\n" + BALLS + "escape_radius = 10\nhorizons = \nsamples = 5\n", "horizons", 5),
    ("kind = certify-weight\n" + BALLS + "c1 = -2\n", "c1", 4),
    ("kind = certify-weight\n" + BALLS + "c1 = 2\nc1 = 3\n", "c1", 5),
    ("kind = certify-weight\n" + BALLS + "c1 = abc\n", "c1", 4),
    ("kind = solve\n" + BALLS + "h = 0.2\nL = 4\nsteps = 2.5\n", "steps", 6),
    ("kind = solve\n" + BALLS + "h = 0.2\nL = 4\nsteps = 5\nquintic = maybe\n", "quintic", 7),
    ("kind = solve\n" + BALLS + "h = 0.2\nL = 4\nsteps = 5\ncfl = 1.2\n", "cfl", 7),
    ("kind = trace\norigin = 0,0\n", "origin", 2),
    ("kind = trace\nseed = -1\n", "seed", 2),
    ("kind = nope\n", "kind", 1),
])
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert info.value.key == key
    assert info.value.line == line
    assert f"key '{key}'" in str(info.value) and f"line {line}" in str(info.value)


def test_missing_keys():
    with pytest.raises(ConfigError, match="kind"):
        parse_text("c1 = 2\n")
    with pytest.raises(ConfigError) as info:
        parse_text("kind = certify-weight\n" + BALLS)
    assert info.value.key == "c1"
    with pytest.raises(ConfigError, match="body2 given without body1"):
        parse_text("kind = certify-weight\nbody2 = ball center=0,0,0 radius=1\nc1 = 2\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_text("kind = trace\njust words\n")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load("/nonexistent/path.cfg")


# -- body descriptors ------------------------------------------------------------------

def test_parse_body_shapes():
    b = parse_body("ball center=1,2,3 radius=0.5")
    assert isinstance(b, Ball) and b.radius == 0.5
    e = parse_body("ellipsoid center=0,0,0 semiaxes=2,1,1")
    assert isinstance(e, Ellipsoid)
    R = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], float)
    s = parse_body("superellipsoid center=0,0,0 semiaxes=1,2,3 exponent=4 rotation="
                   + ",".join(map(str, R.ravel())))
    assert isinstance(s, ConvexBody) and s.exponent == 4
    np.testing.assert_allclose(s.rotation, R)


@pytest.mark.parametrize("text, msg", [
    ("", "empty"),
    ("cube center=0,0,0", "unknown body shape"),
    ("ball center=0,0,0", "missing body field"),
    ("ball center=0,0,0 radius=1 colour=red", "unknown body field"),
    ("ball center=0,0 radius=1", "needs 3 numbers"),
    ("ball center=0,0,0 radius=-1", "radius"),
    ("ball center=0,0,0 radius=1 radius=2", "duplicate"),
    ("ball center=0,0,0 radius", "name=value"),
    ("ellipsoid center=0,0,0 semiaxes=1,0,1", "positive"),
    ("ellipsoid center=0,0,0 semiaxes=1,1,1 rotation=1,1,0,0,1,0,0,0,1", "orthonormal"),
    ("superellipsoid center=0,0,0 semiaxes=1,1,1 exponent=3", "even integer"),
])
def test_parse_body_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_body(text, "body1", 7)
