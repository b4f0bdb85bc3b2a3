"""Smoke test for the navagent_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/navagent_py-*.whl
"""

import json
import math
import pathlib

import navagent_py as nav

ROOT = pathlib.Path(__file__).resolve().parent.parent

# projection round trip near the fixture origin
x, y = nav.project(122.445374, 31.257936, 122.46, 31.27)
lon, lat = nav.unproject(122.445374, 31.257936, x, y)
assert abs(lon - 122.46) < 1e-9 and abs(lat - 31.27) < 1e-9

# reciprocal courses 4 nm apart: head-on, meeting in 12 min at 10 kn each
own = (0.0, 0.0, 0.0, 10.0)
tgt = (0.0, 7408.0, 180.0, 10.0)
rng, brg, dcpa, tcpa = nav.cpa(own, tgt)
assert math.isclose(rng, 7408.0) and dcpa < 1e-6
assert math.isclose(tcpa, 720.0, rel_tol=1e-9)
assert nav.classify(own, tgt) == "HeadOn"
assert nav.assess_risk(rng, dcpa, tcpa) == "GiveWay"

scene = json.dumps({
    "own": {"x": 0.0, "y": 0.0, "course_deg": 0.0, "speed_kn": 10.0},
    "targets": [{"id": "A", "x": 0.0, "y": 7408.0, "course_deg": 180.0, "speed_kn": 10.0}],
})
text = nav.depict(scene)
assert "encounter: head-on" in text, text
assert "encounter:" not in nav.depict(scene, labeled=False)

answer = nav.rule_decision(scene)
parsed = json.loads(nav.parse_action(answer))
assert parsed["kind"] == "final" and parsed["maneuver"] == "StarboardTurn"

try:
    nav.parse_action("no directive here")
except ValueError:
    pass
else:
    raise AssertionError("malformed response accepted")

config = (ROOT / "fixtures" / "head_on.json").read_text()
log, metrics = nav.simulate(config)
first = json.loads(log.splitlines()[0])
assert first["schema"] == nav.LOG_SCHEMA
m = json.loads(metrics)
assert m["goal_reached"] and m["min_own_distance"] > 0.15 * 1852

setd = nav.gen_setd(40, 7).splitlines()
assert len(setd) == 41
assert nav.gen_setd(40, 7).splitlines() == setd
scadd = nav.gen_scadd(5, 7).splitlines()
assert len(scadd) == 6

print("python smoke test passed")
