"""Smoke test for the lelab extension module. Run after `pip install crates/python`."""

import math
import tempfile

import lelab

point = lelab.HyperbolaPoint("5/3", 8)
assert math.isclose(point.q, 5 / 3)
assert point.regime in {"I", "II", "III", "Unsupported"}

try:
    lelab.solve_ground_state(lelab.HyperbolaPoint("4/3", 8))
except (ValueError, lelab.LelabError):
    pass
else:
    raise AssertionError("the log point must be rejected")

gs = lelab.solve_ground_state(point)
for r in (0.0, 1.0, 5.0, 20.0):
    u, v, _, _ = gs.eval(r)
    talenti = (1 + r * r / 48) ** -3
    assert abs(v - talenti) < 1e-6, (r, v, talenti)
    assert abs(u - v) < 1e-6

c = gs.constants()
assert all(x > 0 for x in c.values[:3])
assert math.isclose(c.phi_coefficient(), 3 / 14, rel_tol=1e-12)

kappa, target = lelab.manifold_check("sphere", 8, 2.0)
assert abs(kappa / target - 1) < 1e-2

k = gs.kernel_residual(0)
assert k["mode0"] < 1e-5 and k["mode1"] < 1e-5 and k["control"] >= 0.1

schema = lelab.config_schema()
assert "reduction" in schema["properties"]

with tempfile.TemporaryDirectory() as tmp:
    cfg = lelab.default_config().replace('output_dir = "lelab-out"', f'output_dir = "{tmp}/out"')
    report = lelab.run(cfg)
    verdicts = report["verdicts"]
    assert verdicts and all(v["pass"] for v in verdicts), verdicts

print("smoke test ok")
