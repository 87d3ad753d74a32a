"""End-to-end checks of the command-line tool: outputs, exit codes, determinism."""

import json
import os
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET

exe, work = sys.argv[1], sys.argv[2]
shutil.rmtree(work, ignore_errors=True)
os.makedirs(work)
failures = []


def run(*args):
    return subprocess.run([exe, *args], capture_output=True, text=True)


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def out(name):
    return os.path.join(work, name)


def manifest_ok(d):
    m = json.load(open(os.path.join(d, "manifest.json")))
    return all(os.path.exists(p) for p in m["outputs"]) and len(m["outputs"]) > 0


r = run("analyze", "--builtin", "vdp_cubic", "--out", out("vdp"))
check(r.returncode == 0, "analyze vdp_cubic exits 0")
check(json.load(open(out("vdp/persistence.json")))["persistent"] is True, "vdp_cubic is persistent")
check(manifest_ok(out("vdp")), "analyze manifest lists existing files")

r = run("analyze", "--builtin", "hysteresis", "--lambda", "0", "--out", out("hy"))
check(r.returncode == 0, "analyze hysteresis exits 0")
rep = json.load(open(out("hy/persistence.json")))
check(any(d["group"] == "D2" and abs(d["point"][0] - 1) < 1e-3 for d in rep["degenerate_folds"]),
      "hysteresis at lambda 0 has a degenerate fold witness at x = 1")
check(rep["persistent"] is False, "hysteresis at lambda 0 is not persistent")

check(run("analyze", "--config", out("missing.json")).returncode == 2, "missing config exits 2")
check(run("analyze").returncode == 2, "no system exits 2")
check(run("analyze", "--builtin", "nope").returncode == 2, "unknown builtin exits 2")

r = run("trace", "--builtin", "vdp_cubic", "--ic", "2", "-1", "--svg", out("vdp.svg"), "--out", out("tr"))
check(r.returncode == 0, "trace vdp_cubic exits 0")
rows = open(out("tr/trajectory.csv")).read().splitlines()
check(rows[0] == "segment_id,kind,x,y1,t_slow", "trajectory header")
jumps = {int(row.split(",")[0]) for row in rows[1:] if row.split(",")[1] == "fast"}
check(len(jumps) >= 3, "initial relaxation plus two jumps")
root = ET.parse(out("vdp.svg")).getroot()
check(root.tag.endswith("svg") and len(list(root.iter())) > 5, "SVG is well formed")

check(run("trace", "--builtin", "vdp_cubic", "--ic", "9", "0", "--out", out("tr2")).returncode == 2,
      "start outside the box exits 2")

r = run("sweep", "--builtin", "fold_tangency", "--jobs", "4", "--out", out("ft"))
check(r.returncode == 0, "sweep fold_tangency exits 0")
ev = json.load(open(out("ft/events.json")))
check(any(e["type"] == "hyperbolic_fold_tangency" and -0.02 <= e["lambda0"] <= 0.02 for e in ev),
      "fold tangency event inside the interval")
check(run("sweep", "--builtin", "vdp_cubic", "--out", out("e")).returncode == 2, "empty interval exits 2")
check(run("sweep", "--builtin", "fold_tangency", "--interval", "0.1", "0.1", "--out", out("e")).returncode == 2,
      "degenerate interval exits 2")

r = run("sweep", "--builtin", "fold_tangency", "--jobs", "1", "--out", out("ft1"))
check(open(out("ft/events.json")).read() == open(out("ft1/events.json")).read(), "sweep output independent of jobs")

r = run("simulate", "--builtin", "fold_tangency", "--out", out("sim1"))
check(r.returncode == 0, "fold_tangency default simulation completes")
r = run("simulate", "--builtin", "fold_tangency", "--out", out("sim2"))
for f in ("simulation.csv", "stats.json"):
    check(open(out("sim1/" + f), "rb").read() == open(out("sim2/" + f), "rb").read(), f + " is deterministic")
st = json.load(open(out("sim1/stats.json")))
check(st["status"] == "completed" and st["cycle"] is not None, "fold_tangency settles on a cycle")
check(open(out("sim1/simulation.csv")).readline().strip() == "t,x,y1", "simulation header")

r = run("simulate", "--builtin", "hysteresis", "--out", out("simh"))
check(r.returncode == 0, "hysteresis default simulation completes")

# with h = x - 3/2 the slow flow runs down every in-box branch until it leaves
r = run("simulate", "--builtin", "aligned_double_limit", "--out", out("sima"))
check(r.returncode == 3, "aligned default simulation escapes with exit 3")
check(json.load(open(out("sima/stats.json")))["status"] == "escaped", "escape is annotated")

check(run("simulate", "--builtin", "vdp_cubic", "--epsilon", "0", "--out", out("s0")).returncode == 2,
      "zero epsilon exits 2")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
