"""End-to-end checks of the bures-flow command line, one case per ctest entry.

usage: check_cli.py BINARY CASE WORKDIR SCHEMA
"""

import csv
import filecmp
import json
import math
import os
import shutil
import subprocess
import sys

BIN, CASE, WORK, SCHEMA = sys.argv[1:5]

UNIT = '{"mean":[0,0,0],"rot":[1,0,0,0],"scale":[1,1,1]}'
FOUR = '{"mean":[1,0,0],"rot":[1,0,0,0],"scale":[2,2,2]}'


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.update(env or {})
    return subprocess.run([BIN, *args], capture_output=True, text=True, env=full_env)


def expect(cond, msg, proc=None):
    if not cond:
        if proc is not None:
            msg += f"\nexit={proc.returncode}\nstdout:\n{proc.stdout}\nstderr:\n{proc.stderr}"
        raise SystemExit("FAILED: " + msg)


def strict_json(text):
    def reject(c):
        raise ValueError(f"non-standard constant {c}")
    return json.loads(text, parse_constant=reject)


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def distance_identical():
    p = run("distance", UNIT, UNIT)
    expect(p.returncode == 0, "identical distance exits 0", p)
    out = strict_json(p.stdout)
    expect(out["w2"] == 0.0 and out["w2_sq"] == 0.0, "identical gaussians are at distance 0", p)
    expect(set(out) == {"w2", "w2_sq", "mean_sq", "trace_term"}, "distance keys", p)


def distance_diagonal():
    p = run("distance", UNIT, FOUR)
    out = strict_json(p.stdout)
    expect(abs(out["w2"] - 2.0) <= 1e-12 and abs(out["w2_sq"] - 4.0) <= 1e-12, "closed form 2 / 4", p)
    expect(out["mean_sq"] == 1.0 and abs(out["trace_term"] - 3.0) <= 1e-12, "decomposition 1 + 3", p)


def distance_scene():
    scene = os.path.join(WORK, "scene.json")
    with open(scene, "w") as f:
        f.write('{"frames":[[%s,%s],[%s,%s]],"meta":{}}' % (UNIT, FOUR, FOUR, UNIT))
    p = run("distance", "--scene", scene, "--at", "0:0", "--at", "1:0")
    expect(p.returncode == 0 and abs(strict_json(p.stdout)["w2"] - 2.0) <= 1e-12, "scene lookup", p)
    p = run("distance", "--scene", scene, "--at", "0:0", "--at", "5:0")
    expect(p.returncode == 2 and "frames[5][0]" in p.stderr, "out-of-range selector exits 2", p)


def distance_malformed():
    p = run("distance", '{"mean":[0,0],"rot":[1,0,0,0],"scale":[1,1,1]}', UNIT)
    expect(p.returncode == 2 and "mean" in p.stderr, "malformed mean exits 2 naming the field", p)
    p = run("distance", UNIT, '{"mean":[0,0,0],"rot":[1,0,0,0],"scale":[1,-1,1]}')
    expect(p.returncode == 2 and "scale" in p.stderr, "negative scale exits 2 naming the field", p)
    p = run("distance", UNIT, "{not json")
    expect(p.returncode == 2 and "second gaussian" in p.stderr, "unparsable atom exits 2", p)


def distance_missing_file():
    path = os.path.join(WORK, "does_not_exist.json")
    p = run("distance", "--scene", path, "--at", "0:0", "--at", "0:1")
    expect(p.returncode == 2 and path in p.stderr, "missing file exits 2 and names the path", p)


def track_row_count():
    out = os.path.join(WORK, "out")
    p = run("track", "--preset", "default", "--mode", "both", "--seeds", "20", "--out", out)
    expect(p.returncode == 0, "track exits 0", p)
    rows = read_rows(os.path.join(out, "metrics.csv"))
    expect(len(rows) == 40, f"40 metric rows, got {len(rows)}")
    with open(os.path.join(out, "metrics.csv")) as f:
        header = f.readline().strip()
    expect(header == "scenario,mode,seed,mean_rmse,w2_rmse,temporal_roughness,aepe_2d", "metrics header")
    keys = [(r["scenario"], r["mode"], int(r["seed"])) for r in rows]
    expect(keys == sorted(keys), "rows sorted by scenario, mode, seed")
    expect({r["mode"] for r in rows} == {"obs", "filtered"}, "both modes present")


def track_zero_noise():
    out = os.path.join(WORK, "out")
    p = run("track", "--preset", "zero_noise", "--seeds", "2", "--out", out)
    expect(p.returncode == 0, "zero-noise track exits 0", p)
    for r in read_rows(os.path.join(out, "metrics.csv")):
        for k in ("mean_rmse", "w2_rmse", "temporal_roughness", "aepe_2d"):
            expect(math.isfinite(float(r[k])), f"{k} finite")
        expect(float(r["mean_rmse"]) <= 1e-9 and float(r["w2_rmse"]) <= 1e-9, "metrics at the floor")
        expect(float(r["aepe_2d"]) <= 1e-6, "aepe at the floor")
    expect("mean_rmse" in p.stdout and "filtered" in p.stdout and "obs" in p.stdout, "summary table", p)


def track_determinism():
    a, b = os.path.join(WORK, "a"), os.path.join(WORK, "b")
    args = ["track", "--preset", "default", "--seeds", "3,1", "--mode", "both"]
    pa = run(*args, "--out", a)
    pb = run(*args, "--out", b, env={"BURES_FLOW_THREADS": "1"})
    expect(pa.returncode == 0 and pb.returncode == 0, "both runs succeed", pa)
    expect(pa.stdout == pb.stdout, "summary identical")
    names = sorted(os.listdir(a))
    expect(names == sorted(os.listdir(b)), "same file set")
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    expect(not mismatch and not errors, f"byte-identical outputs, differing: {mismatch + errors}")


def track_artifacts():
    out = os.path.join(WORK, "out")
    p = run("track", "--preset", "default", "--seeds", "4,", "--mode", "filtered", "--out", out)
    expect(p.returncode == 0, "track exits 0", p)
    names = set(os.listdir(out))
    for n in ("metrics.csv", "estimates_filtered.json", "flow_filtered.csv", "status_filtered.csv",
              "flow_truth.csv", "config.json"):
        expect(n in names, f"{n} written")
    rows = read_rows(os.path.join(out, "metrics.csv"))
    expect(len(rows) == 1 and rows[0]["seed"] == "4", "single explicit seed")
    with open(os.path.join(out, "estimates_filtered.json")) as f:
        scene = strict_json(f.read())
    expect(len(scene["frames"]) == 60 and len(scene["frames"][0]) == 64, "estimate scene shape")
    flow = read_rows(os.path.join(out, "flow_filtered.csv"))
    expect(len(flow) == 59 * 64 and list(flow[0]) == ["frame", "index", "u", "v", "valid"], "flow csv shape")
    status = read_rows(os.path.join(out, "status_filtered.csv"))
    expect(len(status) == 60 * 64, "status csv shape")
    expect(list(status[0]) == ["frame", "index", "status", "gate_distance", "sigma_scale"], "status header")
    expect({s["status"] for s in status} <= {"warmup", "engaged", "reverted"}, "status values")
    expect(status[0]["gate_distance"] == "" and status[-1]["gate_distance"] != "", "empty until gated")
    cfg = os.path.join(out, "config.json")
    again = os.path.join(WORK, "again")
    p = run("track", "--config", cfg, "--seeds", "4,", "--mode", "filtered", "--out", again)
    expect(p.returncode == 0, "written config is reusable", p)
    expect(filecmp.cmp(os.path.join(out, "metrics.csv"), os.path.join(again, "metrics.csv"), shallow=False),
           "config round trip reproduces metrics")


def track_config():
    cfg = os.path.join(WORK, "cfg.json")
    with open(cfg, "w") as f:
        json.dump({"schema": 1, "preset": "constant_velocity", "name": "cv_small", "n_gaussians": 6,
                   "n_frames": 12, "noise": {"mean_noise_std": 0.1}}, f)
    out = os.path.join(WORK, "out")
    p = run("track", "--config", cfg, "--seeds", "3", "--out", out)
    expect(p.returncode == 0, "config track exits 0", p)
    rows = read_rows(os.path.join(out, "metrics.csv"))
    expect(len(rows) == 6 and all(r["scenario"] == "cv_small" for r in rows), "config name and seeds")


def track_unwritable():
    blocker = os.path.join(WORK, "file")
    with open(blocker, "w") as f:
        f.write("x")
    p = run("track", "--preset", "default", "--out", os.path.join(blocker, "sub"))
    expect(p.returncode == 2 and blocker in p.stderr, "unwritable output exits 2", p)


def track_bad_config():
    cfg = os.path.join(WORK, "bad.json")
    with open(cfg, "w") as f:
        f.write('{"schema": 1, "noise": {"outlier_rate": "often"}}')
    p = run("track", "--config", cfg, "--out", os.path.join(WORK, "o"))
    expect(p.returncode == 2 and "noise.outlier_rate" in p.stderr, "bad field exits 2 naming it", p)
    p = run("track", "--config", os.path.join(WORK, "nope.json"), "--out", os.path.join(WORK, "o"))
    expect(p.returncode == 2 and "nope.json" in p.stderr, "missing config exits 2", p)
    p = run("track", "--preset", "default", "--config", cfg, "--out", os.path.join(WORK, "o"))
    expect(p.returncode == 2, "preset and config together exit 2", p)


def usage_errors():
    for args in ([], ["bogus"], ["track"], ["track", "--out", WORK, "--mode", "fast"],
                 ["track", "--out", WORK, "--preset", "nope"], ["track", "--out", WORK, "--seeds", "x"],
                 ["track", "--out", WORK, "--seeds", "0"], ["selftest", "--tolerance", "loose"],
                 ["distance", UNIT]):
        p = run(*args)
        expect(p.returncode == 2, f"usage error for {args}", p)
    p = run("--help")
    expect(p.returncode == 0 and "selftest" in p.stdout, "help exits 0", p)


def selftest_quick():
    p = run("selftest", "--quick")
    expect(p.returncode == 0 and "selftest passed" in p.stdout, "quick selftest exits 0", p)
    p = run("selftest", "--quick", "--tolerance", "strict")
    expect(p.returncode == 0, "strict quick selftest exits 0", p)


def selftest_mutation():
    report = os.path.join(WORK, "mutated.json")
    p = run("selftest", "--quick", "--inject-fault", "log-sign-flip", "--json-report", report)
    expect(p.returncode == 1, "mutation exits 1", p)
    expect("FAIL [3] exp_log_round_trip" in p.stdout, "round-trip property named", p)
    with open(report) as f:
        data = strict_json(f.read())
    failing = [x for x in data["properties"] if not x["passed"]]
    rt = [x for x in failing if x["name"] == "exp_log_round_trip"]
    expect(rt and rt[0]["seed"] > 0 and rt[0]["observed"] > 1e-6, "report lists seed and observed error")


def selftest_json_schema():
    import jsonschema
    report = os.path.join(WORK, "report.json")
    p = run("selftest", "--quick", "--json-report", report)
    expect(p.returncode == 0, "selftest exits 0", p)
    with open(SCHEMA) as f:
        schema = json.load(f)
    with open(report) as f:
        data = strict_json(f.read())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(data, schema, cls=jsonschema.Draft202012Validator)
    expect(data["passed"] is True, "report says passed")


def threads_env():
    out1, out2 = os.path.join(WORK, "t1"), os.path.join(WORK, "t2")
    p1 = run("track", "--seeds", "3", "--out", out1, env={"BURES_FLOW_THREADS": "1"})
    p2 = run("track", "--seeds", "3", "--out", out2, env={"BURES_FLOW_THREADS": "3"})
    expect(p1.returncode == 0 and p2.returncode == 0, "thread-capped runs succeed", p1)
    expect(filecmp.cmp(os.path.join(out1, "metrics.csv"), os.path.join(out2, "metrics.csv"), shallow=False),
           "thread count does not change metrics")


if __name__ == "__main__":
    shutil.rmtree(WORK, ignore_errors=True)
    os.makedirs(WORK)
    globals()[CASE]()
    print("ok", CASE)
