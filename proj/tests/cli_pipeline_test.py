#!/usr/bin/env python3
"""End-to-end checks of the cskl command line tool.

Usage: cli_pipeline_test.py <path-to-cskl-binary>
"""

import json
import os
import struct
import subprocess
import sys
import tempfile

CSKL = sys.argv[1]


def run(*args, expect=0, env=None):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    proc = subprocess.run([CSKL, *args], capture_output=True, text=True,
                          env=full_env)
    if proc.returncode != expect:
        raise AssertionError(
            f"cskl {' '.join(args)}: expected exit {expect}, got "
            f"{proc.returncode}\nstdout: {proc.stdout}\nstderr: {proc.stderr}")
    return proc


def read_sketch(path):
    with open(path, "rb") as f:
        blob = f.read()
    head = struct.Struct("<4sHBIIIdBQQQBdd")
    (magic, version, map_kind, m, d, d_pad, sigma_w, op_kind, op_seed,
     dither_seed, n, mech, eps, delta) = head.unpack_from(blob, 0)
    assert magic == b"CSKL" and version == 1
    values = struct.unpack_from(f"<{2 * m}d", blob, head.size)
    return {"map_kind": map_kind, "m": m, "d": d, "sigma_w": sigma_w,
            "op_seed": op_seed, "n": n, "mech": mech, "eps": eps,
            "values": values}


def split_csv(src, out_a, out_b):
    with open(src) as f:
        lines = f.read().splitlines()
    header, rows = lines[0], lines[1:]
    cut = len(rows) // 3
    for out, part in ((out_a, rows[:cut]), (out_b, rows[cut:])):
        with open(out, "w") as f:
            f.write("\n".join([header] + part) + "\n")


def main():
    tmp = tempfile.mkdtemp(prefix="cskl_cli_")
    os.chdir(tmp)

    # gen: deterministic synthetic data plus ground truth
    run("gen", "--k", "3", "--d", "2", "--n", "4000", "--sep", "8",
        "--seed", "7", "--out", "data.csv")
    truth = json.load(open("data.csv.truth.json"))
    assert len(truth["means"]) == 3 and truth["n"] == 4000

    # sketch: whole file vs merge of a 1/3-2/3 split must agree
    flags = ["--map", "rff", "--m", "60", "--sigma-w", "0.08", "--seed", "11"]
    run("sketch", "data.csv", *flags, "--out", "full.sk")
    split_csv("data.csv", "part_a.csv", "part_b.csv")
    run("sketch", "part_a.csv", *flags, "--out", "a.sk")
    run("sketch", "part_b.csv", *flags, "--out", "b.sk")
    run("merge", "a.sk", "b.sk", "--out", "merged.sk")
    full, merged = read_sketch("full.sk"), read_sketch("merged.sk")
    assert full["n"] == merged["n"] == 4000
    assert max(abs(x - y) for x, y in zip(full["values"], merged["values"])) \
        < 1e-12
    assert os.path.exists("merged.sk.meta.json")

    # learn + eval: sketched k-means should be close to Lloyd
    run("learn", "merged.sk", "--task", "kmeans", "--k", "3", "--seed", "1",
        "--restarts", "20", "--out", "model.json")
    model = json.load(open("model.json"))
    assert len(model["centroids"]) == 3
    assert abs(sum(model["weights"]) - 1.0) < 1e-9
    run("eval", "--model", "model.json", "--data", "data.csv", "--baseline",
        "--seed", "2", "--out", "metrics.json")
    metrics = json.load(open("metrics.json"))
    assert metrics["sse_ratio"] < 1.5, metrics

    # determinism: same seeds, same model bytes
    run("learn", "merged.sk", "--task", "kmeans", "--k", "3", "--seed", "1",
        "--restarts", "20", "--out", "model_again.json")
    assert open("model.json").read() == open("model_again.json").read()

    # quantized map round trip through learn
    run("sketch", "data.csv", "--map", "rff_quantized", "--m", "240",
        "--sigma-w", "0.08", "--seed", "11", "--dither-seed", "5",
        "--out", "quant.sk")
    run("learn", "quant.sk", "--task", "kmeans", "--k", "3", "--seed", "1",
        "--restarts", "20", "--out", "qmodel.json")
    run("eval", "--model", "qmodel.json", "--data", "data.csv", "--baseline",
        "--seed", "2", "--out", "qmetrics.json")
    assert json.load(open("qmetrics.json"))["sse_ratio"] < 2.0

    # privatize: sealed output, merge of sealed input refused with exit 5
    run("privatize", "full.sk", "--mechanism", "laplace", "--epsilon", "1e6",
        "--seed", "3", "--out", "priv.sk")
    assert read_sketch("priv.sk")["mech"] == 1
    run("merge", "priv.sk", "b.sk", "--out", "bad.sk", expect=5)
    run("learn", "priv.sk", "--task", "kmeans", "--k", "3", "--seed", "1",
        "--out", "pmodel.json")

    # --require-dp refuses unsealed outputs but passes privatized pipelines
    run("--require-dp", "sketch", "data.csv", *flags, "--out", "nodp.sk",
        expect=2)

    # exit codes: usage 2, format 3, incompatibility 4
    run("frobnicate", expect=2)
    run("learn", "missing.sk", "--task", "kmeans", "--k", "3",
        "--out", "x.json", expect=3)
    run("sketch", "data.csv", "--map", "rff", "--m", "60", "--sigma-w",
        "0.08", "--seed", "99", "--out", "other.sk")
    run("merge", "full.sk", "other.sk", "--out", "bad2.sk", expect=4)

    # regression task via the outer-product map
    with open("reg.csv", "w") as f:
        f.write("y,x0,x1\n")
        for i in range(500):
            x0, x1 = (i % 23) / 7.0 - 1.5, (i % 41) / 13.0 - 1.5
            f.write(f"{2.0 * x0 - 0.5 * x1},{x0},{x1}\n")
    run("sketch", "reg.csv", "--map", "outer_product", "--out", "reg.sk")
    run("learn", "reg.sk", "--task", "regress", "--d1", "1",
        "--out", "reg_model.json")
    theta = json.load(open("reg_model.json"))["theta"][0]
    assert abs(theta[0] - 2.0) < 1e-8 and abs(theta[1] + 0.5) < 1e-8
    run("eval", "--model", "reg_model.json", "--data", "reg.csv",
        "--out", "reg_metrics.json")
    assert json.load(open("reg_metrics.json"))["risk"] < 1e-12

    # kernelscan: grid CSV with criterion and Parzen columns
    run("kernelscan", "full.sk", "--data", "data.csv", "--grid-min", "-12",
        "--grid-max", "12", "--grid-n", "20", "--out", "scan.csv")
    lines = open("scan.csv").read().splitlines()
    assert lines[0] == "c0,c1,criterion,parzen"
    assert len(lines) == 1 + 20 * 20
    best = max(lines[1:], key=lambda l: float(l.split(",")[2]))
    bx, by = float(best.split(",")[0]), float(best.split(",")[1])
    assert any((bx - mu[0]) ** 2 + (by - mu[1]) ** 2 < 4.0
               for mu in truth["means"]), (bx, by)

    # config file with flag override, and the seed environment variable
    with open("cskl.cfg", "w") as f:
        f.write("[sketch]\nmap=rff\nm=60\nsigma-w=0.08\nseed=11\n")
    run("sketch", "data.csv", "--config", "cskl.cfg", "--out", "cfg.sk")
    assert read_sketch("cfg.sk")["values"] == full["values"]
    run("sketch", "data.csv", "--config", "cskl.cfg", "--seed", "99",
        "--out", "cfg2.sk")
    assert read_sketch("cfg2.sk")["op_seed"] == 99
    run("sketch", "data.csv", "--map", "rff", "--m", "60", "--sigma-w",
        "0.08", "--out", "env.sk", env={"CSKL_SEED": "11"})
    assert read_sketch("env.sk")["values"] == full["values"]

    print("cli pipeline: all checks passed")


if __name__ == "__main__":
    main()
