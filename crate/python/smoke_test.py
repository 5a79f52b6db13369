#!/usr/bin/env python3
"""Smoke test for the phgpy extension module.

Builds the cdylib if needed, imports it, and exercises the main surfaces:
algebra products, exact triangle area, incidence predicates, sparsity
figures, kernel emission, and whole-program check/eval/diff/place.

Run from the repository root:  python3 python/smoke_test.py
"""

import json
import os
import shutil
import subprocess
import sys
import sysconfig
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def ensure_module():
    """Build (if necessary) and import phgpy from the cargo target dir."""
    lib = None
    for profile in ("release", "debug"):
        cand = os.path.join(REPO, "target", profile, "libphgpy.so")
        if os.path.exists(cand):
            lib = cand
            break
    if lib is None:
        subprocess.run(
            ["cargo", "build", "-p", "phg-py"], cwd=REPO, check=True
        )
        lib = os.path.join(REPO, "target", "debug", "libphgpy.so")
    stage = tempfile.mkdtemp(prefix="phgpy_")
    ext = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, os.path.join(stage, "phgpy" + ext))
    sys.path.insert(0, stage)
    import phgpy

    return phgpy


def approx(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    phgpy = ensure_module()
    checks = 0

    def ok(cond, what):
        nonlocal checks
        if not cond:
            raise SystemExit(f"FAIL: {what}")
        checks += 1
        print(f"  ok: {what}")

    print("algebra and products")
    euc = phgpy.Algebra(2, 0, 0)
    e1, e2 = euc.basis("e1"), euc.basis("e2")
    ok((e1 * e1).coeffs() == {"1": 1.0}, "e1*e1 = +1")
    ok((e1 ^ e1).is_zero(), "e1^e1 = 0")
    ok((e2 * e1).coeffs() == {"e12": -1.0}, "e2*e1 = -e12")
    v = euc.multivector({"e1": 3, "e2": 4})
    ok(approx(v.norm(), 5.0), "norm(3e1+4e2) = 5")

    print("pga triangle, exact mode")
    pga = phgpy.Algebra(3, 0, 1)
    a = pga.point("0", "0", "0", exact=True)
    b = pga.point("1", "0", "0", exact=True)
    c = pga.point("0", "1", "0", exact=True)
    face = (a ^ b) ^ c
    ok(face.grades() == [3], "join of three points has grade 3")
    ok(phgpy.simplex_content(face, 2) == "1/2", "triangle area exactly 1/2")
    on = pga.point("3/7", "-2/5", "0", exact=True)
    off = pga.point("3/7", "-2/5", "1/1000000000", exact=True)
    ok(phgpy.incidence(on, face), "on-plane point incident")
    ok(not phgpy.incidence(off, face), "perturbed point not incident")
    ok(phgpy.orientation(off, face) != "on", "perturbed point takes a side")

    print("sparsity and kernels")
    s3 = phgpy.tensor_sparsity(3, 0, 1, "gp")
    ok(approx(s3, 1.0 - 192.0 / 4096.0), f"3D gp tensor sparsity {s3:.4f}")
    prof = phgpy.sparsity_profile(3, 0, 1, "gp", 2, 1)
    ok(prof["nonzero"] == 21 and prof["restricted_dense"] == 24, "gp 2x1 profile 21/24")
    text = phgpy.emit_join_kernel(3, 0, 1, 2)
    ok(text.startswith("kernel join2 cl(3,0,1)"), "fused triangle kernel emits")
    ok("out_e123" in text, "kernel covers all grade-3 outputs")

    print("whole programs")
    program = phgpy.Program(
        "\n".join(
            [
                "algebra 3,0,1",
                "units m",
                "node p1 mv grade={1}",
                "node p2 mv grade={1}",
                "node p3 mv grade={1}",
                "node face mv",
                "node area scalar unit=m^2",
                "edge join(p1,p2,p3) -> face",
                "edge norm(face) -> area variant=content",
            ]
        )
    )
    report = program.check()
    ok(report["ok"], "triangle program checks clean")
    ok(program.grades()["face"] == [3], "face grade inferred {3}")

    def point_coeffs(x, y, z):
        dense = ["0"] * 16
        dense[1] = "1"
        dense[2], dense[4], dense[8] = str(x), str(y), str(z)
        return dense

    values = program.eval(
        {
            "p1": point_coeffs(0, 0, 0),
            "p2": point_coeffs(1, 0, 0),
            "p3": point_coeffs(0, 1, 0),
        },
        outputs=["area"],
        exact=True,
    )
    ok(values["area"][0] == "1/2", "program area evaluates to 1/2")

    fl = lambda x, y, z: [0.0, 1.0, float(x), 0.0, float(y), 0.0, 0.0, 0.0, float(z)] + [0.0] * 7
    inputs = {"p1": fl(0.2, -0.3, 0.4), "p2": fl(1.1, 0.2, -0.5), "p3": fl(-0.4, 0.9, 0.3)}
    direction = {"p2": [0.0, 0.0, 0.7, 0.0, -0.2, 0.0, 0.0, 0.0, 0.5] + [0.0] * 7}
    tangent = program.diff(inputs, direction, outputs=["area"])["area"][0]
    h = 1e-5

    def area_at(shift):
        moved = dict(inputs)
        moved["p2"] = [p + shift * d for p, d in zip(inputs["p2"], direction["p2"])]
        return program.eval(moved, outputs=["area"])["area"][0]

    fd = (area_at(h) - area_at(-h)) / (2 * h)
    ok(approx(tangent, fd, 1e-6), f"directional derivative {tangent:.8f} matches fd {fd:.8f}")

    pipeline = phgpy.Program(
        "\n".join(
            [
                "target npu 2x2 tile_kb=32 dma=2",
                "node a scalar",
                "node b scalar",
                "node c scalar",
                "node d scalar",
                "node out scalar",
                "colocate g(a,b,c,d) -> out routes=a>b,a>c,b>d,c>d dma=a:d sync=d footprint=a:8,b:8,c:8,d:8",
            ]
        )
    )
    placed = pipeline.place()
    ok(placed["plan"]["assignments"]["a"] == [0, 0], "pipeline anchors at tile (0,0)")
    sched = placed["plan"]["barrier_schedule"]
    ok(sched.index("d") > max(sched.index("b"), sched.index("c")), "reduce waits for both computes")

    print(f"\nsmoke test passed: {checks} checks")


if __name__ == "__main__":
    main()
