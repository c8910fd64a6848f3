"""Builds the extension, imports it and runs a few closed-form checks.

    python3 python/smoke_test.py [--no-build]
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "lpproj-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )


def load():
    lib = ROOT / "target" / "release" / "liblpproj_py.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "lpproj.so"
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))
    import lpproj

    return lpproj


def main():
    if "--no-build" not in sys.argv:
        build()
    lp = load()

    assert abs(lp.moment_g(2.0, 2.0) - 0.5) < 1e-14
    assert abs(lp.moment_s(2.0, 3, 2.0) - 1.5) < 1e-12
    assert abs(lp.ball_volume(1.0, 3) - 4.0 / 3.0) < 1e-13

    disk = lp.variance_report(2.0, lp.Direction.axis(3, 2), samples=200_000, seed=1)
    assert abs(disk.ratio.z_score(2.0 / 3.0)) <= 4.0, disk.ratio
    print("disk ratio", disk.ratio)

    theta = lp.Direction.haar(3, seed=5)
    value, delta = lp.quad_norm2(3.0, theta)
    mc = lp.variance_report(3.0, theta, samples=200_000, seed=2).e_norm2
    assert delta < 1e-4
    assert abs(mc.mean - value) <= max(4 * mc.stderr, 0.01 * value), (mc, value)
    print("E|X|^2 quadrature", value, "monte carlo", mc)

    m = lp.OrliczM(4.0)
    rho = m.luxemburg_norm(theta.theta)
    assert abs(m.modular(theta.theta, rho) - 1.0) < 1e-6
    ratio, _ = lp.orlicz_vs_mc(4.0, theta, samples=50_000, seed=3)
    assert 0.1 <= ratio.mean <= 10.0

    brute, functional = lp.permutation_average([[1.0] * 5] * 5)
    assert abs(brute - math.sqrt(5)) < 1e-12
    print("permutation average", brute, functional)

    st = lp.steiner_compare(1.5, lp.Direction.axis(3, 2), samples=100_000, seed=4)
    assert abs(st["var_diff"].mean) <= 4 * math.hypot(st["var_x"].stderr, st["var_y"].stderr)

    try:
        lp.moment_g(0.5, 1.0)
    except ValueError as e:
        print("rejected p < 1:", e)
    else:
        raise AssertionError("p < 1 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
