#!/usr/bin/env python3
"""Smoke test for the porous_ch_py extension module.

Builds nothing itself: run `cargo build --release -p porous-ch-py` first.
The script locates the compiled cdylib under target/, loads it, and walks
through the main operations end to end.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libporous_ch_py.so",
        ROOT / "target" / "debug" / "libporous_ch_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit(
            "libporous_ch_py.so not found; run `cargo build --release -p porous-ch-py` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="porous_ch_py_"))
    shutil.copy(lib, stage / "porous_ch_py.so")
    sys.path.insert(0, str(stage))
    import porous_ch_py

    return porous_ch_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = load_module()
    print(f"loaded porous_ch_py {m.__version__}")

    # geometry: porosity of a ball cell approaches 1 - pi r^2
    cell = m.ReferenceCell.ball(2, 128, [0.5, 0.5], 0.3)
    approx(cell.porosity(), 1.0 - math.pi * 0.09, 0.02)
    assert cell.wall_fractions() == [1.0]
    rebuilt = m.ReferenceCell.from_bitmap(cell.bitmap_text())
    approx(rebuilt.porosity(), cell.porosity(), 0.0)
    print(f"ball cell: porosity {cell.porosity():.4f}, bitmap round-trip ok")

    # trivial cell reduces every tensor to its homogeneous value
    trivial = m.ReferenceCell.trivial(2, 16)
    t = m.solve_cell(trivial, 0.05)
    assert t.theta1 == 1.0
    assert t.d == [[1.0, 0.0], [0.0, 1.0]]
    assert t.m_v == [[0.0, 0.0], [0.0, 0.0]]
    assert t.m_w_a == [[1.0, 0.0], [0.0, 1.0]]
    assert t.m_w_b == [[0.0, 0.0], [0.0, 0.0]]
    print("trivial cell: D = I, M_v = 0, M_w = m I")

    # perforated cell: symmetric positive tensors below the porosity bound
    t = m.solve_cell(cell, 0.05)
    d = t.d
    approx(d[0][1], 0.0, 1e-6)
    assert 0.0 < d[0][0] <= t.theta1 + 1e-8
    approx(d[0][0], d[1][1], 1e-8)
    print(f"ball cell tensors: theta1 = {t.theta1:.4f}, d11 = {d[0][0]:.4f}")

    # free energy and admissibility
    e = m.BulkFreeEnergy.from_coeffs(0.0, -1.0, 0.0, 1.0)
    assert e.f(2.0) == 6.0
    approx(e.big_f(1.0), -0.25, 1e-15)
    value, clamped = e.ratio(2.0)
    approx(value, 3.0 / 11.0, 1e-15)
    assert not clamped
    assert m.check_assumption_f(1.0, 2.0)
    assert not m.check_assumption_f(1.0, 1.1)
    try:
        m.check_assumption_f(2.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("ordering violation should raise")
    print("free energy and assumption-F checks ok")

    # wetting: channel datum and the effective contact angle
    g0 = m.upscaled_g0_channel([0.25, 0.75], [1.0, 3.0], 1.0, 1.0)
    approx(g0, -2.5, 1e-14)
    c = m.contact_angle(0.0, 0.4, 0.1)
    approx(c["theta_rad"], math.pi / 2, 0.0)
    c = m.contact_angle(0.05, 0.5, 0.1)
    assert c["theta_rad"] < math.pi / 2  # hydrophilic
    print(f"wetting: g0 = {g0}, neutral angle = pi/2")

    # a short homogeneous run through the scenario runner
    out = Path(tempfile.mkdtemp(prefix="porous_ch_run_"))
    config = {
        "scenario": "homogeneous",
        "grid": {"lengths": [1.0, 1.0], "sizes": [32, 32]},
        "energy": {"a1": -1.0, "a3": 1.0},
        "stepper": {
            "dt": 2e-5,
            "steps": 50,
            "scheme": "semi-implicit-biharmonic",
            "stabilization": 2.0,
            "lambda": 0.05,
        },
        "initial": {"type": "noise", "mean": 0.0, "amplitude": 0.1},
        "output": {"cadence": 10},
        "seed": 3,
    }
    report = m.run_json(json.dumps(config), str(out), 1)
    assert report["scenario"] == "homogeneous"
    series = (out / "series.csv").read_text().splitlines()
    rows = [list(map(float, r.split(","))) for r in series[2:]]
    masses = [r[1] for r in rows]
    energies = [r[2] for r in rows]
    assert abs(masses[-1] - masses[0]) <= 1e-10 * max(1.0, abs(masses[0]))
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))
    print(f"homogeneous run: mass conserved, energy {energies[0]:.5f} -> {energies[-1]:.5f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
