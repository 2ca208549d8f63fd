#!/usr/bin/env python3
"""Regenerate the bundled quickstart sample and its golden metric report.

Runs the installed CLI end to end, exactly as the README quickstart does,
and freezes the inputs plus the resulting report under tests/data/. Rerun
via `make golden` after any intentional numeric change, and commit the
diff so the golden test stays meaningful.
"""
import json
import sys
import tempfile
from pathlib import Path

from pcdenoise import PointCloud, save_off, save_xyz
from pcdenoise.cli import main
from pcdenoise.shapes import make_sphere_mesh, sample_mesh_surface
from pcdenoise.noise import rng_from_seed

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

SAMPLE_SEED = 7
SAMPLE_N = 2000
NOISE = ["--kind", "gaussian", "--level", "0.02", "--seed", "3"]


def run(argv):
    code = main([str(a) for a in argv])
    if code != 0:
        sys.exit(f"command failed ({code}): {argv}")


def main_():
    DATA.mkdir(parents=True, exist_ok=True)
    mesh = make_sphere_mesh(2)
    save_off(mesh, DATA / "quickstart.off")
    pts = sample_mesh_surface(mesh, SAMPLE_N, rng_from_seed(SAMPLE_SEED))
    save_xyz(PointCloud(pts), DATA / "quickstart.xyz")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run(["add-noise", "--in", DATA / "quickstart.xyz",
             "--out", tmp / "noisy.xyz", *NOISE])
        run(["denoise", "--in", tmp / "noisy.xyz", "--out", tmp / "denoised.xyz",
             "--field", "mls", "--knn", "4"])
        run(["metric", "--denoised", tmp / "denoised.xyz",
             "--clean", DATA / "quickstart.xyz",
             "--mesh", DATA / "quickstart.off",
             "--json", DATA / "quickstart_report.json"])

    report = json.loads((DATA / "quickstart_report.json").read_text())
    print("golden chamfer       :", report["chamfer"])
    print("golden point_to_mesh :", report["point_to_mesh"])
    print("written to", DATA)


if __name__ == "__main__":
    main_()
