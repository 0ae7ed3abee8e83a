import json
import os
from pathlib import Path

import numpy as np
import pytest

import nanowb

SCENES = Path(os.environ.get("NANOWB_SCENES_DIR", Path(__file__).resolve().parents[2] / "scenes"))

TINY = {
    "scene_version": 1,
    "kind": "meso-simulation",
    "materials": [{"name": "al", "rho0": 2.7, "K": 70, "G": 26, "sigma_y": 0.1}],
    "meso": {
        "material": "al",
        "grid": {"nx": 8, "ny": 8, "width": 1.6, "height": 1.6},
        "grains": {"count": 3},
        "schedule": {"load": {"target_strain": 0.01, "ramp_transits": 5, "hold_transits": 1}, "frames": 2},
    },
}


def test_validate_fills_defaults():
    scene = nanowb.validate_scene(TINY)
    assert scene["meso"]["grains"]["delta"] == 0.3
    assert scene["outputs"]["fields"] == ["eq_plastic", "von_mises", "pressure"]
    assert len(nanowb.scene_id(TINY)) == 16


def test_validation_errors_carry_paths():
    bad = json.loads(json.dumps(TINY))
    bad["meso"]["grains"]["delta"] = 1.5
    bad["extra"] = 1
    with pytest.raises(nanowb.ValidationError) as info:
        nanowb.validate_scene(bad)
    paths = {p for p, _ in info.value.args[1]}
    assert paths == {"/meso/grains/delta", "/extra"}


def test_lattice_counts():
    species, xyz = nanowb.build_lattice({"kind": "fcc", "a": 4.05, "species": "Al", "extents": [3, 3, 3]})
    assert len(species) == 108 and xyz.shape == (108, 3)
    _, ball = nanowb.build_particle({"shape": "fullerene", "radius": 3.5})
    assert np.allclose(np.linalg.norm(ball, axis=1), 3.5, atol=1e-9)
    text = nanowb.to_xyz(["C"], np.zeros((1, 3)), "comment")
    assert text == "1\ncomment\nC 0.000000 0.000000 0.000000\n"
    back, pos = nanowb.parse_xyz(text)
    assert back == ["C"] and pos.shape == (1, 3)
    with pytest.raises(ValueError):
        nanowb.to_xyz(["C"], np.zeros((2, 3)))
    with pytest.raises(nanowb.Error):
        nanowb.build_lattice({"kind": "fcc", "a": 4.05, "extents": [200, 200, 200]})


def test_run_and_read_back(tmp_path):
    manifest = nanowb.run_scene(TINY, tmp_path)
    assert manifest["status"] == "done"
    run = tmp_path / manifest["run_id"]
    last = max((f for f in manifest["frames"] if f["field"] == "eq_plastic"), key=lambda f: f["index"])
    frame = nanowb.read_field_csv(str(run / last["file"]))
    assert frame["values"].shape == (8, 8)
    bands = nanowb.detect_bands(frame["values"], frame["bounds"])
    assert bands["bands"] == json.loads((run / "bands.json").read_text())["bands"]
    png = tmp_path / "eq.png"
    nanowb.write_field_png(frame["values"], frame["bounds"], "eq_plastic", str(png))
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_composite_scene(tmp_path):
    manifest = nanowb.run_scene((SCENES / "composite.json").read_text(), tmp_path)
    assert manifest["status"] == "done"
    stats = manifest["stats"]
    assert stats["atoms"] == stats["matrix_kept"] + 2 * stats["atoms_per_particle"][0]


def test_band_detection_on_a_stripe():
    ny = nx = 60
    y, x = np.mgrid[0:ny, 0:nx]
    values = np.full((ny, nx), 0.001)
    values[np.abs(x - y) <= 1] = 0.05
    bands = nanowb.detect_bands(values, (0.0, 6.0, 0.0, 6.0))
    assert len(bands["bands"]) == 1
    assert abs(bands["bands"][0]["angle_deg"] - 45.0) <= 2.0


def test_mls_reproduces_linear_field():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 4, size=(300, 2))
    s = np.column_stack([pts, 0.3 * pts[:, 0], 1.0 + 0.5 * pts[:, 1], -0.1 * pts[:, 0]])
    q = np.array([[1.0, 1.0], [2.0, 3.0]])
    out = nanowb.recover_stress(s, q, 0.6)
    want = np.column_stack([0.3 * q[:, 0], 1.0 + 0.5 * q[:, 1], -0.1 * q[:, 0]])
    assert np.allclose(out, want, atol=1e-9)
