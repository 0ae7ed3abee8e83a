"""Mesoscale plasticity solver and nanocomposite workbench."""

import json

from . import _nanowb
from ._nanowb import Error, ValidationError, parse_xyz, read_field_csv, recover_stress, to_xyz, write_field_png

__all__ = [
    "Error",
    "ValidationError",
    "validate_scene",
    "scene_id",
    "run_scene",
    "build_lattice",
    "build_particle",
    "detect_bands",
    "parse_xyz",
    "to_xyz",
    "read_field_csv",
    "write_field_png",
    "recover_stress",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def validate_scene(doc):
    """Normalized scene dict, or ValidationError(message, [(path, message), ...])."""
    return json.loads(_nanowb.validate_scene(_text(doc)))


def scene_id(doc):
    return _nanowb.scene_id(_text(doc))


def run_scene(doc, root):
    """Runs a scene into root/<run_id> and returns the manifest dict."""
    return json.loads(_nanowb.run_scene(_text(doc), str(root)))


def build_lattice(spec):
    """(species list, positions (n, 3)) for a lattice spec."""
    return _nanowb.build_lattice(_text(spec))


def build_particle(spec):
    return _nanowb.build_particle(_text(spec))


def detect_bands(values, bounds, threshold_factor=3.0, min_cells=10):
    """Bands in an eq_plastic field of shape (ny, nx) over (xmin, xmax, ymin, ymax)."""
    return json.loads(_nanowb.detect_bands(values, tuple(bounds), threshold_factor, min_cells))
