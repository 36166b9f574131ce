"""Test helpers that drive the package (the oracles module stays package-free)."""
import json
import math

import numpy as np

from reeblab import flow, geometry


def fd_transverse(sys, z0, T, h=1e-6, tol=1e-13):
    """Central differences of the flow along e1, e2, read in the frame at the end point."""
    z0 = geometry.radial_project(sys, z0)
    e1, e2 = geometry._frame_vectors(sys, z0)
    zT = flow.flow_map(sys, z0, T, tol=tol)
    C = geometry.frame_coordinates_matrix(*geometry._frame_vectors(sys, zT))
    cols = [(flow.flow_map(sys, z0 + h * e, T, tol=tol) - flow.flow_map(sys, z0 - h * e, T, tol=tol)) / (2 * h)
            for e in (e1, e2)]
    return C @ np.stack(cols, -1)


def assert_json_close(got, want, path="$", abs_tol=1e-9, rel_tol=1e-7):
    """Structural equality with floats compared to abs 1e-9 or rel 1e-7."""
    if isinstance(want, dict):
        assert isinstance(got, dict), f"{path}: expected object"
        assert sorted(got) == sorted(want), f"{path}: keys {sorted(got)} != {sorted(want)}"
        for k in want:
            assert_json_close(got[k], want[k], f"{path}.{k}", abs_tol, rel_tol)
    elif isinstance(want, list):
        assert isinstance(got, list) and len(got) == len(want), f"{path}: list length"
        for i, (a, b) in enumerate(zip(got, want)):
            assert_json_close(a, b, f"{path}[{i}]", abs_tol, rel_tol)
    elif isinstance(want, bool) or want is None or isinstance(want, str):
        assert got == want, f"{path}: {got!r} != {want!r}"
    elif isinstance(want, (int, float)):
        assert isinstance(got, (int, float)) and not isinstance(got, bool), f"{path}: expected number"
        assert math.isclose(got, want, abs_tol=abs_tol, rel_tol=rel_tol), f"{path}: {got!r} != {want!r}"
    else:
        raise TypeError(f"{path}: unexpected type {type(want)}")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
