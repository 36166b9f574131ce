import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reeblab import _kernels_py, geometry, knots, orbits
from reeblab.errors import ComponentsIntersect, CurvesTooClose, KnotError

import oracles
from oracles import SQRT2


def _fiber(sys, p, label):
    return knots.ClosedCurve.from_orbit(sys, orbits.orbit_through(sys, p, np.pi, label=label))


@pytest.fixture(scope="module")
def hopf_fibers(sys_hopf):
    c1 = knots.ClosedCurve.from_orbit(sys_hopf, orbits.axis_orbit(sys_hopf, 1))
    c2 = _fiber(sys_hopf, [0.6, 0.0, 0.8, 0.0], "f2")
    c3 = _fiber(sys_hopf, [0.0, 0.6, 0.48, -0.64], "f3")
    return c1, c2, c3


def test_hopf_fibers_link_once(hopf_fibers):
    c1, c2, c3 = hopf_fibers
    for a, b in [(c1, c2), (c1, c3), (c2, c3)]:
        r = knots.linking_detail(a, b, gauss=True)
        assert r.value == 1
        assert abs(r.gauss - r.value) <= 1e-3
        assert abs(oracles.gauss_linking(a.points, b.points) - 1) <= 1e-3


def test_symmetric_and_reversal(hopf_fibers):
    c1, c2, _ = hopf_fibers
    assert knots.linking_number(c2, c1) == knots.linking_number(c1, c2) == 1
    assert knots.linking_number(c1.reversed(), c2) == -1
    assert knots.linking_number(c1.reversed(), c2.reversed()) == 1


def test_independent_of_seed(hopf_fibers):
    c1, c2, _ = hopf_fibers
    assert {knots.linking_number(c1, c2, seed=s) for s in range(5)} == {1}


def test_split_axes_link_once(sys_sqrt2, gammas):
    c1, c2 = (knots.ClosedCurve.from_orbit(sys_sqrt2, g) for g in gammas)
    assert knots.linking_number(c1, c2) == 1
    assert abs(oracles.gauss_linking(oracles.split_axis_curve(1.0, SQRT2, 1),
                                     oracles.split_axis_curve(1.0, SQRT2, 2)) - 1) <= 1e-3


def test_unlinked_circles():
    # two unit circles in parallel planes of R^4, far apart on the sphere
    t = np.linspace(0, 2 * np.pi, 401)
    a = np.stack([np.cos(t), np.sin(t), np.full_like(t, 3.0), np.zeros_like(t)], axis=1)
    b = np.stack([np.cos(t), np.sin(t), np.full_like(t, -3.0), np.zeros_like(t)], axis=1)
    a[-1], b[-1] = a[0], b[0]
    c1, c2 = knots.ClosedCurve(a), knots.ClosedCurve(b)
    assert knots.linking_number(c1, c2) == 0
    assert abs(oracles.gauss_linking(a, b)) <= 1e-3


@pytest.mark.parametrize("which", ["hopf", "gamma1", "gamma2"])
def test_self_linking_minus_one(which, sys_hopf, sys_sqrt2, gammas):
    if which == "hopf":
        assert knots.self_linking(sys_hopf, orbits.axis_orbit(sys_hopf, 1)) == -1
    else:
        assert knots.self_linking(sys_sqrt2, gammas[int(which[-1]) - 1]) == -1


def test_self_linking_needs_primitive(sys_hopf):
    with pytest.raises(KnotError):
        knots.self_linking(sys_hopf, orbits.axis_orbit(sys_hopf, 1).cover(2))


def test_curves_too_close(hopf_fibers):
    c1 = hopf_fibers[0]
    shifted = knots.ClosedCurve(c1.points + 1e-4)
    with pytest.raises(CurvesTooClose):
        knots.linking_number(c1, shifted)


def test_components_intersect(sys_hopf):
    o = orbits.axis_orbit(sys_hopf, 1)
    with pytest.raises(ComponentsIntersect):
        knots.linking_class(sys_hopf, [o, o])


def test_unclosed_curve_rejected():
    with pytest.raises(KnotError):
        knots.ClosedCurve(np.eye(4))


def test_linking_class(sys_sqrt2, gammas):
    y = knots.linking_class(sys_sqrt2, list(gammas), [1, 2])
    assert y.coefficients == [1, 2]
    assert y.description == "1*y[gamma1] + 2*y[gamma2]"
    # a Hopf-type loop on the sphere of radius 1: links gamma1 and gamma2 once each
    loop = _fiber(geometry.hopf(), [0.6, 0.0, 0.8, 0.0], "loop")
    assert y.evaluate(loop) == 3
    rec = y.to_record()
    assert rec["components"][1]["period"]["value"] == pytest.approx(np.pi * SQRT2)


def test_csv_roundtrip(tmp_path, hopf_fibers):
    c = hopf_fibers[1]
    p = tmp_path / "c.csv"
    c.to_csv(p)
    back = knots.ClosedCurve.from_csv(p)
    np.testing.assert_array_equal(back.points, c.points)


def _random_polygon(rng, n):
    pts = rng.standard_normal((n, 3))
    return np.vstack([pts, pts[:1]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    P, Q = _random_polygon(rng, 12), _random_polygon(rng, 15) + rng.normal(0, 0.5, 3)
    from reeblab import kernels

    assert kernels.crossing_sum(P, Q)[:3] == _kernels_py.crossing_sum(P, Q)[:3]
    assert kernels.gauss_sum(P, Q) == pytest.approx(_kernels_py.gauss_sum(P, Q), abs=1e-12)
