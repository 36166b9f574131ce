import math

import numpy as np
import pytest

from reeblab import geometry, orbits, spectral
from reeblab.errors import (
    DegenerateSystem,
    GapStraddle,
    NonSymmetricCoefficient,
    SpectralError,
    WindowTooNarrow,
    WindowUnresolved,
)
from reeblab.flow import SymplecticPath, polar_angle

import oracles
from oracles import FROZEN_CZ, SQRT2


def test_oracle_reproduces_frozen_table():
    for (name, axis), vals in FROZEN_CZ.items():
        a, b = oracles.CZ_SYSTEMS[name]
        assert [oracles.split_cz(a, b, axis, k) for k in range(1, 9)] == vals
        assert [oracles.split_cz_formula(a, b, axis, k) for k in range(1, 9)] == vals


@pytest.mark.parametrize("axis,k", [(1, 1), (1, 3), (2, 1), (2, 2)])
def test_cz_examples(sys_sqrt2, gammas, axis, k):
    spec = spectral.asymptotic_spectrum(sys_sqrt2, gammas[axis - 1], "global", 512, k)
    assert spectral.cz_index(spec, 0.0).cz == FROZEN_CZ[("sqrt2", axis)][k - 1]
    assert spec.structure_defects() == []


def test_disk_frame_coefficient_is_constant(sys_sqrt2, gammas):
    op = spectral.build_operator(sys_sqrt2, gammas[0], "disk_aligned", 256)
    c = 2 * np.pi / SQRT2  # T * 2/b with T = pi
    np.testing.assert_allclose(op.S, np.broadcast_to(c * np.eye(2), op.S.shape), atol=1e-7)


def test_hopf_global_coefficient():
    sys = geometry.hopf()
    op = spectral.build_operator(sys, orbits.axis_orbit(sys, 1), "global", 256)
    np.testing.assert_allclose(op.S, np.broadcast_to(4 * np.pi * np.eye(2), op.S.shape), atol=1e-7)


def test_zero_section_maps_to_zero(sys_sqrt2, gammas):
    op = spectral.build_operator(sys_sqrt2, gammas[0], "global", 128)
    assert not np.any(op.apply(np.zeros(op.size)))
    H = op.dense()
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)


@pytest.mark.parametrize("frame", ["global", "disk_aligned"])
def test_spectrum_matches_constant_coefficient_oracle(sys_sqrt2, gammas, frame):
    spec = spectral.asymptotic_spectrum(sys_sqrt2, gammas[0], frame, 512, 1)
    c = oracles.split_axis_angle(1.0, SQRT2, 1, 1, frame)
    winds = spec.windings
    nus, w_or = oracles.constant_rotation_spectrum(c, winds.min(), winds.max())
    np.testing.assert_array_equal(winds, w_or)
    np.testing.assert_allclose(spec.eigenvalues, nus, atol=1e-6)


def test_frame_change_shifts_windings(sys_sqrt2, gammas):
    for k in (1, 2):
        g = spectral.asymptotic_spectrum(sys_sqrt2, gammas[1], "global", 512, k, richardson=False)
        d = spectral.asymptotic_spectrum(sys_sqrt2, gammas[1], "disk_aligned", 512, k, richardson=False)
        common = np.intersect1d(np.round(g.eigenvalues, 6), np.round(d.eigenvalues, 6))
        assert common.size >= 4
        for nu in common:
            wg = g.windings[np.argmin(np.abs(g.eigenvalues - nu))]
            wd = d.windings[np.argmin(np.abs(d.eigenvalues - nu))]
            assert wg - wd == k
        assert spectral.cz_index(g).cz - spectral.cz_index(d).cz == 2 * k


def _monodromy_path_cz(sys, orbit, k):
    """Index of a rotation-type path read off the numerically integrated global-frame angle."""
    path = spectral.orbit_path(sys, orbit, k * orbit.T0, "global", 256 * k)
    theta = polar_angle(path, [1.0, 0.0])
    return oracles.rotation_path_cz(theta[-1] - theta[0])


def test_cz_agrees_with_path_oracle_random_cases():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        a, b = rng.uniform(0.5, 3.0, 2)
        axis = int(rng.integers(1, 3))
        k = int(rng.integers(1, 5))
        sys = geometry.split(a, b)
        orb = orbits.axis_orbit(sys, axis)
        spec = spectral.asymptotic_spectrum(sys, orb, "global", 256, k, richardson=False)
        cz = spectral.cz_index(spec).cz
        assert cz == oracles.split_cz(a, b, axis, k) == _monodromy_path_cz(sys, orb, k), (a, b, axis, k)


def test_perturbed_orbit_spectrum():
    sys = geometry.perturbed_split(1.0, SQRT2, 0.1)
    orb = orbits.orbit_through(sys, [1.0, 0.0, 0.0, 0.0], np.pi, label="gamma1")
    spec = spectral.asymptotic_spectrum(sys, orb, "global", 512, 1)
    assert spec.structure_defects() == []
    assert max(e.residual for e in spec.entries) <= 1e-6
    assert all(e.min_norm > 0 for e in spec.entries)
    assert spectral.cz_index(spec).cz >= 3


def test_richardson_residuals(sys_sqrt2, gammas):
    spec = spectral.asymptotic_spectrum(sys_sqrt2, gammas[1], "global", 512, 2)
    assert spec.notes and "richardson" in spec.notes[0]
    assert max(e.residual for e in spec.entries) <= 1e-6
    lo, hi = spec.resolved_window
    assert lo == spec.eigenvalues[0] and hi == spec.eigenvalues[-1]


def test_bad_resolution(sys_sqrt2, gammas):
    with pytest.raises(SpectralError):
        spectral.build_operator(sys_sqrt2, gammas[0], "global", 100)
    with pytest.raises(SpectralError):
        spectral.build_operator(sys_sqrt2, gammas[0], "global", 64)


def test_window_errors(sys_sqrt2, gammas):
    op = spectral.build_operator(sys_sqrt2, gammas[0], "global", 128)
    with pytest.raises(WindowUnresolved):
        spectral.spectrum(op, (-500.0, 500.0))
    spec = spectral.spectrum(op, (1.0, 40.0))
    with pytest.raises(WindowTooNarrow):
        spectral.cz_index(spec, 0.0)


def test_gap_straddle():
    entries = [spectral.SpectrumEntry(nu, w, np.ones((4, 2)), 0.0, 1.0)
               for nu, w in [(-2.0, 0), (-1.0, 0), (1.0, 2), (2.0, 2)]]
    spec = spectral.AsymptoticSpectrum("x", "global", 128, 1, 1.0, entries, (-2.0, 2.0))
    with pytest.raises(GapStraddle):
        spectral.cz_index(spec, 0.0)


def test_non_symmetric_coefficient(gammas):
    N = 128
    t = np.linspace(0.0, 1.0, N + 1)
    mats = np.zeros((N + 1, 2, 2))
    mats[:, 0, 0] = np.exp(t)
    mats[:, 1, 1] = 1.0
    dm = np.zeros_like(mats)
    dm[:, 0, 0] = np.exp(t)
    path = SymplecticPath(t, mats, 1.0, dm)
    with pytest.raises(NonSymmetricCoefficient):
        spectral.operator_from_path(gammas[0], path, 1, N)


def test_eigenvalue_on_delta_counts_as_above():
    sys = geometry.hopf()
    orb = orbits.axis_orbit(sys, 1)
    spec = spectral.asymptotic_spectrum(sys, orb, "global", 256, 1, richardson=False)
    # global-frame Hopf fiber: nu = 2 pi m - 4 pi, so nu = 0 at winding 2
    res = spectral.cz_index(spec, 0.0)
    assert res.gap < 1e-6
    assert (res.alpha_lt, res.alpha_geq, res.cz) == (1, 2, 3)


def test_rotation_alpha_examples(sys_sqrt2, gammas):
    a1 = spectral.rotation_alpha(sys_sqrt2, gammas[0], "global")
    assert a1.alpha == pytest.approx(1 + 1 / SQRT2, abs=1e-6)
    a2 = spectral.rotation_alpha(sys_sqrt2, gammas[1], "global")
    assert a2.alpha == pytest.approx(1 + SQRT2, abs=1e-6)
    d1 = spectral.rotation_alpha(sys_sqrt2, gammas[0], "disk_aligned")
    assert d1.alpha == pytest.approx(1 / SQRT2, abs=1e-6)
    assert a1.periods >= 50
    sys = geometry.hopf()
    assert spectral.rotation_alpha(sys, orbits.axis_orbit(sys, 1), "global").alpha == pytest.approx(2.0, abs=1e-6)


def test_alpha_marked_point_independent(sys_sqrt2, gammas):
    from reeblab.flow import flow_map

    g = gammas[1]
    other = orbits.orbit_through(sys_sqrt2, flow_map(sys_sqrt2, g.marked_point, 0.77), g.T0)
    a = spectral.rotation_alpha(sys_sqrt2, g, "global").alpha
    b = spectral.rotation_alpha(sys_sqrt2, other, "global").alpha
    assert abs(a - b) <= 1e-6


def test_index_relation(sys_sqrt2, gammas):
    for axis, g in enumerate(gammas, start=1):
        alpha = spectral.rotation_alpha(sys_sqrt2, g, "global").alpha
        assert alpha > 1
        for k, cz in enumerate(FROZEN_CZ[("sqrt2", axis)], start=1):
            assert abs(cz - 2 * math.floor(k * alpha)) <= 1


def test_convexity_small_caps(sys_sqrt2, orbits_sqrt2):
    rep = spectral.convexity_check(sys_sqrt2, 3 * np.pi, orbits_sqrt2)
    assert rep.verdict and {(r["orbit"], r["k"]) for r in rep.rows} == {("gamma1", 1), ("gamma1", 2),
                                                                        ("gamma1", 3), ("gamma2", 1),
                                                                        ("gamma2", 2)}
    empty = spectral.convexity_check(sys_sqrt2, np.pi / 2, orbits_sqrt2)
    assert empty.verdict and empty.rows == []
    assert "verdict" in rep.to_table()


def test_convexity_hopf_degenerate():
    sys = geometry.hopf()
    res = orbits.find_periodic_orbits(sys, 4.0)
    rep = spectral.convexity_check(sys, 4.0, res, N=256)
    assert rep.degenerate_flag
    assert rep.rows[0]["cz"] == 3
    assert any("degenerate" in c for c in rep.caveats)
    with pytest.raises(DegenerateSystem):
        spectral.convexity_check(sys, 4.0, res, N=256, strict=True)
