"""The ten acceptance criteria, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import time

import numpy as np
import pytest

from reeblab import cli, cycles, flow, geometry, knots, orbits, sections, spectral

import oracles
from checks import fd_transverse
from oracles import CZ_SYSTEMS, FROZEN_CZ, SQRT2

crit = pytest.mark.criterion

FRIED = {"samples": 32, "horizon": 2000.0, "seed": 20240531}


@pytest.fixture(scope="module")
def cz_table():
    t0 = time.perf_counter()
    out = {}
    for name, (a, b) in CZ_SYSTEMS.items():
        sys = geometry.split(a, b)
        for axis in (1, 2):
            orb = orbits.axis_orbit(sys, axis)
            for k in range(1, 9):
                spec = spectral.asymptotic_spectrum(sys, orb, "global", 512, k, richardson=False)
                out[name, axis, k] = (spec, spectral.cz_index(spec, 0.0).cz)
    return out, time.perf_counter() - t0


@crit(1, "CZ index table, 48 cases, N=512, under 2 min")
def test_criterion_1_cz_table(cz_table):
    table, elapsed = cz_table
    assert len(table) == 48
    for (name, axis, k), (_, cz) in table.items():
        a, b = CZ_SYSTEMS[name]
        assert cz == FROZEN_CZ[name, axis][k - 1] == oracles.split_cz_formula(a, b, axis, k), (name, axis, k)
    assert elapsed < 120.0, f"{elapsed:.1f}s"


@crit(2, "two eigenvalues per winding, winding monotone in nu")
def test_criterion_2_spectral_structure(cz_table):
    for key, (spec, _) in cz_table[0].items():
        w = spec.windings
        assert np.all(np.diff(w) >= 0), key
        _, counts = np.unique(w, return_counts=True)
        assert np.all(counts == 2), key
        assert set(np.unique(w)) == set(range(w.min(), w.max() + 1)), key
        assert spec.structure_defects() == [], key


@crit(3, "dynamical convexity up to C=10; Hopf degenerate flag")
def test_criterion_3_convexity(sys_sqrt2, orbits_sqrt2):
    rep = spectral.convexity_check(sys_sqrt2, 10.0, orbits_sqrt2)
    assert rep.verdict
    assert len(rep.rows) == 5 and all(r["cz"] >= 3 for r in rep.rows)
    hopf = geometry.hopf()
    hrep = spectral.convexity_check(hopf, 4.0, orbits.find_periodic_orbits(hopf, 4.0), N=256)
    assert hrep.degenerate_flag


@crit(4, "Hopf fibres link once, self-linking -1, crossings vs Gauss within 1e-3")
def test_criterion_4_linking(sys_hopf, sys_sqrt2, gammas):
    f1 = orbits.axis_orbit(sys_hopf, 1)
    f2 = orbits.orbit_through(sys_hopf, [0.6, 0.0, 0.8, 0.0], np.pi, label="f2")
    pairs = [(knots.ClosedCurve.from_orbit(sys_hopf, f1), knots.ClosedCurve.from_orbit(sys_hopf, f2)),
             tuple(knots.ClosedCurve.from_orbit(sys_sqrt2, g) for g in gammas)]
    for c1, c2 in pairs:
        r = knots.linking_detail(c1, c2, gauss=True)
        assert r.value == 1
        assert abs(r.gauss - r.value) <= 1e-3
        assert abs(oracles.gauss_linking(c1.points, c2.points) - r.value) <= 1e-3
    assert knots.self_linking(sys_hopf, f1) == -1
    assert knots.self_linking(sys_hopf, f2) == -1


@crit(5, "2 pi rho = 1 + 1/sqrt2 and 1 + sqrt2 within 1e-5, both positive")
def test_criterion_5_rotation(sys_sqrt2, gammas):
    y = knots.linking_class(sys_sqrt2, list(gammas))
    for axis, g in enumerate(gammas, start=1):
        r = cycles.rotation_number(sys_sqrt2, g, y)
        assert abs(r.two_pi_rho - oracles.rotation_identity(1.0, SQRT2, axis)) <= 1e-5
        assert r.rho > 0
    assert oracles.rotation_identity(1.0, SQRT2, 1) == pytest.approx(1 + 1 / SQRT2)


@pytest.fixture(scope="module")
def fried_runs(sys_sqrt2, gammas, sys_hopf):
    t0 = time.perf_counter()
    split_rep = cycles.fried_check(sys_sqrt2, list(gammas), FRIED)
    hopf_rep = cycles.fried_check(sys_hopf, [orbits.axis_orbit(sys_hopf, 1)], FRIED)
    rev_rep = cycles.fried_check(sys_sqrt2, [gammas[0], gammas[1].reversed()], dict(FRIED, samples=4))
    return split_rep, hopf_rep, rev_rep, time.perf_counter() - t0


@crit(6, "Birkhoff estimates within 2/T of 1/pi + 1/(pi sqrt2), T=2000, 32 samples")
def test_criterion_6_birkhoff(fried_runs):
    rep, _, _, elapsed = fried_runs
    st = rep.stats
    T = FRIED["horizon"]
    want = oracles.birkhoff_rate(1.0, SQRT2)
    assert len(st.valid) == 32
    assert np.max(np.abs(st.values - want)) <= 2 / T
    # sup tau_i are the page return times pi*sqrt2 (page of gamma1) and pi (page of gamma2)
    bound = 1 / (np.pi * SQRT2) + 1 / np.pi
    assert rep.page_bound == pytest.approx(bound, rel=1e-6)
    assert st.min > bound - 2 / T
    assert elapsed < 300.0, f"{elapsed:.1f}s"


@crit(7, "Fried verdict true on split and Hopf, false with a reversed component")
def test_criterion_7_fried(fried_runs):
    split_rep, hopf_rep, rev_rep, _ = fried_runs
    assert split_rep.verdict and hopf_rep.verdict
    assert not rev_rep.verdict


@crit(8, "return time pi sqrt2 within 1e-6 down to rho=1e-4; page area pi within 1e-5")
def test_criterion_8_sections(sys_sqrt2):
    page = sections.build_page(sys_sqrt2, 1)
    b = sections.return_time_bounds(page)
    assert 1e-4 in b.rows
    assert abs(b.inf - np.pi * SQRT2) <= 1e-6 and abs(b.sup - np.pi * SQRT2) <= 1e-6
    area = sections.page_area(page)
    assert abs(area.quadrature - np.pi) / np.pi <= 1e-5
    assert abs(area.stokes - np.pi) / np.pi <= 1e-5
    assert area.rel_diff <= 1e-5
    assert area.binding_action == pytest.approx(np.pi, rel=1e-12)  # minimal period of gamma1


@crit(9, "rigid rotation by 2 pi sqrt2, area preserved within 1e-4, Hopf identity within 1e-7")
def test_criterion_9_return_map(sys_sqrt2, sys_hopf):
    page = sections.build_page(sys_sqrt2, 1)
    R, P = np.meshgrid(np.linspace(0.05, page.rho_max * 0.99, 8), np.linspace(0, 2 * np.pi, 12, endpoint=False),
                       indexing="ij")
    r2, p2, _ = sections.return_map(page, R, P)
    want_r, want_p, _ = oracles.split_return(1.0, SQRT2, R, P)
    assert np.max(np.abs(r2 - want_r)) <= 1e-6
    assert np.max(np.abs((p2 - want_p + np.pi) % (2 * np.pi) - np.pi)) <= 1e-6
    chk = sections.area_preservation(page, n_rect=10)
    assert len(chk.before) == 10 and chk.max_rel_error <= 1e-4
    hpage = sections.build_page(sys_hopf, 1)
    hr, hp, _ = sections.return_map(hpage, R[:, :6] * 0.7, P[:, :6])
    assert np.max(np.abs(hr - R[:, :6] * 0.7)) <= 1e-7
    assert np.max(np.abs((hp - P[:, :6] + np.pi) % (2 * np.pi) - np.pi)) <= 1e-7


@crit(10, "variational vs FD 1e-5, Richardson N vs 2N 1e-6, byte-identical reruns")
def test_criterion_10_hygiene(tmp_path, sys_sqrt2):
    pert = geometry.perturbed_split(1.0, SQRT2, 0.1)
    z0 = geometry.radial_project(pert, np.array([0.3, -0.5, 0.7, 0.2]))
    for T in (1.0, 5.0, 10.0):
        Phi = flow.transverse_linearized(pert, z0, T).final
        assert np.linalg.norm(Phi - fd_transverse(pert, z0, T), 2) <= 1e-5

    cases = [(sys_sqrt2, orbits.axis_orbit(sys_sqrt2, 1), 1), (sys_sqrt2, orbits.axis_orbit(sys_sqrt2, 2), 3),
             (pert, orbits.orbit_through(pert, [1.0, 0.0, 0.0, 0.0], np.pi, label="gamma1"), 1)]
    for sys, orb, k in cases:
        spec = spectral.asymptotic_spectrum(sys, orb, "global", 512, k, richardson=True)
        assert max(e.residual for e in spec.entries) <= 1e-6

    cfg = tmp_path / "fried.yaml"
    cfg.write_text("command: fried\nsystem: {kind: split, a: 1, b: sqrt(2)}\n"
                   "params:\n  link: [gamma1, gamma2]\n  samples: 4\n  horizon: 500\nseed: 20240531\n")
    blobs = []
    for name in ("a", "b"):
        assert cli.main(["fried", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        blobs.append((tmp_path / name / "result.json").read_bytes())
    assert blobs[0] == blobs[1]
