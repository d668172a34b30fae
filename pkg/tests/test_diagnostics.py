import math

import numpy as np
import pytest

from weingarten import diagnostics, graphgeom, psidsl, solver, subsolution, symfunc
from conftest import boundary_bump


@pytest.fixture(scope="module")
def solved16(grid16, offcenter_sphere):
    psi = psidsl.parse("0.7 - 0.2*nz")
    prob = solver.CapProblem.build(grid16, offcenter_sphere, 2, psi)
    state, _ = solver.continuity_run(prob)
    return state, psi, prob


def test_pinching_centered_sphere(grid16):
    state = graphgeom.GraphState(grid16, np.full(grid16.n_nodes, 0.5), rep="u")
    kmin, kmax = diagnostics.pinching_report(state)
    assert kmin == pytest.approx(0.5, rel=1e-14)
    assert kmax == pytest.approx(0.5, rel=1e-14)


def test_pinching_offcenter_subsolution(grid16, offcenter_sphere):
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid16)
    kmin, kmax = diagnostics.pinching_report(state)
    assert kmin == pytest.approx(1.0, abs=5e-3)
    assert kmax == pytest.approx(1.0, abs=5e-3)


def test_pinching_rejects_nonconvex(grid16):
    state = graphgeom.GraphState(grid16, np.ones(grid16.n_nodes), rep="u")
    state.geometry.A[9] = np.diag([-2.0, 0.5])
    with pytest.raises(ValueError):
        diagnostics.pinching_report(state)


def test_pinching_solved_state(solved16):
    state, _psi, _prob = solved16
    kmin, kmax = diagnostics.pinching_report(state)
    assert 0 < kmin <= kmax < math.inf


def test_duality_exact_centered_cap(grid16, centered_sphere_r2):
    state, _ = subsolution.build_subsolution(centered_sphere_r2, grid16)
    for k in (1, 2):
        k0 = subsolution.k_zero(centered_sphere_r2, k)
        identity_err, dual_err = diagnostics.duality_check(state, psidsl.parse(f"{k0}"), k)
        assert identity_err <= 1e-8
        assert dual_err <= 1e-8


def test_duality_identity_random_sweep():
    rng = np.random.default_rng(51)
    for _ in range(1000):
        lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=2))
        for k in (1, 2):
            sk = symfunc.elem_sym_norm(lam, k)
            snnk = diagnostics._snnk(1.0 / lam, k)
            assert abs(sk * snnk - 1.0) < 1e-10


def test_duality_separates_algebra_from_pde(grid16, offcenter_sphere):
    # an unsolved state: identity still machine-exact, dual equation off
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid16)
    lifted = graphgeom.GraphState(grid16, np.log(state.values) + 0.1, rep="v")
    psi = psidsl.parse("1.0")
    identity_err, dual_err = diagnostics.duality_check(lifted, psi, 2)
    assert identity_err <= 1e-10
    assert dual_err > 1e-3


def test_duality_solved_state(solved16):
    state, psi, _prob = solved16
    identity_err, dual_err = diagnostics.duality_check(state, psi, 2)
    assert identity_err <= 1e-10
    assert dual_err <= 1e-6


def test_nm_margin_hand_case():
    # kappa = (1, 4), n = 2, k = 1: S_2(1, 1/4) = 1/4, psi~ = 0.4,
    # margin = 1/4 - 0.4 * (1/4)^(1/2) = 0.05
    kappa = np.array([1.0, 4.0])
    inv = 1.0 / kappa
    sn = symfunc.elem_sym(inv)[-1]
    psit = 1.0 / symfunc.elem_sym_norm(kappa, 1)
    margin = sn - psit * sn ** 0.5
    assert margin == pytest.approx(0.05, rel=1e-12)


def test_nm_margin_random_sweep():
    # psi~ defined by the equation itself: the margin is Maclaurin's inequality
    rng = np.random.default_rng(52)
    for _ in range(1000):
        lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=2))
        for k in (1, 2):
            inv = 1.0 / lam
            sn = symfunc.elem_sym(inv)[-1]
            psit_k = 1.0 / symfunc.elem_sym_norm(lam, k)
            margin = sn - psit_k * sn ** ((2 - k) / 2)
            assert margin >= -1e-12


def test_nm_margin_exact_cap(grid16, centered_sphere_r2):
    state, _ = subsolution.build_subsolution(centered_sphere_r2, grid16)
    margin = diagnostics.nm_lower_bound(state, psidsl.parse("0.25"), 2)
    assert abs(margin) <= 1e-8


def test_nm_margin_solved_state(solved16):
    state, psi, _prob = solved16
    assert diagnostics.nm_lower_bound(state, psi, 2) >= -1e-8


def test_gradient_max_locus_centered(grid16):
    state = graphgeom.GraphState(grid16, np.full(grid16.n_nodes, 0.5), rep="u")
    locus = diagnostics.gradient_max_locus(state)
    assert locus.grad_norm == 0.0
    assert locus.w_max == pytest.approx(0.5, rel=1e-14)


def test_gradient_max_locus_offcenter(grid16, offcenter_sphere):
    # for this geometry w peaks on the boundary ring; the locus reports it
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid16)
    locus = diagnostics.gradient_max_locus(state)
    assert locus.on_boundary


def test_gradient_max_locus_solved(solved16):
    state, _psi, _prob = solved16
    locus = diagnostics.gradient_max_locus(state)
    assert np.isfinite(locus.w_max)


def test_mesh_curvature_exact_cap(grid64, offcenter_sphere):
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid64)
    stats = diagnostics.mesh_curvature_check(state, psidsl.parse("1.0"), 2)
    assert stats.median_rel_error <= 0.01
    assert stats.checked > 0.9 * grid64.n_nodes * (grid64.rings - 2) / grid64.rings


def test_mesh_curvature_flags_corruption(grid16, offcenter_sphere):
    # a 10% bump at one node either wrecks the local fits (skips) or blows
    # the high quantile; either way the spike is visible in the stats
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid16)
    psi = psidsl.parse("1.0")
    clean = diagnostics.mesh_curvature_check(state, psi, 2)
    values = state.values.copy()
    values[grid16.node_index(8, 3)] *= 1.1
    bad = graphgeom.GraphState(grid16, values, rep="u")
    corrupted = diagnostics.mesh_curvature_check(bad, psi, 2)
    assert (corrupted.skipped > clean.skipped
            or corrupted.p95_rel_error > 5 * clean.p95_rel_error)
    assert corrupted.checked + corrupted.skipped == clean.checked + clean.skipped


def test_pde_checks_degrade_monotonically(grid16, offcenter_sphere):
    state, _ = subsolution.build_subsolution(offcenter_sphere, grid16)
    psi = psidsl.parse("1.0")
    vbar = np.log(state.values)
    bump = boundary_bump(grid16)
    errs = []
    for eps in (0.0, 0.01, 0.1):
        s = graphgeom.GraphState(grid16, vbar + eps * bump, rep="v")
        _identity, dual = diagnostics.duality_check(s, psi, 2)
        errs.append(dual)
    assert errs[0] < errs[1] < errs[2]


def test_run_diagnostics_report_roundtrip(solved16):
    state, psi, prob = solved16
    report = diagnostics.run_diagnostics(state, psi, 2, vbar=prob.vbar)
    text = diagnostics.report_text(report)
    assert "kappa_min" in text and "overall" in text
    assert report.comparison_margin >= -1e-10
    assert report.passes["pinching_positive"]
    assert report.passes["duality_identity"]
    assert report.passes["dual_equation"]
    assert report.passes["nm_margin"]
