"""Acceptance suite: one test per criterion, one printed PASS line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
"""

import math
import time

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from weingarten import (diagnostics, graphgeom, pipeline, psidsl, solver,
                        sphere, subsolution, symfunc)
from weingarten.config import RunConfig
from conftest import CAP, boundary_bump, random_admissible_matrix

NONCONST_PSI = "0.7 - 0.2*nz"  # K0 = 1 for the unit off-center sphere

RUN32 = dict(k=2, cap_radius=CAP, radius=1.0, center=(0.0, 0.0, 0.3),
             psi=NONCONST_PSI, rings=32, sectors=64)


@pytest.fixture(scope="module")
def solved64(offcenter_sphere):
    grid = sphere.build_grid(CAP, 64, 128)
    psi = psidsl.parse(NONCONST_PSI)
    problem = solver.CapProblem.build(grid, offcenter_sphere, 2, psi)
    state, history = solver.continuity_run(problem)
    return state, history, problem, psi


def test_criterion_1_symfunc_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(101)

    for n in range(1, 7):
        for k in range(1, n + 1):
            assert symfunc.elem_sym_norm(np.ones(n), k) == 1.0

    for _ in range(1000):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=n))
        sk = symfunc.elem_sym_norm(lam, k)
        e_inv = symfunc.elem_sym(1.0 / lam)
        snnk = e_inv[n] / (e_inv[n - k] / math.comb(n, n - k))
        assert abs(sk * snnk - 1.0) < 1e-10

    for _ in range(1000):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        A = random_admissible_matrix(rng, n)
        B = random_admissible_matrix(rng, n)
        mid = symfunc.weingarten_F(0.5 * (A + B), k)
        assert mid >= 0.5 * (symfunc.weingarten_F(A, k) + symfunc.weingarten_F(B, k)) - 1e-12
        assert np.min(np.linalg.eigvalsh(symfunc.F_gradient(A, k))) > 0

    step = 1e-5
    for _ in range(200):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        A = random_admissible_matrix(rng, n)
        grad = symfunc.F_gradient(A, k)
        fval = symfunc.weingarten_F(A, k)
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                fd = (symfunc.weingarten_F(A + step * E, k)
                      - symfunc.weingarten_F(A - step * E, k)) / (2 * step)
                an = grad[i, j] * (2.0 if i != j else 1.0)
                assert abs(an - fd) / abs(fval) <= 1e-6

    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"\nACCEPTANCE 1 symfunc suite: PASS ({elapsed:.1f}s)")


def test_criterion_2_geometry_identities():
    rng = np.random.default_rng(102)
    x = np.array([0.0, 0.0, 1.0])
    frames = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    for _ in range(1000):
        u = rng.uniform(0.2, 5.0)
        grad = rng.uniform(-10.0, 10.0, size=2)
        hess = rng.uniform(-2.0, 2.0, size=(2, 2))
        hess = 0.5 * (hess + hess.T)
        geo = graphgeom.point_geometry_u(u, grad, hess, x, frames)
        assert np.max(np.abs(geo.gamma_upper @ geo.gamma_lower - np.eye(2))) < 1e-10
        geo_v = graphgeom.point_geometry_v(
            math.log(u), grad / u, hess / u - np.outer(grad, grad) / u**2, x, frames)
        assert np.max(np.abs(geo_v.A - geo.A)) < 1e-10
        # constant-u oracle: kappa == (u, u) to rounding
        const = graphgeom.point_geometry_u(u, np.zeros(2), np.zeros((2, 2)), x, frames)
        assert np.max(np.abs(const.kappa / u - 1.0)) < 1e-14
    print("\nACCEPTANCE 2 geometry identities: PASS")


def test_criterion_3_analytic_cap_oracle(offcenter_sphere):
    # residual of the exact solution converges at order >= 1.8 for k = 1, 2
    slopes = {}
    for k in (1, 2):
        errs = []
        for rings in (16, 32, 64):
            grid = sphere.build_grid(CAP, rings, 2 * rings)
            problem = solver.CapProblem.build(grid, offcenter_sphere, k,
                                              psidsl.parse("1.0"))
            r = solver.residual_xi(problem, problem.vbar, 1.0)
            errs.append(float(np.max(np.abs(r))))
        slope = float(np.polyfit(np.log([1 / 16, 1 / 32, 1 / 64]), np.log(errs), 1)[0])
        slopes[k] = slope
        assert slope >= 1.8, f"k={k}: order {slope}"

    # Newton recovery from a 5% perturbation at 64 rings
    start = time.perf_counter()
    grid = sphere.build_grid(CAP, 64, 128)
    bump = boundary_bump(grid)
    recovery = {}
    for k in (1, 2):
        problem = solver.CapProblem.build(grid, offcenter_sphere, k, psidsl.parse("1.0"))
        result = solver.newton_solve(problem, problem.vbar + 0.05 * bump, "xi", 1.0)
        assert result.converged
        # independent one-step defect-correction estimate of the stencil error
        r_exact = solver.residual(problem, problem.vbar, "xi", 1.0)
        J = solver.assemble_jacobian(problem, problem.vbar, "xi", 1.0)
        v_h_est = problem.vbar - spla.splu(J.tocsc()).solve(r_exact)
        tau_u = float(np.max(np.abs(np.exp(v_h_est) - np.exp(problem.vbar))))
        err_u = float(np.max(np.abs(np.exp(result.v) - np.exp(problem.vbar))))
        assert err_u <= 3.0 * tau_u, f"k={k}: {err_u} vs 3 x {tau_u}"
        norms = result.residual_norms
        gaps = [math.log(norms[i] / norms[i + 1]) for i in range(len(norms) - 1)]
        assert gaps[-1] / gaps[-2] >= 1.7
        assert gaps[-2] / gaps[-3] >= 1.7
        recovery[k] = (err_u, tau_u)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"\nACCEPTANCE 3 analytic cap oracle: PASS "
          f"(orders {slopes[1]:.2f}/{slopes[2]:.2f}, 64-ring Newton {elapsed:.1f}s)")


def test_criterion_4_homotopy_structure(grid32, offcenter_sphere, centered_sphere_r2):
    # anchor: exact zero at t = 0 (centered bitwise; off-center shares the
    # curvature code path, so it is exact as well, within the stated bound)
    centered = solver.CapProblem.build(grid32, centered_sphere_r2, 2,
                                       psidsl.parse("0.25"))
    assert np.max(np.abs(solver.residual_theta(centered, centered.vbar, 0.0))) == 0.0
    offc = solver.CapProblem.build(grid32, offcenter_sphere, 2, psidsl.parse("1.0"))
    r0 = solver.residual_theta(offc, offc.vbar, 0.0)
    stencil = float(np.max(np.abs(solver.residual_xi(offc, offc.vbar, 1.0))))
    assert np.max(np.abs(r0)) <= stencil

    # family bridge to 1e-15 (bitwise here)
    v = offc.vbar + 0.01 * boundary_bump(grid32)
    diff = solver.residual_theta(offc, v, 1.0) - solver.residual_xi(offc, v, 0.0)
    assert np.max(np.abs(diff)) <= 1e-15

    # full continuity run
    psi = psidsl.parse(NONCONST_PSI)
    problem = solver.CapProblem.build(grid32, offcenter_sphere, 2, psi)
    start = time.perf_counter()
    state, history = solver.continuity_run(problem)
    elapsed = time.perf_counter() - start
    accepted = [h for h in history if h.accepted]
    assert len(accepted) <= 40
    final = float(np.max(np.abs(solver.residual_xi(problem, state.values, 1.0))))
    assert final <= 1e-9
    assert all(h.admissible for h in accepted)
    assert all(h.comparison_margin >= -1e-10 for h in accepted)
    ok, _ = graphgeom.admissible(state)
    assert ok
    assert elapsed < 300.0
    print(f"\nACCEPTANCE 4 homotopy structure: PASS "
          f"({len(accepted)} steps, final residual {final:.2e}, {elapsed:.1f}s)")


def test_criterion_5_independent_cross_check(solved64):
    state, _history, problem, psi = solved64
    stats = diagnostics.mesh_curvature_check(state, psi, 2)
    assert stats.median_rel_error <= 0.02
    assert stats.p95_rel_error <= 0.05
    identity_err, dual_err = diagnostics.duality_check(state, psi, 2)
    assert dual_err <= 1e-6
    margin = diagnostics.nm_lower_bound(state, psi, 2)
    assert margin >= -1e-8
    kmin, kmax = diagnostics.pinching_report(state)
    assert 0 < kmin <= kmax < math.inf
    print(f"\nACCEPTANCE 5 independent cross-check: PASS "
          f"(mesh median {stats.median_rel_error:.2e}, p95 {stats.p95_rel_error:.2e}, "
          f"dual {dual_err:.2e}, NM margin {margin:.2e}, "
          f"kappa [{kmin:.3f}, {kmax:.3f}])")


def test_criterion_6_serrin_gate():
    # over-curved psi is rejected before any stepping
    over = RunConfig(**{**RUN32, "psi": "1.1"})
    result = pipeline.run(over)
    assert result.status == "serrin_violation"
    assert result.exit_code == pipeline.EXIT_SERRIN
    assert result.history == []
    assert "solution.json" not in result.artifacts

    # degenerate equality psi == K0: the subsolution is returned as the
    # solution (R = 2 makes the anchor bit-exact)
    equal = RunConfig(k=2, cap_radius=CAP, radius=2.0, center=(0.0, 0.0, 0.0),
                      psi="0.25", rings=32, sectors=64)
    result = pipeline.run(equal)
    assert result.exit_code == 0
    grid = sphere.build_grid(CAP, 32, 64)
    sph = subsolution.EnclosingSphere((0.0, 0.0, 0.0), 2.0)
    problem = solver.CapProblem.build(grid, sph, 2, psidsl.parse("0.25"))
    state, _ = solver.continuity_run(problem)
    assert np.array_equal(state.values, problem.vbar)
    final = float(np.max(np.abs(solver.residual_xi(problem, state.values, 1.0))))
    assert final <= 1e-9 * problem.scale
    # the exported mesh is the enclosing sphere's cap to 1e-10
    verts = np.array([[float(t) for t in line.split()[1:]]
                      for line in result.artifacts["mesh.obj"].splitlines()
                      if line.startswith("v ")])
    assert np.max(np.abs(np.linalg.norm(verts, axis=1) - 2.0)) < 1e-10
    print(f"\nACCEPTANCE 6 serrin gate: PASS (violation exit {pipeline.EXIT_SERRIN}, "
          f"equality residual {final:.2e})")


def test_criterion_7_determinism():
    cfg = RunConfig(**RUN32)
    first = pipeline.run(cfg)
    second = pipeline.run(cfg)
    assert first.exit_code == 0 and second.exit_code == 0
    assert sorted(first.artifacts) == sorted(second.artifacts)
    for name in first.artifacts:
        assert first.artifacts[name] == second.artifacts[name], f"{name} differs"
    print(f"\nACCEPTANCE 7 determinism: PASS "
          f"({len(first.artifacts)} artifacts byte-identical)")
