"""Curated fast self-checks runnable from the CLI (`weingarten selftest`).

A condensed version of the property suites in tests/: symmetric-function
identities, graph-geometry identities, expression round-trips, and the
exact-anchor structure of the homotopy, each printed as one PASS/FAIL line.
"""

from __future__ import annotations

import numpy as np

from . import graphgeom, psidsl, solver, sphere, subsolution, symfunc


def _random_admissible(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=n))
    return (q * lam) @ q.T


def _check_symfunc(rng) -> bool:
    for n in range(1, 7):
        for k in range(1, n + 1):
            if symfunc.elem_sym_norm(np.ones(n), k) != 1.0:
                return False
    for _ in range(200):
        n = int(rng.integers(2, 6))
        lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=n))
        k = int(rng.integers(1, n + 1))
        sk = symfunc.elem_sym_norm(lam, k)
        from math import comb
        e_inv = symfunc.elem_sym(1.0 / lam)
        snnk = e_inv[n] / (e_inv[n - k] / comb(n, n - k))
        if abs(sk * snnk - 1.0) > 1e-10:
            return False
        A = _random_admissible(rng, n)
        grad = symfunc.F_gradient(A, k)
        if np.min(np.linalg.eigvalsh(grad)) <= 0:
            return False
    return True


def _check_gradient_fd(rng) -> bool:
    for _ in range(50):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        A = _random_admissible(rng, n)
        grad = symfunc.F_gradient(A, k)
        step = 1e-5
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                fd = (symfunc.weingarten_F(A + step * E, k)
                      - symfunc.weingarten_F(A - step * E, k)) / (2 * step)
                an = grad[i, j] * (2.0 if i != j else 1.0)
                if abs(an - fd) > 1e-6 * max(1.0, abs(fd)):
                    return False
    return True


def _check_graphgeom(rng) -> bool:
    x = np.array([0.0, 0.0, 1.0])
    frames = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    for _ in range(200):
        u = rng.uniform(0.2, 5.0)
        grad = rng.uniform(-3, 3, size=2)
        hess = rng.uniform(-1, 1, size=(2, 2))
        hess = 0.5 * (hess + hess.T)
        geo = graphgeom.point_geometry_u(u, grad, hess, x, frames)
        if np.max(np.abs(geo.gamma_upper @ geo.gamma_lower - np.eye(2))) > 1e-10:
            return False
        geo_v = graphgeom.point_geometry_v(np.log(u), grad / u,
                                           hess / u - np.outer(grad, grad) / u**2,
                                           x, frames)
        if np.max(np.abs(geo_v.A - geo.A)) > 1e-10 * max(1.0, np.max(np.abs(geo.A))):
            return False
        if abs(np.linalg.norm(geo.eta) - 1.0) > 1e-12:
            return False
    return True


def _check_psidsl(rng) -> bool:
    texts = ["1", "0.7 - 0.2*nz", "exp(nx) + nz^2", "sqrt(nx*nx + 0.5)",
             "1 / (2 + sin(ny))", "2^-nz + cos(nx)*0.1"]
    pts = psidsl.sphere_samples(100)
    for text in texts:
        expr = psidsl.parse(text)
        back = psidsl.parse(psidsl.to_text(expr))
        if not np.allclose(psidsl.evaluate(expr, pts), psidsl.evaluate(back, pts),
                           rtol=0, atol=0):
            return False
        vals, grads = psidsl.eval_with_gradient(expr, pts)
        if np.max(np.abs(np.einsum("ij,ij->i", grads, pts))) > 1e-12:
            return False
    return True


def _check_anchor(rng) -> bool:
    grid = sphere.build_grid(np.pi / 3, 8, 16)
    sph = subsolution.EnclosingSphere((0.0, 0.0, 0.3), 1.0)
    psi = psidsl.parse("1.0")
    problem = solver.CapProblem.build(grid, sph, 2, psi)
    r0 = solver.residual_theta(problem, problem.vbar, 0.0)
    if np.max(np.abs(r0)) != 0.0:
        return False
    rmax = np.tan(grid.cap_radius / 2)
    bump = (1 - (np.linalg.norm(grid.y, axis=1) / rmax) ** 2) ** 2
    v = problem.vbar + 0.01 * bump
    rt = solver.residual_theta(problem, v, 1.0)
    rx = solver.residual_xi(problem, v, 0.0)
    return bool(np.array_equal(rt, rx))


SUITES = [
    ("symfunc identities", _check_symfunc),
    ("F gradient vs finite differences", _check_gradient_fd),
    ("graph geometry identities", _check_graphgeom),
    ("psi expression round-trip and tangency", _check_psidsl),
    ("homotopy anchor and family bridge", _check_anchor),
]


def run_selftest(out=print) -> bool:
    rng = np.random.default_rng(20240801)
    all_ok = True
    for name, fn in SUITES:
        try:
            ok = fn(rng)
        except Exception as err:  # a crash is a failure, not an abort
            out(f"FAIL {name} ({err})")
            all_ok = False
            continue
        out(f"{'PASS' if ok else 'FAIL'} {name}")
        all_ok = all_ok and ok
    return all_ok
