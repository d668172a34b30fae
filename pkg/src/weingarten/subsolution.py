"""Geometric scaffolding: enclosing sphere, compatibility gate, subsolution.

The enclosing body is restricted to round spheres containing the chart
origin strictly inside, so the minimum Weingarten curvature over it is the
closed form K0 = R^{-k}.  The compatibility gate requires 0 < psi <= K0 on
the whole sphere of normals; under it the far cap of the enclosing sphere
over the grid domain, written as a radial graph, furnishes the admissible
subsolution ubar = 1/rhobar together with the Dirichlet data phi = ubar on
the boundary ring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graphgeom, psidsl, sphere

__all__ = ["EnclosingSphere", "SerrinResult", "k_zero", "serrin_check",
           "radial_distance", "build_subsolution", "underbar_psi"]


@dataclass(frozen=True)
class EnclosingSphere:
    """Round sphere |X - center| = radius with the origin strictly inside."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if not np.all(np.isfinite(c)) or not np.isfinite(self.radius):
            raise ValueError("sphere parameters must be finite")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if np.linalg.norm(c) >= self.radius:
            raise ValueError("the chart origin must lie strictly inside the sphere")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def k_zero(sph: EnclosingSphere, k: int) -> float:
    """Every normalized W_k of a round sphere of radius R equals R^{-k}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(sph.radius) ** (-k)


@dataclass
class SerrinResult:
    passed: bool
    k0: float
    psi_min: float
    psi_max: float
    message: str


def serrin_check(psi: psidsl.PsiExpr, sph: EnclosingSphere, k: int,
                 samples: int = 16384) -> SerrinResult:
    """Gate 0 < psi <= K0, sampled densely over the sphere of normals.

    Equality with K0 is admitted up to a 1e-12 relative slack so the
    degenerate case psi == K0 passes.
    """
    k0 = k_zero(sph, k)
    vals = psidsl.evaluate(psi, psidsl.sphere_samples(samples))
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if not np.all(np.isfinite(vals)):
        return SerrinResult(False, k0, lo, hi, "psi evaluates to a non-finite value")
    if lo <= 0:
        return SerrinResult(False, k0, lo, hi,
                            f"psi must be strictly positive (min {lo:.6g})")
    if hi > k0 * (1.0 + 1e-12):
        return SerrinResult(False, k0, lo, hi,
                            f"sup psi = {hi:.6g} exceeds K0 = {k0:.6g}")
    return SerrinResult(True, k0, lo, hi, "ok")


def radial_distance(sph: EnclosingSphere, x: np.ndarray) -> np.ndarray:
    """Far intersection of the ray t x (t > 0) with the sphere.

    rhobar(x) = <x, c> + sqrt(R^2 - |c|^2 + <x, c>^2); real and positive
    whenever the origin is interior.
    """
    x = np.asarray(x, dtype=float)
    c = sph.center_array
    xc = x @ c
    disc = sph.radius**2 - float(c @ c) + xc * xc
    if np.any(disc <= 0):
        raise AssertionError("ray misses the sphere; origin not interior?")
    return xc + np.sqrt(disc)


def build_subsolution(sph: EnclosingSphere, grid: sphere.CapGrid):
    """Subsolution state ubar = 1/rhobar on the grid plus boundary data phi.

    Returns (state, phi) where phi are the boundary-ring values of ubar.
    The defining residual | rhobar x - c | - R is checked to 1e-12 and the
    state is required to be admissible.
    """
    rho = radial_distance(sph, grid.x)
    resid = np.abs(np.linalg.norm(rho[:, None] * grid.x - sph.center_array, axis=1)
                   - sph.radius)
    if np.max(resid) > 1e-12 * max(1.0, sph.radius):
        raise AssertionError(f"sphere residual {np.max(resid):.3e} out of tolerance")
    state = graphgeom.GraphState(grid, 1.0 / rho, rep="u")
    ok, report = graphgeom.admissible(state)
    if not ok:
        raise ValueError(f"subsolution not admissible at node {report['node']}")
    phi = state.values[grid.boundary_mask].copy()
    return state, phi


def underbar_psi(state: graphgeom.GraphState, k: int) -> np.ndarray:
    """Curvature field of the subsolution: F(A[ubar]) at every node."""
    ok, report = graphgeom.admissible(state)
    if not ok:
        raise ValueError(f"state not admissible at node {report['node']}")
    return graphgeom.curvature_field(state, k)
