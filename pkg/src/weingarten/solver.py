"""Two-stage homotopy continuation for the prescribed-curvature cap problem.

The unknown is v = ln u on the cap grid, with Dirichlet rows pinning the
boundary ring to ln(phi).  Interior residuals compare the curvature operator
H(v) = F(A[v]) against one of two right-hand-side families in the parameter
range [0, 1]:

    theta(t):  e^{2(v - vbar)} (t Psi + (1 - t) psibar)
    xi(s):     (s + (1 - s) e^{2(v - vbar)}) Psi

with Psi = psi^{1/k} evaluated at the Gauss map and psibar the discrete
curvature of the subsolution.  The subsolution solves the theta family
exactly at t = 0; theta at t = 1 coincides bitwise with xi at s = 0; xi at
s = 1 is the target equation.  Each continuation step runs a damped Newton
iteration whose Jacobian combines exact second-order coefficients (through
the matrix derivative of F) with directional finite differences of the
pointwise residual for the first- and zero-order terms, assembled against
the grid's sparse frame-derivative operators.

Every accepted state must be admissible and must not dip below the
subsolution (discrete comparison monitor); violations reject the step and
shrink the parameter increment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import graphgeom, psidsl, sphere, subsolution, symfunc

__all__ = [
    "StepSettings", "CapProblem", "NewtonResult", "StepRecord",
    "ContinuationError", "residual", "residual_theta", "residual_xi",
    "assemble_jacobian", "newton_solve", "continuity_run",
]

_I2 = np.eye(2)


@dataclass
class StepSettings:
    """Continuation and Newton controls (defaults match the documented schema)."""

    newton_tol: float = 1e-9        # relative to the problem scale
    max_newton: int = 30
    step_initial: float = 0.1
    step_min: float = 1e-4
    step_shrink: float = 0.5
    step_grow: float = 1.5
    comparison_tol: float = 1e-10
    fd_step: float = 1e-6
    max_attempts: int = 500
    jacobian_mode: str = "analytic"  # second-order coefficients: "analytic" | "fd"


@dataclass
class CapProblem:
    """Frozen per-run data: grid, curvature order, psi, subsolution fields."""

    grid: sphere.CapGrid
    sph: subsolution.EnclosingSphere
    k: int
    psi: psidsl.PsiExpr
    vbar: np.ndarray          # (N,) log-subsolution
    psibar: np.ndarray        # (N,) discrete curvature of the subsolution (v form)
    bc: np.ndarray            # (N,) boundary values of v (only boundary entries used)
    scale: float
    sub_state: graphgeom.GraphState = field(repr=False, default=None)

    @classmethod
    def build(cls, grid: sphere.CapGrid, sph: subsolution.EnclosingSphere,
              k: int, psi: psidsl.PsiExpr) -> "CapProblem":
        sub_state, _phi = subsolution.build_subsolution(sph, grid)
        vbar = np.log(sub_state.values)
        vstate = graphgeom.GraphState(grid, vbar, rep="v")
        psibar = graphgeom.curvature_field(vstate, k)
        if not np.all(np.isfinite(psibar)):
            raise ValueError("subsolution curvature is not finite")
        scale = max(1.0, float(np.max(np.abs(psibar))))
        return cls(grid=grid, sph=sph, k=k, psi=psi, vbar=vbar, psibar=psibar,
                   bc=vbar.copy(), scale=scale, sub_state=sub_state)


def _slots(grid: sphere.CapGrid, v: np.ndarray):
    """Frame gradient (N, 2) and Hessian (N, 2, 2) of v via the sparse ops."""
    return sphere.frame_gradient(grid, v), sphere.frame_hessian(grid, v)


def _powk(values: np.ndarray, k: int) -> np.ndarray:
    """values^(1/k) where positive, NaN elsewhere (signals inadmissibility)."""
    out = np.full(values.shape, np.nan)
    pos = values > 0
    out[pos] = values[pos] ** (1.0 / k)
    return out


def _pointwise_residual(problem: CapProblem, v, G, H, family: str, param: float):
    """Interior residual as a function of the local slots (v, grad, hess)."""
    geo = graphgeom.point_geometry_v(v, G, H, problem.grid.x, problem.grid.frames)
    lam = graphgeom.eig2(geo.A)
    Fv = _powk(symfunc.elem_sym_norm(lam, problem.k), problem.k)
    psi_vals = psidsl.evaluate(problem.psi, geo.eta)
    Psi = _powk(psi_vals, problem.k)
    e2z = np.exp(2.0 * (v - problem.vbar))
    if family == "theta":
        rhs = e2z * (param * Psi + (1.0 - param) * problem.psibar)
    elif family == "xi":
        rhs = (param + (1.0 - param) * e2z) * Psi
    else:
        raise ValueError(f"unknown family {family!r}")
    return Fv - rhs


def residual(problem: CapProblem, v: np.ndarray, family: str, param: float) -> np.ndarray:
    """Full residual: interior PDE rows plus boundary pinning rows."""
    v = np.asarray(v, dtype=float)
    G, H = _slots(problem.grid, v)
    r = _pointwise_residual(problem, v, G, H, family, param)
    bnd = problem.grid.boundary_mask
    r[bnd] = v[bnd] - problem.bc[bnd]
    return r


def residual_theta(problem: CapProblem, v: np.ndarray, t: float) -> np.ndarray:
    return residual(problem, v, "theta", t)


def residual_xi(problem: CapProblem, v: np.ndarray, s: float) -> np.ndarray:
    return residual(problem, v, "xi", s)


def assemble_jacobian(problem: CapProblem, v: np.ndarray, family: str,
                      param: float, fd_step: float = 1e-6,
                      mode: str = "analytic") -> sp.csr_matrix:
    """Jacobian of :func:`residual` with respect to the node values of v.

    In the default mode the second-order coefficients are exact:
    dF = B : d(hess v) with B = (e^v / w) gamma F'(A) gamma.  First- and
    zero-order coefficients are central differences of the pointwise
    residual in its local slots, which folds in the Gauss-map transport of
    psi without a hand-derived formula.  ``mode="fd"`` differences the
    Hessian slots as well (debug fallback).  Boundary rows are identity.
    """
    v = np.asarray(v, dtype=float)
    grid = problem.grid
    G, H = _slots(grid, v)

    def f(vv, GG, HH):
        return _pointwise_residual(problem, vv, GG, HH, family, param)

    if mode == "analytic":
        gsq = np.einsum("ij,ij->i", G, G)
        wv = np.sqrt(1.0 + gsq)
        gamma = _I2 - (G[:, :, None] * G[:, None, :]) / (wv * (1.0 + wv))[:, None, None]
        ev = np.exp(v)
        A = (ev / wv)[:, None, None] * (_I2 + gamma @ H @ gamma)
        Fp = symfunc.F_gradient(A, problem.k)
        B = (ev / wv)[:, None, None] * (gamma @ Fp @ gamma)
        c2 = [B[:, 0, 0], 2.0 * B[:, 0, 1], B[:, 1, 1]]
    elif mode == "fd":
        c2 = []
        for (a, b) in ((0, 0), (0, 1), (1, 1)):
            h = fd_step * (1.0 + np.abs(H[:, a, b]))
            Hp, Hm = H.copy(), H.copy()
            Hp[:, a, b] += h
            Hm[:, a, b] -= h
            if a != b:
                Hp[:, b, a] += h
                Hm[:, b, a] -= h
            c2.append((f(v, G, Hp) - f(v, G, Hm)) / (2.0 * h))
    else:
        raise ValueError(f"unknown jacobian mode {mode!r}")

    c1 = []
    for m in (0, 1):
        h = fd_step * (1.0 + np.abs(G[:, m]))
        Gp, Gm = G.copy(), G.copy()
        Gp[:, m] += h
        Gm[:, m] -= h
        c1.append((f(v, Gp, H) - f(v, Gm, H)) / (2.0 * h))
    h0 = fd_step * (1.0 + np.abs(v))
    c0 = (f(v + h0, G, H) - f(v - h0, G, H)) / (2.0 * h0)

    interior = grid.interior_mask.astype(float)
    D = sp.diags
    J = (D(c0 * interior)
         + D(c1[0] * interior) @ grid.op_g1 + D(c1[1] * interior) @ grid.op_g2
         + D(c2[0] * interior) @ grid.op_h11
         + D(c2[1] * interior) @ grid.op_h12
         + D(c2[2] * interior) @ grid.op_h22
         + D(grid.boundary_mask.astype(float)))
    return J.tocsr()


def _norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r)))


def _is_admissible(grid: sphere.CapGrid, v: np.ndarray) -> bool:
    ok, _ = graphgeom.admissible(graphgeom.GraphState(grid, v, rep="v"))
    return ok


@dataclass
class NewtonResult:
    v: np.ndarray
    iterations: int
    residual_norms: list
    converged: bool
    message: str = "ok"


def backtrack(problem: CapProblem, v: np.ndarray, delta: np.ndarray, norm: float,
              family: str, param: float):
    """Damped update: halve alpha until the trial is finite, admissible, and
    strictly decreases the max-norm residual.  Returns (v, r, norm, alpha)
    or None when alpha = 1/64 still fails."""
    alpha = 1.0
    for _ in range(7):
        vt = v + alpha * delta
        rt = residual(problem, vt, family, param)
        nt = _norm(rt)
        if np.isfinite(nt) and nt < norm and _is_admissible(problem.grid, vt):
            return vt, rt, nt, alpha
        alpha *= 0.5
    return None


def newton_solve(problem: CapProblem, v0: np.ndarray, family: str, param: float,
                 settings: StepSettings | None = None) -> NewtonResult:
    """Damped Newton iteration at a fixed homotopy parameter.

    Trial updates are backtracked (alpha = 1, 1/2, ..., 1/64) until the
    iterate is admissible, finite, and strictly reduces the max-norm
    residual; exhaustion of the line search fails the solve.
    """
    settings = settings or StepSettings()
    tol = settings.newton_tol * problem.scale
    v = np.asarray(v0, dtype=float).copy()
    r = residual(problem, v, family, param)
    norm = _norm(r)
    norms = [norm]
    if not np.isfinite(norm):
        return NewtonResult(v, 0, norms, False, "non-finite residual at start")

    iterations = 0
    while norm > tol and iterations < settings.max_newton:
        try:
            J = assemble_jacobian(problem, v, family, param, settings.fd_step,
                                  settings.jacobian_mode)
            delta = spla.splu(J.tocsc()).solve(-r)
        except (RuntimeError, ValueError) as err:
            return NewtonResult(v, iterations, norms, False, f"linear solve failed: {err}")
        if not np.all(np.isfinite(delta)):
            return NewtonResult(v, iterations, norms, False, "non-finite Newton direction")

        step = backtrack(problem, v, delta, norm, family, param)
        if step is None:
            return NewtonResult(v, iterations, norms, False, "line search exhausted")
        v, r, norm, _alpha = step
        iterations += 1
        norms.append(norm)

    return NewtonResult(v, iterations, norms, norm <= tol,
                        "ok" if norm <= tol else "iteration limit reached")


@dataclass
class StepRecord:
    family: str
    parameter: float
    delta: float
    newton_iterations: int
    residual: float
    accepted: bool
    message: str = ""
    admissible: bool = False
    comparison_margin: float = float("nan")


class ContinuationError(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


def continuity_run(problem: CapProblem, settings: StepSettings | None = None):
    """March theta: 0 -> 1 then xi: 0 -> 1 with adaptive parameter steps.

    Returns (final v-form GraphState, history).  Raises ContinuationError
    with the history attached when the step controller underflows.
    """
    settings = settings or StepSettings()
    v = problem.vbar.copy()
    history: list[StepRecord] = []
    attempts = 0

    for family in ("theta", "xi"):
        param = 0.0
        delta = settings.step_initial
        while param < 1.0:
            attempts += 1
            if attempts > settings.max_attempts:
                raise ContinuationError("step budget exhausted", history)
            trial = min(param + delta, 1.0)
            result = newton_solve(problem, v, family, trial, settings)
            ok, message = result.converged, result.message
            drop = float(np.min(result.v - problem.vbar))
            if ok and drop < -settings.comparison_tol:
                ok = False
                message = f"comparison monitor violated (min(v - vbar) = {drop:.3e})"
            history.append(StepRecord(family, trial, delta, result.iterations,
                                      result.residual_norms[-1], ok, message,
                                      admissible=_is_admissible(problem.grid, result.v),
                                      comparison_margin=drop))
            if ok:
                v = result.v
                param = trial
                delta = min(delta * settings.step_grow, 1.0)
            else:
                delta *= settings.step_shrink
                if delta < settings.step_min:
                    raise ContinuationError(
                        f"continuation stalled in the {family} family near "
                        f"parameter {param:.6g}: {message}", history)

    final_norm = _norm(residual(problem, v, "xi", 1.0))
    if not final_norm <= settings.newton_tol * problem.scale:
        raise ContinuationError(
            f"final residual {final_norm:.3e} above tolerance", history)
    return graphgeom.GraphState(problem.grid, v, rep="v"), history
