"""Post-solve verification layer.

Checks the structural facts a converged state must satisfy: positive
curvature pinching, the symmetric-function duality identity and the dual
form of the equation, the Newton-Maclaurin lower-bound margin, the location
of the gradient maximum, and a mesh-based curvature estimate that shares no
curvature code with the analytic pipeline (local quadric fits on the
embedded vertices).  Equation-level checks are evaluated on the interior
nodes, where the discrete equation is actually imposed; boundary rows are
Dirichlet and carry only one-sided stencil accuracy.

All checks are read-only; a report is produced even when thresholds fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import graphgeom, psidsl, symfunc

__all__ = [
    "MeshCurvatureStats", "GradientMaxLocus", "DiagnosticThresholds",
    "DiagnosticsReport", "pinching_report", "duality_check", "nm_lower_bound",
    "gradient_max_locus", "mesh_curvature_check", "run_diagnostics", "report_text",
]


def pinching_report(state: graphgeom.GraphState) -> tuple[float, float]:
    """Extremal principal curvatures over all nodes; kappa_min must be > 0."""
    kap = state.geometry.kappa
    kmin, kmax = float(np.min(kap)), float(np.max(kap))
    if not kmin > 0:
        raise ValueError(f"principal curvatures not positive (min {kmin:.3e})")
    return kmin, kmax


def _snnk(lam: np.ndarray, k: int) -> np.ndarray:
    """Normalized quotient S_{n,n-k} = S_n / S_{n-k} on eigenvalue vectors."""
    n = lam.shape[-1]
    e = symfunc.elem_sym(lam)
    return e[..., n] / (e[..., n - k] / comb(n, n - k))


def duality_check(state: graphgeom.GraphState, psi: psidsl.PsiExpr, k: int):
    """(identity error, dual-equation error).

    The identity S_k(kappa) * S_{n,n-k}(1/kappa) = 1 is pure algebra and is
    checked at every node; the dual-equation restatement
    F~(diag(1/kappa)) * psi^{1/k}(eta) = 1 holds exactly where the discrete
    equation holds, so it is reported over interior nodes.
    """
    geo = state.geometry
    kap = geo.kappa
    sk = symfunc.elem_sym_norm(kap, k)
    identity_err = float(np.max(np.abs(sk * _snnk(1.0 / kap, k) - 1.0)))
    psi_vals = psidsl.evaluate(psi, geo.eta)
    dual_vals = _snnk(1.0 / kap, k) ** (1.0 / k) * psi_vals ** (1.0 / k)
    interior = state.grid.interior_mask
    dual_err = float(np.max(np.abs(dual_vals[interior] - 1.0)))
    return identity_err, dual_err


def nm_lower_bound(state: graphgeom.GraphState, psi: psidsl.PsiExpr, k: int) -> float:
    """Min over interior nodes of S_n(1/kappa) - psi~^k S_n(1/kappa)^((n-k)/n).

    Nonnegative wherever the equation holds, by the Maclaurin chain.
    """
    geo = state.geometry
    kap = geo.kappa
    n = kap.shape[-1]
    inv = 1.0 / kap
    sn_inv = symfunc.elem_sym(inv)[..., n]
    psi_vals = psidsl.evaluate(psi, geo.eta)
    psit_k = psi_vals ** (-1.0)  # psi~^k = psi^(-1)
    margin = sn_inv - psit_k * sn_inv ** ((n - k) / n)
    return float(np.min(margin[state.grid.interior_mask]))


@dataclass
class GradientMaxLocus:
    node: int
    on_boundary: bool
    w_max: float
    grad_norm: float


def gradient_max_locus(state: graphgeom.GraphState) -> GradientMaxLocus:
    """Where w = sqrt(u^2 + |grad u|^2) peaks; |grad u| there should be O(h)
    when the peak is interior, by the maximum-principle structure."""
    geo = state.geometry
    node = int(np.argmax(geo.w))
    gnorm = float(np.linalg.norm(geo.grad_u[node]))
    return GradientMaxLocus(node=node,
                            on_boundary=bool(state.grid.boundary_mask[node]),
                            w_max=float(geo.w[node]), grad_norm=gnorm)


@dataclass
class MeshCurvatureStats:
    median_rel_error: float
    p95_rel_error: float
    checked: int
    skipped: int


def _two_ring(grid) -> list:
    """2-ring neighbor indices per node (lattice adjacency squared)."""
    adj = [set() for _ in range(grid.n_nodes)]
    sec = grid.sectors
    for j in range(sec):
        a = grid.node_index(1, j)
        adj[0].add(a)
        adj[a].add(0)
    for m in range(1, grid.rings + 1):
        for j in range(sec):
            a = grid.node_index(m, j)
            b = grid.node_index(m, j + 1)
            adj[a].add(b)
            adj[b].add(a)
            if m < grid.rings:
                c = grid.node_index(m + 1, j)
                adj[a].add(c)
                adj[c].add(a)
    out = []
    for i in range(grid.n_nodes):
        ring2 = set(adj[i])
        for nb in adj[i]:
            ring2 |= adj[nb]
        ring2.discard(i)
        out.append(np.fromiter(sorted(ring2), dtype=np.int64))
    return out


def _fit_quadric(dX: np.ndarray, axis: np.ndarray):
    """Least-squares quadric in the frame with z along ``axis``.

    Returns (beta, frame) with beta the 6 model coefficients of
    z = b0 + b1 x + b2 y + b3 x^2/2 + b4 xy + b5 y^2/2, or None on a
    degenerate fit.
    """
    a = axis / np.linalg.norm(axis)
    seed = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(a, seed)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(a, t1)
    xi1 = dX @ t1
    xi2 = dX @ t2
    zeta = dX @ a
    design = np.stack([np.ones_like(xi1), xi1, xi2,
                       0.5 * xi1 * xi1, xi1 * xi2, 0.5 * xi2 * xi2], axis=1)
    beta, _res, rank, _sv = np.linalg.lstsq(design, zeta, rcond=None)
    if rank < 6:
        return None
    return beta, (t1, t2, a)


def mesh_curvature_check(state: graphgeom.GraphState, psi: psidsl.PsiExpr,
                         k: int) -> MeshCurvatureStats:
    """Independent curvature estimate from the embedded mesh.

    Per interior vertex with a full 2-ring: fit a quadric over the neighbor
    positions (first in the radial frame, then refit in the frame of the
    fitted normal), read principal curvatures from the fitted fundamental
    forms, and compare S_k against psi at the fitted normal.  Shares only
    the embedding with the analytic pipeline.
    """
    mesh = graphgeom.embed(state)
    grid = state.grid
    neighbors = _two_ring(grid)
    candidates = [0] + [i for i in range(1, grid.n_nodes)
                        if 1 <= grid.ring_of[i] <= grid.rings - 2]

    errors = []
    skipped = 0
    for i in candidates:
        nb = neighbors[i]
        dX = mesh.vertices[nb] - mesh.vertices[i]
        radial = mesh.vertices[i]
        fit = _fit_quadric(dX, radial)
        if fit is None:
            skipped += 1
            continue
        beta, (t1, t2, a) = fit
        normal = a - beta[1] * t1 - beta[2] * t2
        fit = _fit_quadric(dX, normal)
        if fit is None:
            skipped += 1
            continue
        beta, (t1, t2, a) = fit
        b1, b2 = beta[1], beta[2]
        g11, g12, g22 = 1 + b1 * b1, b1 * b2, 1 + b2 * b2
        wslope = np.sqrt(1 + b1 * b1 + b2 * b2)
        f11, f12, f22 = beta[3] / wslope, beta[4] / wslope, beta[5] / wslope
        detI = g11 * g22 - g12 * g12
        # shape operator relative to the outward axis; convex caps curve away
        # from it, so the positive-convention curvatures are the negated eigenvalues
        tr_s = (f11 * g22 - 2 * f12 * g12 + f22 * g11) / detI
        det_s = (f11 * f22 - f12 * f12) / detI
        disc = 0.25 * tr_s * tr_s - det_s
        if disc < 0:
            skipped += 1
            continue
        root = np.sqrt(disc)
        kappa = -np.array([0.5 * tr_s + root, 0.5 * tr_s - root])
        if np.any(kappa <= 0):
            skipped += 1
            continue
        n_hat = (a - b1 * t1 - b2 * t2) / wslope
        psi_val = float(psidsl.evaluate(psi, n_hat))
        wk = float(symfunc.elem_sym_norm(kappa, k))
        errors.append(abs(wk - psi_val) / abs(psi_val))

    if not errors:
        return MeshCurvatureStats(float("nan"), float("nan"), 0, skipped)
    errors = np.asarray(errors)
    return MeshCurvatureStats(float(np.median(errors)),
                              float(np.quantile(errors, 0.95)),
                              int(errors.size), skipped)


@dataclass
class DiagnosticThresholds:
    mesh_median_tol: float = 0.02
    mesh_p95_tol: float = 0.05
    duality_tol: float = 1e-6
    nm_margin_tol: float = 1e-8


@dataclass
class DiagnosticsReport:
    kappa_min: float
    kappa_max: float
    comparison_margin: float | None
    identity_error: float
    dual_equation_error: float
    nm_margin: float
    mesh_stats: MeshCurvatureStats
    gradient_locus: GradientMaxLocus
    trace_min: float
    trace_max: float
    thresholds: DiagnosticThresholds
    passes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passes.values())


def run_diagnostics(state: graphgeom.GraphState, psi: psidsl.PsiExpr, k: int,
                    vbar: np.ndarray | None = None,
                    thresholds: DiagnosticThresholds | None = None) -> DiagnosticsReport:
    """Run every check and collect pass/fail against the thresholds."""
    thresholds = thresholds or DiagnosticThresholds()
    kmin, kmax = pinching_report(state)
    identity_err, dual_err = duality_check(state, psi, k)
    nm = nm_lower_bound(state, psi, k)
    locus = gradient_max_locus(state)
    mesh = mesh_curvature_check(state, psi, k)

    geo = state.geometry
    trace = geo.u * 2.0 + geo.hess_u[:, 0, 0] + geo.hess_u[:, 1, 1]
    margin = None
    if vbar is not None:
        v = state.values if state.rep == "v" else np.log(state.values)
        margin = float(np.min(v - vbar))

    passes = {
        "pinching_positive": kmin > 0 and np.isfinite(kmax),
        "duality_identity": identity_err <= 1e-10,
        "dual_equation": dual_err <= thresholds.duality_tol,
        "nm_margin": nm >= -thresholds.nm_margin_tol,
        "mesh_median": mesh.median_rel_error <= thresholds.mesh_median_tol,
        "mesh_p95": mesh.p95_rel_error <= thresholds.mesh_p95_tol,
    }
    return DiagnosticsReport(
        kappa_min=kmin, kappa_max=kmax, comparison_margin=margin,
        identity_error=identity_err, dual_equation_error=dual_err,
        nm_margin=nm, mesh_stats=mesh, gradient_locus=locus,
        trace_min=float(np.min(trace)), trace_max=float(np.max(trace)),
        thresholds=thresholds, passes=passes,
    )


def report_text(report: DiagnosticsReport) -> str:
    """Deterministic structured-text rendering of a report."""
    lines = [
        "diagnostics report",
        "==================",
        f"kappa_min = {report.kappa_min!r}",
        f"kappa_max = {report.kappa_max!r}",
        f"comparison_margin = {report.comparison_margin!r}",
        f"duality_identity_error = {report.identity_error!r}",
        f"dual_equation_error = {report.dual_equation_error!r}",
        f"newton_maclaurin_margin = {report.nm_margin!r}",
        f"mesh_median_rel_error = {report.mesh_stats.median_rel_error!r}",
        f"mesh_p95_rel_error = {report.mesh_stats.p95_rel_error!r}",
        f"mesh_vertices_checked = {report.mesh_stats.checked}",
        f"mesh_vertices_skipped = {report.mesh_stats.skipped}",
        f"gradient_max_node = {report.gradient_locus.node}",
        f"gradient_max_on_boundary = {report.gradient_locus.on_boundary}",
        f"gradient_max_w = {report.gradient_locus.w_max!r}",
        f"gradient_max_grad_norm = {report.gradient_locus.grad_norm!r}",
        f"trace_quantity_min = {report.trace_min!r}",
        f"trace_quantity_max = {report.trace_max!r}",
    ]
    for name in sorted(report.passes):
        lines.append(f"check[{name}] = {'pass' if report.passes[name] else 'FAIL'}")
    lines.append(f"overall = {'pass' if report.ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
