"""Pointwise geometry of radial graphs X = x/u over the cap.

Two equivalent parametrizations are supported: the reciprocal radius u > 0
and its logarithm v = ln u.  Both produce the same curvature matrix A whose
eigenvalues are the principal curvatures; the v form is what the homotopy
solver iterates on, the u form is what the geometric scaffolding and the
diagnostics use.  All formulas are written in the orthonormal conformal
frame, so the round metric is the identity wherever it appears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sphere, symfunc

__all__ = [
    "PointGeometry",
    "GraphState",
    "Mesh",
    "point_geometry_u",
    "point_geometry_v",
    "eig2",
    "admissible",
    "admissibility_margins",
    "curvature_field",
    "embed",
    "support_samples",
]


def eig2(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a stack of symmetric 2x2 matrices, closed form."""
    a, b, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
    mean = 0.5 * (a + d)
    disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b * b, 0.0))
    return np.stack([mean - disc, mean + disc], axis=-1)


@dataclass
class PointGeometry:
    """Per-node geometric data of a radial graph; arrays batched over nodes."""

    u: np.ndarray            # (N,)
    grad_u: np.ndarray       # (N, 2) frame components
    hess_u: np.ndarray       # (N, 2, 2)
    w: np.ndarray            # (N,) sqrt(u^2 + |grad u|^2)
    gamma_upper: np.ndarray  # (N, 2, 2)
    gamma_lower: np.ndarray  # (N, 2, 2)
    A: np.ndarray            # (N, 2, 2) curvature matrix
    eta: np.ndarray          # (N, 3) Gauss map (ambient unit vectors)
    g: np.ndarray            # (N, 2, 2) induced metric
    g_inv: np.ndarray        # (N, 2, 2)

    @property
    def kappa(self) -> np.ndarray:
        """Principal curvatures, ascending, shape (N, 2)."""
        return eig2(self.A)


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


_I2 = np.eye(2)


def point_geometry_u(u, grad_u, hess_u, x, frames) -> PointGeometry:
    """Geometry from the u = 1/rho parametrization.

    ``x`` are sphere points (N, 3); ``frames`` the ambient frame vectors
    (N, 2, 3) used to expand the gradient for the Gauss map.
    """
    u = np.asarray(u, dtype=float)
    grad_u = np.asarray(grad_u, dtype=float)
    hess_u = np.asarray(hess_u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("u must be positive")

    gsq = np.einsum("...i,...i->...", grad_u, grad_u)
    w = np.sqrt(u * u + gsq)
    outer = _outer(grad_u, grad_u)

    g = (_I2 + outer / u[..., None, None] ** 2) / u[..., None, None] ** 2
    g_inv = u[..., None, None] ** 2 * (_I2 - outer / w[..., None, None] ** 2)
    h = (u[..., None, None] * _I2 + hess_u) / (u * w)[..., None, None]
    gamma_upper = u[..., None, None] * (_I2 - outer / (w * (u + w))[..., None, None])
    gamma_lower = (_I2 + outer / (u * (u + w))[..., None, None]) / u[..., None, None]
    A = gamma_upper @ h @ gamma_upper

    # Outward unit normal of the graph X = x/u.  In terms of rho = 1/u this
    # is -(grad rho - rho x)/sqrt(rho^2 + |grad rho|^2); the u form below is
    # the same vector and is orthogonal to the graph tangents (the naive
    # substitution u -> rho in the rho formula flips the gradient term and
    # is *not* a normal).
    grad_ambient = np.einsum("...i,...ik->...k", grad_u, frames)
    eta = (grad_ambient + u[..., None] * x) / w[..., None]
    return PointGeometry(u=u, grad_u=grad_u, hess_u=hess_u, w=w,
                         gamma_upper=gamma_upper, gamma_lower=gamma_lower,
                         A=A, eta=eta, g=g, g_inv=g_inv)


def point_geometry_v(v, grad_v, hess_v, x, frames) -> PointGeometry:
    """Geometry from the logarithmic parametrization v = ln u.

    A = (e^v / w)(I + gamma hess_v gamma) with w = sqrt(1 + |grad v|^2) and
    gamma = I - grad_v grad_v / (w (1 + w)); algebraically identical to the
    u form under u = e^v but free of the positivity constraint.
    """
    v = np.asarray(v, dtype=float)
    grad_v = np.asarray(grad_v, dtype=float)
    hess_v = np.asarray(hess_v, dtype=float)

    gsq = np.einsum("...i,...i->...", grad_v, grad_v)
    wv = np.sqrt(1.0 + gsq)
    outer = _outer(grad_v, grad_v)
    gamma = _I2 - outer / (wv * (1.0 + wv))[..., None, None]
    ev = np.exp(v)
    A = (ev / wv)[..., None, None] * (_I2 + gamma @ hess_v @ gamma)

    grad_ambient = np.einsum("...i,...ik->...k", grad_v, frames)
    eta = (x + grad_ambient) / wv[..., None]

    u = ev
    grad_u = ev[..., None] * grad_v
    hess_u = ev[..., None, None] * (hess_v + outer)
    w = ev * wv
    gamma_upper = ev[..., None, None] * gamma
    gamma_lower = (_I2 + outer / (1.0 + wv)[..., None, None]) / ev[..., None, None]
    g = (_I2 + outer) / ev[..., None, None] ** 2
    g_inv = ev[..., None, None] ** 2 * (_I2 - outer / wv[..., None, None] ** 2)
    return PointGeometry(u=u, grad_u=grad_u, hess_u=hess_u, w=w,
                         gamma_upper=gamma_upper, gamma_lower=gamma_lower,
                         A=A, eta=eta, g=g, g_inv=g_inv)


class GraphState:
    """A scalar field on a cap grid plus its cached derived geometry.

    ``rep`` selects the parametrization of ``values``: "u" or "v".
    States are treated as immutable; build updated ones with
    :meth:`with_values`.
    """

    def __init__(self, grid: sphere.CapGrid, values: np.ndarray, rep: str = "u"):
        if rep not in ("u", "v"):
            raise ValueError("rep must be 'u' or 'v'")
        self.grid = grid
        self.rep = rep
        self.values = np.asarray(values, dtype=float).copy()
        if self.values.shape != (grid.n_nodes,):
            raise ValueError("field length must match node count")
        self._geometry: PointGeometry | None = None

    def with_values(self, values: np.ndarray) -> "GraphState":
        return GraphState(self.grid, values, self.rep)

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.values) if self.rep == "v" else self.values

    @property
    def geometry(self) -> PointGeometry:
        if self._geometry is None:
            grad = sphere.frame_gradient(self.grid, self.values)
            hess = sphere.frame_hessian(self.grid, self.values)
            if self.rep == "u":
                self._geometry = point_geometry_u(self.values, grad, hess,
                                                  self.grid.x, self.grid.frames)
            else:
                self._geometry = point_geometry_v(self.values, grad, hess,
                                                  self.grid.x, self.grid.frames)
        return self._geometry


def admissibility_margins(state: GraphState) -> np.ndarray:
    """Smallest eigenvalue of (u I + hess u) at every node."""
    geo = state.geometry
    m = geo.u[:, None, None] * _I2 + geo.hess_u
    return eig2(m)[:, 0]


def admissible(state: GraphState) -> tuple[bool, dict]:
    """Strict convexity check; reports the worst node either way."""
    margins = admissibility_margins(state)
    if not np.all(np.isfinite(margins)):
        bad = int(np.argmin(np.isfinite(margins)))
        return False, {"node": bad, "min_eigenvalue": float("nan")}
    eps = symfunc.cone_epsilon(margins)
    worst = int(np.argmin(margins))
    ok = bool(margins[worst] > eps)
    return ok, {"node": worst, "min_eigenvalue": float(margins[worst])}


def curvature_field(state: GraphState, k: int) -> np.ndarray:
    """F(A) = S_k(kappa)^(1/k) at every node; NaN where S_k <= 0."""
    lam = state.geometry.kappa
    s = symfunc.elem_sym_norm(lam, k)
    out = np.full(s.shape, np.nan)
    pos = s > 0
    out[pos] = s[pos] ** (1.0 / k)
    return out


@dataclass
class Mesh:
    vertices: np.ndarray  # (N, 3)
    faces: np.ndarray     # (M, 3) int, counterclockwise from outside


def embed(state: GraphState) -> Mesh:
    """Embedded radial graph: vertices X = x/u, faces from the grid lattice.

    Quads are split along their shorter diagonal; the center is fanned.
    Face winding is counterclockwise seen from outside (normal away from
    the origin).
    """
    grid = state.grid
    u = state.u
    if np.any(u <= 0):
        raise ValueError("u must be positive to embed")
    verts = grid.x / u[:, None]

    faces = []
    sec = grid.sectors
    for j in range(sec):
        faces.append((0, grid.node_index(1, j), grid.node_index(1, j + 1)))
    for m in range(1, grid.rings):
        for j in range(sec):
            a = grid.node_index(m, j)
            b = grid.node_index(m, j + 1)
            c = grid.node_index(m + 1, j)
            d = grid.node_index(m + 1, j + 1)
            if np.linalg.norm(verts[a] - verts[d]) <= np.linalg.norm(verts[b] - verts[c]):
                faces.append((a, c, d))
                faces.append((a, d, b))
            else:
                faces.append((a, c, b))
                faces.append((c, d, b))
    return Mesh(vertices=verts, faces=np.asarray(faces, dtype=np.int64))


def support_samples(state: GraphState) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (eta, <X, eta>) pairs sampling the support function.

    Requires an admissible state so the Gauss map is injective on the
    samples.
    """
    ok, report = admissible(state)
    if not ok:
        raise ValueError(f"state not admissible at node {report['node']} "
                         f"(min eigenvalue {report['min_eigenvalue']:.3e})")
    geo = state.geometry
    X = state.grid.x / geo.u[:, None]
    h = np.einsum("ij,ij->i", X, geo.eta)
    return geo.eta, h
