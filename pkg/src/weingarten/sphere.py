"""Geodesic-cap grid on the unit sphere and its discrete covariant calculus.

The cap of geodesic radius ``cap_radius`` about the north pole is charted by
stereographic projection from the south pole, sending it to the plane disk of
radius tan(cap_radius/2).  The round metric pulls back to the conformal
metric lam(y)^2 (dy1^2 + dy2^2) with lam(y) = 2/(1+|y|^2), so the frame
e_i = lam^{-1} d/dy_i is orthonormal and every downstream tensor formula can
use sigma_ij = delta_ij literally.

Nodes are laid out plane-polar: a single center node plus ``rings`` circles
of ``sectors`` equispaced nodes, the outermost circle exactly on the cap
edge.  Derivatives are second-order central differences in (r, theta)
(one-sided second-order at the boundary ring, a least-squares quadratic fit
over the first two rings at the center), composed with the exact chart
factors into five sparse operators that map node values directly to the
orthonormal-frame gradient and covariant Hessian components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["CapGrid", "ScalarField", "build_grid", "frame_gradient", "frame_hessian", "max_node_spacing"]

CENTER, INTERIOR, BOUNDARY = 0, 1, 2


@dataclass
class CapGrid:
    """Immutable cap discretization; built by :func:`build_grid`."""

    cap_radius: float
    rings: int
    sectors: int
    y: np.ndarray           # (N, 2) plane chart coordinates
    x: np.ndarray           # (N, 3) unit-sphere points
    conf: np.ndarray        # (N,) conformal factor 2/(1+|y|^2)
    frames: np.ndarray      # (N, 2, 3) ambient orthonormal tangent frame
    node_class: np.ndarray  # (N,) CENTER / INTERIOR / BOUNDARY
    ring_of: np.ndarray     # (N,) ring index, 0 for the center node
    # frame-derivative operators (CSR, N x N)
    op_g1: sp.csr_matrix = field(repr=False, default=None)
    op_g2: sp.csr_matrix = field(repr=False, default=None)
    op_h11: sp.csr_matrix = field(repr=False, default=None)
    op_h12: sp.csr_matrix = field(repr=False, default=None)
    op_h22: sp.csr_matrix = field(repr=False, default=None)
    # raw plane-partial operators, kept for stencil-level tests
    op_dy: dict = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return self.y.shape[0]

    @property
    def interior_mask(self) -> np.ndarray:
        return self.node_class != BOUNDARY

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.node_class == BOUNDARY

    def node_index(self, ring: int, sector: int) -> int:
        if ring == 0:
            return 0
        return 1 + (ring - 1) * self.sectors + (sector % self.sectors)


@dataclass
class ScalarField:
    """A real value per grid node."""

    grid: CapGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError("field length must match node count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def gradient(self) -> np.ndarray:
        return frame_gradient(self.grid, self.values)

    def hessian(self) -> np.ndarray:
        return frame_hessian(self.grid, self.values)


def _chart_points(y: np.ndarray):
    """Sphere points and frame vectors of the inverse stereographic chart."""
    y1, y2 = y[:, 0], y[:, 1]
    s = 1.0 + y1 * y1 + y2 * y2
    x = np.stack([2.0 * y1 / s, 2.0 * y2 / s, (2.0 - s) / s], axis=1)
    # d x/d y_i, exact, then normalized by the conformal factor 2/s
    e1 = np.stack([(2.0 * s - 4.0 * y1 * y1), -4.0 * y1 * y2, -4.0 * y1], axis=1) / s[:, None] ** 2
    e2 = np.stack([-4.0 * y1 * y2, (2.0 * s - 4.0 * y2 * y2), -4.0 * y2], axis=1) / s[:, None] ** 2
    conf = 2.0 / s
    frames = np.stack([e1, e2], axis=1) / conf[:, None, None]
    return x, conf, frames


def build_grid(cap_radius: float, rings: int, sectors: int) -> CapGrid:
    """Build the cap grid and its derivative operators."""
    if not 0.0 < cap_radius < np.pi / 2:
        raise ValueError("cap_radius must lie in (0, pi/2)")
    if rings < 4:
        raise ValueError("rings must be >= 4")
    if sectors < 8:
        raise ValueError("sectors must be >= 8")

    r_max = np.tan(cap_radius / 2.0)
    dr = r_max / rings
    dt = 2.0 * np.pi / sectors

    n = 1 + rings * sectors
    y = np.zeros((n, 2))
    ring_of = np.zeros(n, dtype=int)
    theta_j = dt * np.arange(sectors)
    for m in range(1, rings + 1):
        lo = 1 + (m - 1) * sectors
        y[lo:lo + sectors, 0] = m * dr * np.cos(theta_j)
        y[lo:lo + sectors, 1] = m * dr * np.sin(theta_j)
        ring_of[lo:lo + sectors] = m

    x, conf, frames = _chart_points(y)

    node_class = np.full(n, INTERIOR, dtype=np.uint8)
    node_class[0] = CENTER
    node_class[ring_of == rings] = BOUNDARY

    dy = _plane_operators(rings, sectors, dr, dt)
    g1, g2, h11, h12, h22 = _frame_operators(y, conf, dy)

    return CapGrid(
        cap_radius=float(cap_radius), rings=rings, sectors=sectors,
        y=y, x=x, conf=conf, frames=frames, node_class=node_class, ring_of=ring_of,
        op_g1=g1, op_g2=g2, op_h11=h11, op_h12=h12, op_h22=h22, op_dy=dy,
    )


def _plane_operators(rings: int, sectors: int, dr: float, dt: float) -> dict:
    """Sparse plane-partial operators dy1, dy2, dy11, dy12, dy22 on node values."""
    n = 1 + rings * sectors

    def idx(m, j):
        if m == 0:
            return np.zeros_like(np.asarray(j)) if np.ndim(j) else 0
        return 1 + (m - 1) * sectors + (np.asarray(j) % sectors)

    rows = {k: [] for k in ("r", "rr", "t", "tt", "rt")}
    cols = {k: [] for k in rows}
    vals = {k: [] for k in rows}

    def add(op, rw, cl, v):
        rows[op].append(np.broadcast_to(rw, np.shape(cl)).ravel())
        cols[op].append(np.asarray(cl).ravel())
        vals[op].append(np.broadcast_to(v, np.shape(cl)).ravel().astype(float))

    j = np.arange(sectors)
    for m in range(1, rings + 1):
        rw = idx(m, j)
        # angular, periodic central
        add("t", rw, idx(m, j + 1), 1.0 / (2 * dt))
        add("t", rw, idx(m, j - 1), -1.0 / (2 * dt))
        add("tt", rw, idx(m, j + 1), 1.0 / dt**2)
        add("tt", rw, idx(m, j), -2.0 / dt**2)
        add("tt", rw, idx(m, j - 1), 1.0 / dt**2)
        if m < rings:
            # radial central; ring 0 collapses to the center node
            add("r", rw, idx(m + 1, j), 1.0 / (2 * dr))
            add("r", rw, idx(m - 1, j), -1.0 / (2 * dr))
            add("rr", rw, idx(m + 1, j), 1.0 / dr**2)
            add("rr", rw, idx(m, j), -2.0 / dr**2)
            add("rr", rw, idx(m - 1, j), 1.0 / dr**2)
        else:
            # one-sided second order at the boundary ring
            add("r", rw, idx(m, j), 3.0 / (2 * dr))
            add("r", rw, idx(m - 1, j), -4.0 / (2 * dr))
            add("r", rw, idx(m - 2, j), 1.0 / (2 * dr))
            add("rr", rw, idx(m, j), 2.0 / dr**2)
            add("rr", rw, idx(m - 1, j), -5.0 / dr**2)
            add("rr", rw, idx(m - 2, j), 4.0 / dr**2)
            add("rr", rw, idx(m - 3, j), -1.0 / dr**2)
        # mixed derivative: d/dr of the angular derivative
        if m == 1:
            # f_theta vanishes at r = 0, so the centered difference uses ring 2 only
            add("rt", rw, idx(2, j + 1), 1.0 / (2 * dt * 2 * dr))
            add("rt", rw, idx(2, j - 1), -1.0 / (2 * dt * 2 * dr))
        elif m < rings:
            add("rt", rw, idx(m + 1, j + 1), 1.0 / (2 * dt * 2 * dr))
            add("rt", rw, idx(m + 1, j - 1), -1.0 / (2 * dt * 2 * dr))
            add("rt", rw, idx(m - 1, j + 1), -1.0 / (2 * dt * 2 * dr))
            add("rt", rw, idx(m - 1, j - 1), 1.0 / (2 * dt * 2 * dr))
        else:
            for mm, c in ((m, 3.0), (m - 1, -4.0), (m - 2, 1.0)):
                add("rt", rw, idx(mm, j + 1), c / (2 * dt * 2 * dr))
                add("rt", rw, idx(mm, j - 1), -c / (2 * dt * 2 * dr))

    polar = {}
    for op in rows:
        polar[op] = sp.csr_matrix(
            (np.concatenate(vals[op]), (np.concatenate(rows[op]), np.concatenate(cols[op]))),
            shape=(n, n),
        )

    # polar -> Cartesian partials on ring nodes
    r_node = np.zeros(n)
    c_node = np.zeros(n)
    s_node = np.zeros(n)
    for m in range(1, rings + 1):
        lo = 1 + (m - 1) * sectors
        r_node[lo:lo + sectors] = m * dr
        c_node[lo:lo + sectors] = np.cos(dt * np.arange(sectors))
        s_node[lo:lo + sectors] = np.sin(dt * np.arange(sectors))
    with np.errstate(divide="ignore"):
        inv_r = np.where(r_node > 0, 1.0 / np.where(r_node > 0, r_node, 1.0), 0.0)

    def D(w):
        return sp.diags(w)

    c, s = c_node, s_node
    Dr, Drr, Dt, Dtt, Drt = polar["r"], polar["rr"], polar["t"], polar["tt"], polar["rt"]
    dy1 = D(c) @ Dr - D(s * inv_r) @ Dt
    dy2 = D(s) @ Dr + D(c * inv_r) @ Dt
    dy11 = (D(c * c) @ Drr + D(s * s * inv_r) @ Dr + D(s * s * inv_r**2) @ Dtt
            - D(2 * s * c * inv_r) @ Drt + D(2 * s * c * inv_r**2) @ Dt)
    dy22 = (D(s * s) @ Drr + D(c * c * inv_r) @ Dr + D(c * c * inv_r**2) @ Dtt
            + D(2 * s * c * inv_r) @ Drt - D(2 * s * c * inv_r**2) @ Dt)
    dy12 = (D(s * c) @ Drr - D(s * c * inv_r) @ Dr - D(s * c * inv_r**2) @ Dtt
            + D((c * c - s * s) * inv_r) @ Drt - D((c * c - s * s) * inv_r**2) @ Dt)

    ops = {"dy1": dy1.tolil(), "dy2": dy2.tolil(), "dy11": dy11.tolil(),
           "dy12": dy12.tolil(), "dy22": dy22.tolil()}

    # center node: least-squares quadratic over the first two rings
    stencil = np.concatenate([[0], 1 + np.arange(2 * sectors)])
    ys = np.zeros((stencil.size, 2))
    for m in (1, 2):
        lo = 1 + (m - 1) * sectors
        ys[lo:lo + sectors, 0] = m * dr * np.cos(dt * np.arange(sectors))
        ys[lo:lo + sectors, 1] = m * dr * np.sin(dt * np.arange(sectors))
    basis = np.stack([np.ones(stencil.size), ys[:, 0], ys[:, 1],
                      ys[:, 0]**2, ys[:, 0] * ys[:, 1], ys[:, 1]**2], axis=1)
    weights = np.linalg.solve(basis.T @ basis, basis.T)  # (6, K) coefficient extractors
    for name, row, scale in (("dy1", 1, 1.0), ("dy2", 2, 1.0), ("dy11", 3, 2.0),
                             ("dy12", 4, 1.0), ("dy22", 5, 2.0)):
        w = scale * weights[row].copy()
        w[0] -= w.sum()  # annihilate constants exactly
        ops[name][0, stencil] = w

    return {k: v.tocsr() for k, v in ops.items()}


def _frame_operators(y, conf, dy):
    """Compose plane partials with the conformal chart factors.

    In the orthonormal frame e_i = lam^{-1} d_i the covariant pieces are
        grad_i f  = lam^{-1} P_i
        hess_ij f = lam^{-2} S_ij + lam^{-1} (y_i P_j + y_j P_i - delta_ij y.P)
    with P/S the plane first/second partials (conformal Christoffel terms of
    lam = 2/(1+|y|^2) reduce to the y-linear factors above).
    """
    lam = conf
    y1, y2 = y[:, 0], y[:, 1]

    def D(w):
        return sp.diags(w)

    g1 = D(1.0 / lam) @ dy["dy1"]
    g2 = D(1.0 / lam) @ dy["dy2"]
    h11 = D(1.0 / lam**2) @ dy["dy11"] + D(y1 / lam) @ dy["dy1"] - D(y2 / lam) @ dy["dy2"]
    h22 = D(1.0 / lam**2) @ dy["dy22"] + D(y2 / lam) @ dy["dy2"] - D(y1 / lam) @ dy["dy1"]
    h12 = D(1.0 / lam**2) @ dy["dy12"] + D(y2 / lam) @ dy["dy1"] + D(y1 / lam) @ dy["dy2"]
    return (g1.tocsr(), g2.tocsr(), h11.tocsr(), h12.tocsr(), h22.tocsr())


def apply_operator(op: sp.csr_matrix, values: np.ndarray) -> np.ndarray:
    """Apply a derivative operator as sum_j w_ij (f_j - f_i).

    Row sums of the derivative operators vanish only up to roundoff after
    the chart composition; subtracting the row's own node value per entry
    makes constant fields map to exact zeros, which the downstream
    constant-curvature oracles rely on.
    """
    values = np.asarray(values, dtype=float)
    counts = np.diff(op.indptr)
    rows = np.repeat(np.arange(op.shape[0]), counts)
    terms = op.data * (values[op.indices] - values[rows])
    out = np.zeros(op.shape[0])
    nz = counts > 0
    if terms.size:
        out[nz] = np.add.reduceat(terms, op.indptr[:-1][nz])
    return out


def frame_gradient(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Orthonormal-frame gradient components at every node, shape (N, 2)."""
    return np.stack([apply_operator(grid.op_g1, values),
                     apply_operator(grid.op_g2, values)], axis=1)


def frame_hessian(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Orthonormal-frame covariant Hessian at every node, shape (N, 2, 2)."""
    h11 = apply_operator(grid.op_h11, values)
    h12 = apply_operator(grid.op_h12, values)
    h22 = apply_operator(grid.op_h22, values)
    out = np.empty((h11.shape[0], 2, 2))
    out[:, 0, 0] = h11
    out[:, 0, 1] = out[:, 1, 0] = h12
    out[:, 1, 1] = h22
    return out


def max_node_spacing(grid: CapGrid) -> float:
    """Largest geodesic distance between lattice-adjacent nodes."""
    def geo(a, b):
        d = np.einsum("ij,ij->i", grid.x[a], grid.x[b])
        return np.arccos(np.clip(d, -1.0, 1.0))

    j = np.arange(grid.sectors)
    worst = 0.0
    first = 1 + j
    worst = max(worst, float(np.max(geo(first, np.zeros_like(first)))))
    for m in range(1, grid.rings + 1):
        lo = 1 + (m - 1) * grid.sectors
        ring = lo + j
        worst = max(worst, float(np.max(geo(ring, lo + (j + 1) % grid.sectors))))
        if m < grid.rings:
            worst = max(worst, float(np.max(geo(ring, ring + grid.sectors))))
    return worst
