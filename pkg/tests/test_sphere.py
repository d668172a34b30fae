import math

import numpy as np
import pytest

from weingarten import sphere
from conftest import CAP


def test_build_grid_node_layout(grid16):
    assert grid16.n_nodes == 1 + 16 * 32
    radii = np.linalg.norm(grid16.y, axis=1)
    assert np.max(radii) == pytest.approx(math.tan(CAP / 2), rel=1e-15)
    assert np.max(np.abs(np.linalg.norm(grid16.x, axis=1) - 1.0)) <= 1e-14
    # boundary ring sits on the cap edge
    bnd = grid16.boundary_mask
    geo_dist = np.arccos(np.clip(grid16.x[bnd, 2], -1, 1))
    assert np.max(np.abs(geo_dist - CAP)) < 1e-12
    assert np.sum(grid16.node_class == sphere.CENTER) == 1
    assert np.sum(bnd) == 32


def test_build_grid_argument_errors():
    with pytest.raises(ValueError):
        sphere.build_grid(0.0, 16, 32)
    with pytest.raises(ValueError):
        sphere.build_grid(math.pi / 2, 16, 32)
    with pytest.raises(ValueError):
        sphere.build_grid(CAP, 3, 32)
    with pytest.raises(ValueError):
        sphere.build_grid(CAP, 16, 7)


def test_conformal_factor_and_frames(grid16):
    g = grid16
    expected = 2.0 / (1.0 + np.einsum("ij,ij->i", g.y, g.y))
    assert np.max(np.abs(g.conf / expected - 1.0)) < 1e-15
    e1, e2 = g.frames[:, 0, :], g.frames[:, 1, :]
    assert np.max(np.abs(np.linalg.norm(e1, axis=1) - 1)) < 1e-14
    assert np.max(np.abs(np.linalg.norm(e2, axis=1) - 1)) < 1e-14
    assert np.max(np.abs(np.einsum("ij,ij->i", e1, e2))) < 1e-14
    assert np.max(np.abs(np.einsum("ij,ij->i", e1, g.x))) < 1e-14
    assert np.max(np.abs(np.einsum("ij,ij->i", e2, g.x))) < 1e-14


def test_constants_annihilated_exactly(grid16):
    f = np.full(grid16.n_nodes, 3.7)
    assert np.max(np.abs(sphere.frame_gradient(grid16, f))) == 0.0
    assert np.max(np.abs(sphere.frame_hessian(grid16, f))) == 0.0


def test_radially_linear_field_exact(grid16):
    # f = a + b r is resolved exactly by the radial stencils away from the
    # center (where |y| is not smooth); the angular stencils see constants.
    g = grid16
    r = np.linalg.norm(g.y, axis=1)
    b = 1.7
    f = 0.3 + b * r
    ring = g.ring_of > 0
    d1 = sphere.apply_operator(g.op_dy["dy1"], f)
    d2 = sphere.apply_operator(g.op_dy["dy2"], f)
    cos_t = np.divide(g.y[:, 0], r, out=np.zeros_like(r), where=r > 0)
    sin_t = np.divide(g.y[:, 1], r, out=np.zeros_like(r), where=r > 0)
    assert np.max(np.abs(d1[ring] - b * cos_t[ring])) < 1e-12
    assert np.max(np.abs(d2[ring] - b * sin_t[ring])) < 1e-12
    d11 = sphere.apply_operator(g.op_dy["dy11"], f)
    exact11 = b * sin_t**2 / np.where(r > 0, r, 1.0)
    assert np.max(np.abs(d11[ring] - exact11[ring])) < 1e-10


def test_linear_plane_functions_second_order():
    # plane-linear fields are trigonometric along rings, so the angular
    # central differences leave an O(dtheta^2) consistency error
    errs = []
    for rings in (16, 32, 64):
        g = sphere.build_grid(CAP, rings, 2 * rings)
        f = 1.7 * g.y[:, 0] - 2.4 * g.y[:, 1]
        d1 = sphere.apply_operator(g.op_dy["dy1"], f)
        d2 = sphere.apply_operator(g.op_dy["dy2"], f)
        errs.append(max(float(np.max(np.abs(d1 - 1.7))), float(np.max(np.abs(d2 + 2.4)))))
    slope = np.polyfit(np.log([1 / 16, 1 / 32, 1 / 64]), np.log(errs), 1)[0]
    assert slope >= 1.8


def test_center_stencil_exact_on_quadratics(grid16):
    g = grid16
    y1, y2 = g.y[:, 0], g.y[:, 1]
    f = 0.2 - 0.5 * y1 + 1.1 * y2 + 0.7 * y1**2 - 0.3 * y1 * y2 + 0.9 * y2**2
    assert sphere.apply_operator(g.op_dy["dy1"], f)[0] == pytest.approx(-0.5, abs=1e-10)
    assert sphere.apply_operator(g.op_dy["dy2"], f)[0] == pytest.approx(1.1, abs=1e-10)
    assert sphere.apply_operator(g.op_dy["dy11"], f)[0] == pytest.approx(1.4, abs=1e-10)
    assert sphere.apply_operator(g.op_dy["dy12"], f)[0] == pytest.approx(-0.3, abs=1e-10)
    assert sphere.apply_operator(g.op_dy["dy22"], f)[0] == pytest.approx(1.8, abs=1e-10)


def _height_errors(rings):
    g = sphere.build_grid(CAP, rings, 2 * rings)
    f = g.x[:, 2]
    grad = sphere.frame_gradient(g, f)
    hess = sphere.frame_hessian(g, f)
    ez = np.array([0.0, 0.0, 1.0])
    grad_exact = np.einsum("nik,k->ni", g.frames, ez)
    hess_exact = -f[:, None, None] * np.eye(2)
    return (float(np.max(np.abs(grad - grad_exact))),
            float(np.max(np.abs(hess - hess_exact))))


def test_height_function_convergence_order():
    rings = [16, 32, 64]
    errs = [_height_errors(r) for r in rings]
    h = [1.0 / r for r in rings]
    for comp in (0, 1):
        e = [err[comp] for err in errs]
        slope = np.polyfit(np.log(h), np.log(e), 1)[0]
        assert slope >= 1.8, f"component {comp}: slope {slope}"


def test_refinement_halves_spacing(grid16, grid32):
    s16 = sphere.max_node_spacing(grid16)
    s32 = sphere.max_node_spacing(grid32)
    ratio = s32 / s16
    assert 0.5 / 1.1 <= ratio <= 0.5 * 1.1


def test_scalar_field_validation(grid16):
    with pytest.raises(ValueError):
        sphere.ScalarField(grid16, np.ones(3))
    f = sphere.ScalarField(grid16, np.linspace(0, 1, grid16.n_nodes))
    assert f.gradient().shape == (grid16.n_nodes, 2)
    assert f.hessian().shape == (grid16.n_nodes, 2, 2)
