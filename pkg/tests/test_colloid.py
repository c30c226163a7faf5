import numpy as np
import pytest
from hypothesis import given, strategies as st

from ericksen.colloid import (
    C0,
    RigidMotion,
    Sphere,
    build_phase_field,
    perimeter_functional,
    phase_ref,
    phase_ref_deriv,
    signed_distance,
)
from ericksen.mesh import build_cube_mesh, build_square_mesh


def test_signed_distance_sign_convention():
    sph = Sphere(0.25, (0.5, 0.5, 0.5))
    assert signed_distance(sph, np.array([0.5, 0.5, 0.5])) == pytest.approx(0.25)
    assert signed_distance(sph, np.array([0.75, 0.5, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert signed_distance(sph, np.array([1.0, 0.5, 0.5])) == pytest.approx(-0.25)


def test_rigid_motion_validation():
    with pytest.raises(ValueError):
        RigidMotion(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        RigidMotion(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2))


def test_moved_sphere():
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    motion = RigidMotion(R, np.array([0.1, -0.2]))
    disk = Sphere(0.2, (0.5, 0.5), motion)
    c = disk.physical_center()
    np.testing.assert_allclose(motion.apply(c), [0.5, 0.5], atol=1e-15)
    assert disk.distance(c) == pytest.approx(0.2)
    g = disk.distance_gradient(np.array([c + [0.1, 0.0]]))
    np.testing.assert_allclose(g, [[-1.0, 0.0]], atol=1e-14)


@given(st.floats(-1, 1), st.floats(0.01, 0.5))
def test_phase_ref_derivative(t, eps):
    h = 1e-6
    fd = (phase_ref(t + h, eps) - phase_ref(t - h, eps)) / (2 * h)
    assert phase_ref_deriv(t, eps) == pytest.approx(fd, rel=1e-5, abs=1e-8)
    assert 0.0 < phase_ref(t, eps) < 1.0


def test_phase_field_values():
    m = build_cube_mesh(4, 4, 4)
    pf = build_phase_field(m, Sphere(0.25, (0.5, 0.5, 0.5)), 0.06, warn_resolution=False)
    center = np.argmin(np.linalg.norm(m.vertices - 0.5, axis=1))
    assert pf.phi[center] == pytest.approx(phase_ref(0.25, 0.06))
    assert pf.phi[center] < 0.1
    assert np.all(pf.grad[center] == 0)
    surf = np.argmin(np.abs(np.linalg.norm(m.vertices - [0.75, 0.5, 0.5], axis=1)))
    assert pf.phi[surf] == 0.5


def test_phase_gradient_points_outward():
    m = build_square_mesh(8, 8)
    pf = build_phase_field(m, Sphere(0.25, (0.5, 0.5)), 0.1, warn_resolution=False)
    r = m.vertices - 0.5
    radial = np.einsum("ij,ij->i", pf.grad, r)
    assert np.all(radial >= -1e-15)


def test_phase_field_errors_and_warning():
    m = build_cube_mesh(4, 4, 4)
    with pytest.raises(ValueError):
        build_phase_field(m, Sphere(0.6, (0.5, 0.5, 0.5)), 0.1)
    with pytest.raises(ValueError):
        build_phase_field(m, Sphere(0.2, (0.5, 0.5, 0.5)), 0.0)
    with pytest.warns(UserWarning):
        build_phase_field(m, Sphere(0.2, (0.5, 0.5, 0.5)), 0.1)


def test_perimeter_zero_for_zero_field():
    m = build_square_mesh(4, 4)
    pf = build_phase_field(m, Sphere(0.25, (0.5, 0.5)), 0.2, warn_resolution=False)
    assert perimeter_functional(m, 0.0, pf) == 0.0


def test_perimeter_of_disk_approaches_circumference():
    # across a flat interface int phi_ref'^2 = 1 / (2 pi eps), so J tends to the interface length
    vals = []
    for eps, n in ((0.06, 64), (0.03, 128)):
        m = build_square_mesh(n, n)
        pf = build_phase_field(m, Sphere(0.25, (0.5, 0.5)), eps, warn_resolution=False)
        vals.append(perimeter_functional(m, 1.0, pf))
    target = 2 * np.pi * 0.25
    assert abs(vals[1] - target) < abs(vals[0] - target) or abs(vals[1] - target) < 0.02 * target
    assert vals[1] == pytest.approx(target, rel=0.1)
    assert C0 == pytest.approx(4 * np.pi)
