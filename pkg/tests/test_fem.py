import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_state, random_unit
from ericksen import fem
from ericksen.energy import DoubleWell
from ericksen.mesh import Mesh, build_cube_mesh, build_square_mesh, refine_red


def _single(vertices):
    v = np.asarray(vertices, dtype=float)
    d = v.shape[1]
    return Mesh(v, np.arange(d + 1)[None], np.zeros((0, d), int), np.array([], dtype=str))


def _barycentric_integral(powers, dim):
    # int_T prod lambda_k^a_k = d! prod a_k! / (d + sum a_k)! * |T|
    return factorial(dim) * np.prod([factorial(a) for a in powers]) / factorial(dim + sum(powers))


@pytest.mark.parametrize("dim", [2, 3])
def test_quadrature_exact_to_degree_four(dim):
    q = fem.quadrature(dim)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for powers in itertools.product(range(5), repeat=dim + 1):
        if sum(powers) > 4:
            continue
        approx = np.sum(q.weights * np.prod(q.points ** np.array(powers), axis=1))
        assert approx == pytest.approx(_barycentric_integral(powers, dim), rel=1e-12, abs=1e-14)


def test_unit_triangle_stiffness():
    K = fem.assemble_stiffness(_single([[0, 0], [1, 0], [0, 1]])).toarray()
    np.testing.assert_allclose(K, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]),
                               atol=1e-15)


def test_mass_and_lumped_mass():
    m = build_cube_mesh(2, 3, 2, ((0, 2), (0, 1), (0, 1)))
    M = fem.assemble_mass(m)
    w = fem.assemble_lumped_mass(m)
    one = np.ones(m.n_vertices)
    assert one @ (M @ one) == pytest.approx(2.0, rel=1e-13)
    np.testing.assert_allclose(M @ one, w, rtol=1e-13)
    x = m.vertices[:, 0]
    # int x^2 over [0,2]x[0,1]^2 = 8/3, exact for P1 x
    assert x @ (M @ x) == pytest.approx(8.0 / 3.0, rel=1e-13)


def test_degenerate_cell_rejected():
    with pytest.raises(ValueError):
        fem.cell_geometry(_single([[0, 0], [1, 0], [2, 0]]))


def test_stiffness_kills_constants_and_integrates_linear():
    m = build_square_mesh(5, 4)
    K = fem.assemble_stiffness(m)
    assert np.abs(K @ np.ones(m.n_vertices)).max() < 1e-13
    x = m.vertices[:, 0]
    assert fem.dirichlet_form(K, x) == pytest.approx(1.0, rel=1e-13)


def test_E1h_examples():
    m = build_square_mesh(4, 4)
    K = fem.assemble_stiffness(m)
    nv = m.n_vertices
    n = np.tile([0.6, 0.8], (nv, 1))
    assert fem.energy_E1h(K, np.full(nv, 0.3), n, 1.0) == 0.0
    assert fem.energy_E1h(K, m.vertices[:, 0], n, 2.0) == pytest.approx(2.0, rel=1e-13)


def test_E1h_with_unit_s_is_dirichlet_energy(rng):
    m = build_cube_mesh(3, 3, 3)
    K = fem.assemble_stiffness(m)
    n = random_unit(rng, m.n_vertices, 3)
    assert fem.energy_E1h(K, np.ones(m.n_vertices), n, 0.7) == pytest.approx(
        fem.dirichlet_form(K, n), rel=1e-12)


def test_E2h_examples():
    dw = DoubleWell()
    m = build_cube_mesh(2, 2, 2)
    assert fem.energy_E2h(m, np.zeros(m.n_vertices), dw) == 0.0
    assert fem.energy_E2h(m, np.full(m.n_vertices, 0.75), dw) == pytest.approx(-6.25, rel=1e-12)


def test_E2h_quadrature_is_exact_for_quartic():
    # s = z on a single tetrahedron: int psi(z) over the reference simplex
    m = _single([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    dw = DoubleWell()
    s = m.vertices[:, 2]
    # int_T z^k = k! 3! / (k+3)! * |T| with |T| = 1/6
    mono = {k: factorial(k) * 6 / factorial(k + 3) / 6 for k in (2, 3, 4)}
    exact = dw.scale * (dw.a4 * mono[4] - dw.a3 * mono[3] + (dw.c - dw.a2) * mono[2])
    assert fem.energy_E2h(m, s, dw) == pytest.approx(exact, rel=1e-12)


def test_residuals_vanish_for_constant_fields(rng):
    m = build_square_mesh(3, 3)
    K = fem.assemble_stiffness(m)
    s, n = random_state(rng, m.n_vertices, 2)
    const_n = np.tile([1.0, 0.0], (m.n_vertices, 1))
    assert fem.residuals(K, s, const_n) == (0.0, 0.0)
    assert fem.residuals(K, np.full(m.n_vertices, 0.4), n) == (0.0, 0.0)


def test_tilde_energy_examples(rng):
    m = build_square_mesh(3, 3)
    K = fem.assemble_stiffness(m)
    nv = m.n_vertices
    assert fem.tilde_energy_E1h(K, np.full(nv, 0.5), np.tile([0.1, 0.2], (nv, 1)), 3.0) == \
        pytest.approx(0.0, abs=1e-14)
    s, n = random_state(rng, nv, 2)
    u = fem.compute_u(s, n)
    assert fem.tilde_energy_E1h(K, s, u, 1.0) == pytest.approx(fem.dirichlet_form(K, u))


@given(st.integers(0, 2**31 - 1), st.sampled_from([0.2, 1.0, 3.0]))
def test_energy_inequality_random(seed, kappa):
    rng = np.random.default_rng(seed)
    m = build_square_mesh(4, 3) if seed % 2 else build_cube_mesh(2, 2, 2)
    K = fem.assemble_stiffness(m)
    s, n = random_state(rng, m.n_vertices, m.dim)
    R, Rt = fem.residuals(K, s, n)
    E1 = fem.energy_E1h(K, s, n, kappa)
    gap = E1 - fem.tilde_energy_E1h(K, s, fem.compute_u(s, n), kappa)
    gap_abs = E1 - fem.tilde_energy_E1h(K, np.abs(s), fem.compute_u(np.abs(s), n), kappa)
    slack = 1e-10 * max(1.0, abs(E1))
    assert R >= 0 and Rt >= 0
    assert gap >= R - slack
    assert gap_abs >= Rt - slack


def test_D_of_n(rng):
    m = build_square_mesh(3, 3)
    K = fem.assemble_stiffness(m)
    nv = m.n_vertices
    assert np.all(fem.assemble_D_of_n(K, np.tile([0.0, 1.0], (nv, 1))) == 0)
    n = random_unit(rng, nv, 2)
    Kd = K.toarray()
    D_ref = np.array([sum(-Kd[i, j] * np.sum((n[i] - n[j]) ** 2) for j in range(nv) if j != i)
                      for i in range(nv)])
    np.testing.assert_allclose(fem.assemble_D_of_n(K, n), D_ref, rtol=1e-12, atol=1e-14)
    # the director part of E1h is (1/2) s^T D(n) s
    s = rng.uniform(0, 1, nv)
    E = fem.energy_E1h(K, s, n, 0.0)
    assert s @ (fem.assemble_D_of_n(K, n) * s) == pytest.approx(2.0 * E, rel=1e-12)


def test_director_blocks(rng):
    m = build_cube_mesh(2, 2, 2)
    K = fem.assemble_stiffness(m)
    nv = m.n_vertices
    A, D = fem.assemble_director_blocks(K, np.zeros(nv))
    assert A.nnz == 0 or np.all(A.data == 0)
    assert np.all(D == 0)
    L = fem.director_laplacian(K, np.ones(nv))
    v = rng.standard_normal(nv)
    assert v @ (L @ v) == pytest.approx(2.0 * fem.dirichlet_form(K, v), rel=1e-12)
    s, n = random_state(rng, nv, 3)
    L = fem.director_laplacian(K, s)
    E_n = fem.energy_E1h(K, s, n, 0.0)
    assert 0.5 * np.sum(n * (L @ n)) == pytest.approx(E_n, rel=1e-12)


def test_compute_u(rng):
    n = random_unit(rng, 5, 3)
    assert np.all(fem.compute_u(np.zeros(5), n) == 0)
    np.testing.assert_array_equal(fem.compute_u(np.ones(5), n), n)


def test_error_norms_of_interpolated_linear():
    m = build_cube_mesh(2, 2, 2)
    a = np.array([0.3, -1.0, 2.0])

    def f(x):
        return x @ a

    def g(x):
        return np.broadcast_to(a, x.shape)

    l2, h1 = fem.error_norms(m, m.vertices @ a, f, g)
    assert l2 < 1e-14 and h1 < 1e-13


def test_error_norms_against_closed_form():
    # s_h = 0 against f = x on the unit square: L2 = 1/sqrt(3), H1-seminorm = 1
    m = build_square_mesh(3, 3)
    l2, h1 = fem.error_norms(m, np.zeros(m.n_vertices), lambda x: x[..., 0],
                             lambda x: np.stack([np.ones(x.shape[:-1]), np.zeros(x.shape[:-1])], -1))
    assert l2 == pytest.approx(1 / np.sqrt(3), rel=1e-12)
    assert h1 == pytest.approx(1.0, rel=1e-12)


def test_error_norms_vector_field():
    m = build_square_mesh(2, 2)
    zero = np.zeros((m.n_vertices, 2))
    l2, h1 = fem.error_norms(m, zero, lambda x: np.stack([x[..., 0], x[..., 1]], -1),
                             lambda x: np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)))
    assert l2 == pytest.approx(np.sqrt(2 / 3), rel=1e-12)
    assert h1 == pytest.approx(np.sqrt(2), rel=1e-12)


def test_residual_of_plane_defect_interpolant_decreases_under_refinement():
    from ericksen.scenarios import plane_defect_exact

    res = []
    m = build_cube_mesh(4, 4, 4)
    for _ in range(2):
        s, _, n, _, _, _ = plane_defect_exact(0.75)
        res.append(fem.residuals(fem.assemble_stiffness(m), s(m.vertices), n(m.vertices))[0])
        m = refine_red(m)
    assert res[1] < res[0]
