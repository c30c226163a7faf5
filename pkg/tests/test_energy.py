import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_state, random_unit
from ericksen import fem
from ericksen.colloid import Sphere, build_phase_field
from ericksen.energy import (
    AnchoringModel,
    DoubleWell,
    ElectricModel,
    anchoring_director_terms,
    anchoring_energy,
    anchoring_s_terms,
    double_well_rhs,
    electric_director_matrix,
    electric_energy,
    electric_s_rhs,
    penalty_director_terms,
    penalty_energy,
    penalty_forms,
    penalty_s_terms,
    psi_eval,
    weak_anchor_director_matrix,
    weak_anchor_energy,
    weak_anchor_s_terms,
)
from ericksen.mesh import build_cube_mesh, build_square_mesh

S_STAR = 0.750025


def _setup(dim=3, eps=0.15):
    m = build_cube_mesh(4, 4, 4) if dim == 3 else build_square_mesh(8, 8)
    c = (0.5,) * dim
    pf = build_phase_field(m, Sphere(0.25, c), eps, warn_resolution=False)
    return m, pf, fem.assemble_lumped_mass(m)


def _directional(f, x, v, h=1e-6):
    return (f(x + h * v) - f(x - h * v)) / (2 * h)


# double well -------------------------------------------------------------


def test_psi_examples():
    dw = DoubleWell()
    psi, dpsi, _, _ = psi_eval(dw, 0.0)
    assert psi == 0.0 and dpsi == 0.0
    exact = (16 * 0.75**4 - (64 / 3) * 0.75**3 + 6 * 0.75**2) / 0.09
    assert psi_eval(dw, 0.75)[0] == pytest.approx(exact, rel=1e-14)
    assert exact == pytest.approx(-6.25, rel=1e-12)
    assert dw.dpsi(0.75) == pytest.approx(0.0, abs=1e-10)


def test_psi_warns_outside_admissible_range():
    with pytest.warns(UserWarning):
        psi_eval(DoubleWell(), np.array([1.2]))


def test_convex_split():
    dw = DoubleWell()
    s = np.linspace(-0.49, 0.99, 50)
    np.testing.assert_allclose(dw.dpsi(s), dw.dpsi_c(s) - dw.dpsi_e(s), rtol=1e-12, atol=1e-9)
    assert np.all(dw.d2psi_c(s) > 0)
    # psi_e convex on the admissible range: explicit treatment is energy stable
    assert np.all(dw.d2psi_e(s) >= 0)


@given(st.floats(-0.45, 0.95))
def test_psi_derivative(s):
    dw = DoubleWell()
    h = 1e-6
    fd = (dw.psi(s + h) - dw.psi(s - h)) / (2 * h)
    assert float(dw.dpsi(s)) == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_double_well_rhs_constant_field():
    m = build_cube_mesh(2, 2, 2)
    dw = DoubleWell()
    B = double_well_rhs(m, dw, np.full(m.n_vertices, 0.4))
    np.testing.assert_allclose(B, dw.dpsi_e(0.4) * fem.assemble_lumped_mass(m), rtol=1e-12)


def test_disabled_double_well():
    dw = DoubleWell(enabled=False)
    assert dw.c0 == 0.0
    assert np.all(dw.psi(np.array([0.3, 0.8])) == 0)


# anchoring ---------------------------------------------------------------


@pytest.mark.parametrize("kind", ["weak", "dirichlet_penalty"])
def test_anchoring_zero_weight(kind, rng):
    m, pf, w = _setup()
    a = AnchoringModel(kind, 0.0, pf)
    s, n = random_state(rng, m.n_vertices, 3)
    assert anchoring_energy(m, s, n, a, S_STAR, w) == 0.0
    M, r = anchoring_s_terms(m, n, a, S_STAR, w)
    assert M.nnz == 0 and np.all(r == 0)


def test_anchoring_model_validation():
    with pytest.raises(ValueError):
        AnchoringModel("strong", 1.0)
    with pytest.raises(ValueError):
        AnchoringModel("weak", 1.0)


def test_weak_anchor_zero_when_aligned(rng):
    m, pf, w = _setup()
    a = AnchoringModel("weak", 300.0, pf)
    n = np.where((pf.grad_norm > 0)[:, None], pf.grad / np.maximum(pf.grad_norm, 1e-300)[:, None],
                 [0.0, 0.0, 1.0])
    sign = rng.choice([-1.0, 1.0], m.n_vertices)[:, None]
    s = np.full(m.n_vertices, S_STAR)
    # sign blind: +grad phi and -grad phi are equally good
    assert weak_anchor_energy(m, s, sign * n, a, S_STAR, w) == pytest.approx(0.0, abs=1e-10)


def test_weak_anchor_single_node():
    m, pf, w = _setup()
    a = AnchoringModel("weak", 300.0, pf)
    unit = pf.grad / np.maximum(pf.grad_norm, 1e-300)[:, None]
    n = np.where((pf.grad_norm > 0)[:, None], unit, [0.0, 0.0, 1.0])
    i = int(np.argmax(pf.grad_norm))
    g = pf.grad[i]
    perp = np.cross(g, [1.0, 0.0, 0.0])
    if np.linalg.norm(perp) < 1e-8:
        perp = np.cross(g, [0.0, 1.0, 0.0])
    n[i] = perp / np.linalg.norm(perp)
    s = np.full(m.n_vertices, S_STAR)
    s[i] = 1.0
    G = a.grad_mass(m)
    r = s - S_STAR
    expected = 0.5 * a.weight * (w[i] * pf.grad_sq[i] + r @ (G @ r))
    assert weak_anchor_energy(m, s, n, a, S_STAR, w) == pytest.approx(expected, rel=1e-12)
    # the lumped part alone is (K_a/2) C0 eps w_i |grad phi_i|^2
    assert 0.5 * a.weight * w[i] * pf.grad_sq[i] == pytest.approx(
        0.5 * 300.0 * 4 * np.pi * 0.15 * w[i] * pf.grad_sq[i])


def test_weak_anchor_blocks(rng):
    m, pf, w = _setup()
    a = AnchoringModel("weak", 10.0, pf)
    s, _ = random_state(rng, m.n_vertices, 3)
    H = weak_anchor_director_matrix(m, s, a, w)
    np.testing.assert_allclose(np.einsum("iab,ib->ia", H, pf.grad), 0.0, atol=1e-8)
    zero = pf.grad_norm == 0
    assert zero.any() and np.all(H[zero] == 0)
    eig = np.linalg.eigvalsh(H)
    assert eig.min() > -1e-10 * max(1.0, eig.max())


def test_weak_anchor_s_terms_aligned():
    m, pf, w = _setup()
    a = AnchoringModel("weak", 10.0, pf)
    n = np.where((pf.grad_norm > 0)[:, None], pf.grad / np.maximum(pf.grad_norm, 1e-300)[:, None],
                 [1.0, 0.0, 0.0])
    M, r = weak_anchor_s_terms(m, n, a, S_STAR, w)
    G = a.grad_mass(m)
    np.testing.assert_allclose((M - a.weight * G).toarray(), 0.0, atol=1e-9)
    np.testing.assert_allclose(r, a.weight * (G @ np.full(m.n_vertices, S_STAR)))


def test_penalty_examples(rng):
    m, pf, w = _setup()
    a = AnchoringModel("dirichlet_penalty", 50.0, pf, g=0.0)
    n = random_unit(rng, m.n_vertices, 3)
    assert penalty_energy(m, np.zeros(m.n_vertices), n, a, S_STAR, w) == 0.0
    a = AnchoringModel("dirichlet_penalty", 50.0, pf)
    n = np.where((pf.grad_norm > 0)[:, None], pf.grad / np.maximum(pf.grad_norm, 1e-300)[:, None],
                 [1.0, 0.0, 0.0])
    assert penalty_energy(m, np.full(m.n_vertices, S_STAR), n, a, S_STAR, w) == \
        pytest.approx(0.0, abs=1e-10)
    # not sign blind
    assert penalty_energy(m, np.full(m.n_vertices, S_STAR), -n, a, S_STAR, w) > 1.0
    H, rhs = penalty_director_terms(m, np.full(m.n_vertices, S_STAR), a, w)
    zero = pf.grad_norm == 0
    assert np.all(H[zero] == 0) and np.all(rhs[zero] == 0)
    M, _ = penalty_s_terms(m, n, a, S_STAR, w)
    np.testing.assert_allclose((M - a.weight * a.grad_mass(m)).toarray(), 0.0, atol=1e-9)


def test_penalty_forms_consistent(rng):
    m, pf, w = _setup()
    a = AnchoringModel("dirichlet_penalty", 1.0, pf)
    s, n = random_state(rng, m.n_vertices, 3)
    a_s, a_n, ell, c = penalty_forms(m, s, n, a, w)
    # |(|g| n - g)|^2 = |g|^2 |n|^2 - 2 |g| g.n + |g|^2
    assert a_s == pytest.approx(a_n - 2 * ell + c, rel=1e-12)


def test_electric_examples(rng):
    m = build_cube_mesh(2, 2, 2)
    w = fem.assemble_lumped_mass(m)
    nv = m.n_vertices
    s, n = random_state(rng, nv, 3)
    assert electric_energy(m, s, n, ElectricModel(0.0, (1, 0, 0), 1, 2)) == 0.0
    el = ElectricModel(3.0, (0.0, 2.0, 0.0), eps_bar=1.5, eps_a=0.9)
    E2 = 4.0
    par = np.tile([0.0, 1.0, 0.0], (nv, 1))
    one = np.ones(nv)
    expected = -0.5 * 3.0 * (1.5 * (1 - el.gamma_a) + 0.9) * E2
    assert electric_energy(m, one, par, el, w) == pytest.approx(expected, rel=1e-12)
    perp = np.tile([1.0, 0.0, 0.0], (nv, 1))
    bulk = -1.5 * (1 - el.gamma_a) * E2
    expected = 0.5 * 3.0 * (bulk + 0.9 * E2 - 0.9 * E2)
    assert electric_energy(m, one, perp, el, w) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(electric_s_rhs(m, perp, el, w),
                               0.5 * 3.0 * 1.5 * el.gamma_a * E2 * w, rtol=1e-12)
    assert np.all(electric_director_matrix(m, s, ElectricModel(3.0, (0, 0, 0), 1, 1)) == 0)
    assert np.all(electric_s_rhs(m, n, ElectricModel(0.0, (1, 0, 0), 1, 1)) == 0)


def test_electric_gamma_mismatch_warns():
    with pytest.warns(UserWarning):
        ElectricModel(16.0, (1, 0), eps_bar=1.0, eps_a=2.0, gamma_a=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ElectricModel(16.0, (1, 0), eps_bar=1.0, eps_a=2.0)


def test_electric_field_padding():
    el = ElectricModel(1.0, (1.0, 0.0), 1, 1)
    np.testing.assert_array_equal(el.field(3), [1, 0, 0])
    with pytest.raises(ValueError):
        ElectricModel(1.0, (1.0, 0.0, 1.0), 1, 1).field(2)


# first variations against central differences ------------------------------


def _random_model(rng, kind, dim):
    m, pf, w = _setup(dim)
    anch = AnchoringModel(kind, 7.0, pf) if kind != "none" else AnchoringModel()
    el = ElectricModel(5.0, rng.standard_normal(dim), eps_bar=1.2, eps_a=rng.choice([-1.5, 2.0]))
    return m, pf, w, anch, el


@pytest.mark.parametrize("dim", [2, 3])
def test_E1h_variations(dim, rng):
    m, _, _ = _setup(dim)
    K = fem.assemble_stiffness(m)
    s, n = random_state(rng, m.n_vertices, dim)
    kappa = 0.7
    dn = rng.standard_normal(n.shape)
    ds = rng.standard_normal(s.shape)
    grad_n = fem.director_laplacian(K, s) @ n
    fd = _directional(lambda x: fem.energy_E1h(K, s, x, kappa), n, dn)
    assert np.sum(grad_n * dn) == pytest.approx(fd, rel=1e-5)
    grad_s = 2 * kappa * (K @ s) + fem.assemble_D_of_n(K, n) * s
    fd = _directional(lambda x: fem.energy_E1h(K, x, n, kappa), s, ds)
    assert grad_s @ ds == pytest.approx(fd, rel=1e-5)


def test_E2h_variation(rng):
    m = build_cube_mesh(3, 3, 3)
    dw = DoubleWell()
    M = fem.assemble_mass(m)
    s = rng.uniform(-0.3, 0.9, m.n_vertices)
    ds = rng.standard_normal(s.shape)
    # convex-split stationary form with s^{k+1} = s^k
    grad = 2 * dw.c0 * (M @ s) - double_well_rhs(m, dw, s)
    fd = _directional(lambda x: fem.energy_E2h(m, x, dw), s, ds)
    assert grad @ ds == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("kind", ["weak", "dirichlet_penalty"])
@pytest.mark.parametrize("dim", [2, 3])
def test_anchoring_variations(kind, dim, rng):
    m, pf, w, anch, _ = _random_model(rng, kind, dim)
    s, n = random_state(rng, m.n_vertices, dim)
    dn = rng.standard_normal(n.shape)
    ds = rng.standard_normal(s.shape)
    H, rhs = anchoring_director_terms(m, s, anch, w)
    grad_n = np.einsum("iab,ib->ia", H, n) - rhs
    fd = _directional(lambda x: anchoring_energy(m, s, x, anch, S_STAR, w), n, dn)
    assert np.sum(grad_n * dn) == pytest.approx(fd, rel=1e-5)
    M, r = anchoring_s_terms(m, n, anch, S_STAR, w)
    fd = _directional(lambda x: anchoring_energy(m, x, n, anch, S_STAR, w), s, ds)
    assert (M @ s - r) @ ds == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("dim", [2, 3])
def test_electric_variations(dim, rng):
    m, _, w, _, el = _random_model(rng, "none", dim)
    s, n = random_state(rng, m.n_vertices, dim)
    dn = rng.standard_normal(n.shape)
    ds = rng.standard_normal(s.shape)
    H = electric_director_matrix(m, s, el, w)
    fd = _directional(lambda x: electric_energy(m, s, x, el, w), n, dn)
    assert np.sum(np.einsum("iab,ib->ia", H, n) * dn) == pytest.approx(fd, rel=1e-5)
    fd = _directional(lambda x: electric_energy(m, x, n, el, w), s, ds)
    assert electric_s_rhs(m, n, el, w) @ ds == pytest.approx(fd, rel=1e-5)


# projection monotonicity ---------------------------------------------------


def test_lumped_forms_decrease_under_normalization(rng):
    m, pf, w = _setup()
    s = rng.uniform(-0.45, 0.95, m.n_vertices)
    n = random_unit(rng, m.n_vertices, 3) * rng.uniform(1.0, 3.0, (m.n_vertices, 1))
    unit = n / np.linalg.norm(n, axis=1, keepdims=True)
    H = weak_anchor_director_matrix(m, s, AnchoringModel("weak", 1.0, pf), w)
    el = ElectricModel(2.0, (0.3, -1.0, 0.5), eps_bar=1.0, eps_a=-2.0)
    He = electric_director_matrix(m, s, el, w)
    for B in (H, He):
        big = np.einsum("ia,iab,ib->", n, B, n)
        small = np.einsum("ia,iab,ib->", unit, B, unit)
        assert big >= small - 1e-12
