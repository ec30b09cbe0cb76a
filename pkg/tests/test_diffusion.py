import numpy as np
import pytest
import sympy

from reldiff import diffusion as dif
from reldiff import minkowski as mk
from reldiff.errors import InvalidBathError, OffShellError
from reldiff.spectral import BathParams

from conftest import random_bath, random_momenta


def test_projector_rest_example():
    assert np.array_equal(dif.projector([2.0, 0, 0, 0]), np.diag([0.0, -1, -1, -1]))


def test_projector_idempotent_and_annihilates_p(rng):
    p = random_momenta(rng, 200)
    P = dif.projector(p)
    PP = np.einsum("...ms,sr,...rn->...mn", P, mk.ETA, P)
    assert np.max(np.abs(PP - P)) < 1e-10 * np.max(np.abs(P))
    assert np.max(np.abs(np.einsum("...mn,...n->...m", P, mk.lower(p)))) < 1e-9 * np.max(np.abs(p))


def test_spacelike_momentum_rejected(bath):
    with pytest.raises(OffShellError):
        dif.alpha([1.0, 2.0, 0.0, 0.0], bath)
    with pytest.raises(OffShellError):
        dif.projector([1.0, 1.0, 0.0, 0.0])


def test_rest_frame_value():
    bath = BathParams(beta=1.0, eps=3.0, pi_eps=1.0)
    D = dif.alpha([1.7, 0, 0, 0], bath)
    assert np.allclose(D.alpha, 2.0 * np.diag([0.0, 1, 1, 1]), atol=1e-14)
    assert np.allclose(D.eigenvalues(), [0, 2, 2, 2], atol=1e-14)


def test_alpha_equals_pcp(rng):
    for _ in range(20):
        bath = random_bath(rng)
        p = random_momenta(rng, 50)
        P = dif.projector(p)
        C = dif.c_tensor(p, bath)
        pcp = np.einsum("...ms,...sr,...rn->...mn", P, C, P)
        a = dif.alpha_array(p, bath)
        assert np.max(np.abs(a - pcp)) <= 1e-10 * mk.scale_of(a)


def test_contraction_with_w(rng):
    for _ in range(20):
        bath = random_bath(rng)
        p = random_momenta(rng, 50)
        lhs = np.einsum("...mn,n->...m", dif.alpha_array(p, bath), mk.lower(bath.w))
        rhs = (bath.pi_eps - bath.eps) * dif.hat_w(p, bath.w)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * mk.scale_of(rhs)


def test_spectrum_in_particle_frame(rng):
    """In the particle rest frame: eps - pi along w, (eps + pi) gamma^2 - 2 pi across it."""
    for _ in range(30):
        bath = random_bath(rng)
        p = random_momenta(rng, 1)[0]
        L = mk.boost_to_rest(p)
        a = mk.transform_tensor(L, dif.alpha_array(p, bath))
        wr = L(bath.w)
        gam = wr[0]
        n = wr[1:] / np.linalg.norm(wr[1:]) if np.linalg.norm(wr[1:]) > 0 else np.array([0, 0, 1.0])
        c = (bath.eps + bath.pi_eps) * gam**2 - 2 * bath.pi_eps
        expected = np.zeros((4, 4))
        expected[1:, 1:] = (bath.eps - bath.pi_eps) * np.outer(n, n) + c * (np.eye(3) - np.outer(n, n))
        assert np.max(np.abs(a - expected)) <= 1e-9 * mk.scale_of(expected)


def test_covariant_under_joint_boost(rng):
    bath = random_bath(rng)
    p = random_momenta(rng, 10)
    L = mk.random_boost(rng, 1.5)
    a = mk.transform_tensor(L, dif.alpha_array(p, bath))
    b = dif.alpha_array(L(p), bath.with_(w=L(bath.w)))
    assert np.max(np.abs(a - b)) <= 1e-9 * mk.scale_of(b)


def test_quadratic_form_matches_contraction(rng, bath):
    p = random_momenta(rng, 5)
    a = rng.normal(size=(5, 4))
    al = mk.lower(a)
    ref = np.einsum("...m,...mn,...n->...", al, dif.alpha_array(p, bath), al)
    assert np.allclose(dif.quadratic_form(a, p, bath), ref)
    # contracting with p itself gives zero
    assert np.allclose(dif.quadratic_form(p, p, bath), 0.0, atol=1e-10 * np.max(np.abs(p)) ** 2)


def _symbolic_divergence():
    p = sympy.symbols("p0:4", real=True)
    w = sympy.symbols("w0:4", real=True)
    e, q = sympy.symbols("eps pi", positive=True)
    eta = sympy.diag(1, -1, -1, -1)
    pv, wv = sympy.Matrix(p), sympy.Matrix(w)
    p2 = (pv.T * eta * pv)[0]
    pw = (pv.T * eta * wv)[0]
    P = eta - pv * pv.T / p2
    wh = wv - pw / p2 * pv
    a = 2 * q * P - (e + q) * (pw**2 / p2 * P + wh * wh.T)
    div = [sum(sympy.diff(a[nu, mu], p[nu]) for nu in range(4)) for mu in range(4)]
    return sympy.lambdify((p, w, e, q), div, "numpy")


def test_divergence_closed_form_against_symbolic(rng):
    f = _symbolic_divergence()
    for _ in range(25):
        bath = random_bath(rng)
        p = random_momenta(rng, 1, 2.0)[0]
        ref = np.array(f(p, bath.w, bath.eps, bath.pi_eps), dtype=float)
        got = dif.alpha_divergence_exact(p, bath)
        assert np.max(np.abs(got - ref)) <= 1e-10 * max(mk.scale_of(ref), 1.0)


def test_finite_difference_divergence(rng):
    for _ in range(10):
        bath = random_bath(rng)
        p = random_momenta(rng, 20, 2.0)
        fd, err = dif.alpha_divergence(p, bath)
        ex = dif.alpha_divergence_exact(p, bath)
        assert np.max(np.abs(fd - ex)) <= 1e-6 * mk.scale_of(ex)
        assert np.all(err < 1e-5 * mk.scale_of(ex))


def test_ito_drift_methods_agree(rng, moving_bath):
    p = random_momenta(rng, 30, 1.5)
    a = dif.ito_drift(p, moving_bath, warn=False)
    b = dif.ito_drift(p, moving_bath, method="exact")
    assert np.max(np.abs(a - b)) <= 1e-6 * mk.scale_of(b)
    with pytest.raises(ValueError):
        dif.ito_drift(p, moving_bath, method="spline")


def test_friction_sign_switch(rng, bath):
    p = random_momenta(rng, 4)
    flipped = bath.with_(friction_sign="paper-eq56")
    assert np.array_equal(dif.friction_drift(p, flipped), -dif.friction_drift(p, bath))


def test_closed_form_noise_reproduces_alpha(rng):
    for _ in range(30):
        bath = random_bath(rng)
        p = random_momenta(rng, 40, 4.0)
        s = dif.noise_closed_form(p, bath)
        a2 = 2 * dif.alpha_array(p, bath)
        assert np.max(np.abs(s @ np.swapaxes(s, -1, -2) - a2)) <= 1e-10 * mk.scale_of(a2)
        assert np.max(np.abs(np.einsum("...m,...ma->...a", mk.lower(p), s))) <= 1e-10 * mk.scale_of(a2) * np.max(p)


def test_closed_form_noise_comoving_limit():
    bath = BathParams(beta=1.0, eps=2.0, pi_eps=0.5)
    s = dif.noise_closed_form(np.array([1.0, 0, 0, 1e-9]), bath)
    assert np.allclose(s @ s.T, 2 * dif.alpha_array(np.array([1.0, 0, 0, 1e-9]), bath), atol=1e-12)


def test_eigen_noise_factor(rng, moving_bath):
    p = random_momenta(rng, 1)[0]
    nf = dif.noise_factor(dif.alpha(p, moving_bath))
    assert nf.sigma.shape[0] == 4 and nf.sigma.shape[1] <= 3
    assert np.allclose(nf.sigma @ nf.sigma.T, 2 * dif.alpha_array(p, moving_bath), atol=1e-10)


def test_noise_matrix_rejects_indefinite():
    with pytest.raises(InvalidBathError):
        dif.noise_matrix(np.diag([1.0, -1.0, 1.0, 1.0]))


def test_alpha_psd_for_valid_baths(rng):
    for _ in range(50):
        bath = random_bath(rng)
        p = random_momenta(rng, 20)
        a = dif.alpha_array(p, bath)
        lo = np.linalg.eigvalsh(a)[..., 0]
        assert np.all(lo >= -1e-10 * np.max(np.abs(a), axis=(-1, -2)))
