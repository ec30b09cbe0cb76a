import numpy as np
import pytest

from reldiff import minkowski as mk
from reldiff.errors import FrameError, InvariantError


def test_dot_signature():
    assert mk.dot([1, 2, 3, 4], [5, 6, 7, 8]) == 5 - 12 - 21 - 32
    assert mk.norm2([2.0, 0, 0, 0]) == 4.0


def test_lower_twice_is_identity(rng):
    v = rng.normal(size=(7, 4))
    assert np.array_equal(mk.raise_index(mk.lower(v)), v)
    t = rng.normal(size=(4, 4))
    assert np.array_equal(mk.raise_tensor(mk.lower_tensor(t)), t)


def test_four_vector_rejects_bad_shape():
    with pytest.raises(ValueError):
        mk.four_vector([1.0, 2.0, 3.0])


def test_boost_preserves_products(rng):
    for _ in range(50):
        L = mk.random_boost(rng, 4.0)
        a, b = rng.normal(size=(2, 4))
        assert np.isclose(mk.dot(L(a), L(b)), mk.dot(a, b), rtol=1e-9, atol=1e-9 * np.cosh(4.0) ** 2)


def test_boost_inverse_and_composition(rng):
    L1, L2 = mk.random_boost(rng), mk.random_boost(rng)
    v = rng.normal(size=4)
    assert np.allclose(L1.inverse()(L1(v)), v, atol=1e-10)
    assert np.allclose((L1 @ L2)(v), L1(L2(v)), atol=1e-10)


def test_boost_to_rest(rng):
    w = mk.unit_timelike(1.3, rng.normal(size=3))
    assert np.allclose(mk.boost_to_rest(w)(w), [1, 0, 0, 0], atol=1e-12)
    p = np.array([5.0, 1.0, -2.0, 3.0])
    r = mk.boost_to_rest(p)(p)
    assert np.allclose(r[1:], 0.0, atol=1e-12)
    assert np.isclose(r[0], np.sqrt(mk.norm2(p)))


def test_rapidity_and_velocity_agree():
    y = 0.9
    a = mk.Boost.from_rapidity(y, (0, 0, 1)).matrix
    b = mk.Boost.from_velocity([0, 0, np.tanh(y)]).matrix
    assert np.allclose(a, b, atol=1e-14)


def test_superluminal_and_spacelike_frames_rejected():
    with pytest.raises(FrameError):
        mk.Boost.from_velocity([0.6, 0.8, 0.1])
    with pytest.raises(FrameError):
        mk.boost_to_rest([1.0, 2.0, 0.0, 0.0])


def test_non_lorentz_matrix_rejected():
    with pytest.raises(InvariantError):
        mk.Boost(np.diag([1.0, 2.0, 1.0, 1.0]))


def test_transform_tensor_matches_vector_law(rng):
    L = mk.random_boost(rng)
    a, b = rng.normal(size=(2, 4))
    assert np.allclose(mk.transform_tensor(L, mk.outer(a, b)), mk.outer(L(a), L(b)), atol=1e-9)


def test_check_tensor():
    t = np.arange(16.0).reshape(4, 4)
    with pytest.raises(InvariantError):
        mk.check_tensor(t, symmetric=True)
    mk.check_tensor(t - t.T, antisymmetric=True)


def test_on_shell_and_scale():
    p = mk.on_shell([[3.0, 0, 4.0]], 2.0)
    assert np.isclose(mk.norm2(p)[0], 4.0)
    assert mk.scale_of(np.zeros(4)) == mk.TOL_FLOOR
