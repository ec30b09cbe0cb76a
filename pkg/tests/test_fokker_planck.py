import math

import numpy as np
import pytest

from reldiff import fokker_planck as fp
from reldiff import minkowski as mk
from reldiff.diffusion import alpha_array, friction_drift, ito_drift
from reldiff.errors import ConvergenceError, DomainError
from reldiff.spectral import BathParams


@pytest.fixture(scope="module")
def unit_bath():
    return BathParams(beta=1.0, eps=3.0, pi_eps=1.0)


def _invariant_flux(ps, m, bath):
    A, c = fp.flux_coefficients(ps, m, bath)
    p0 = np.sqrt(m * m + np.sum(ps**2, -1))
    f = np.exp(-bath.beta * p0) / p0
    grad = ((-bath.beta - 1 / p0) * f / p0)[:, None] * ps
    return np.einsum("nij,nj->ni", A, grad) + c * f[:, None], np.abs(c * f[:, None]).max()


def test_invariant_juttner_carries_no_flux(rng):
    for beta, m in ((1.0, 1.0), (0.3, 2.0), (5.0, 0.5)):
        bath = BathParams(beta=beta, eps=2.0, pi_eps=0.3)
        ps = rng.normal(size=(50, 3)) * 2 / beta
        J, scale = _invariant_flux(ps, m, bath)
        assert np.max(np.abs(J)) <= 1e-9 * scale


def test_d3p_juttner_carries_flux(rng, unit_bath):
    ps = rng.normal(size=(20, 3)) + 1.0
    A, c = fp.flux_coefficients(ps, 1.0, unit_bath)
    p0 = np.sqrt(1 + np.sum(ps**2, -1))
    f = np.exp(-p0)
    J = np.einsum("nij,nj->ni", A, (-f / p0)[:, None] * ps) + c * f[:, None]
    assert np.max(np.abs(J)) > 1e-2 * np.max(np.abs(c * f[:, None]))


def test_shell_reduction_drift(unit_bath, rng):
    ps = rng.normal(size=(4, 3))
    _, B = fp.reduce_to_shell(ps, 1.5, unit_bath)
    full = ito_drift(mk.on_shell(ps, 1.5), unit_bath, method="exact")
    assert np.array_equal(B, full[:, 1:])
    with pytest.raises(DomainError):
        fp.reduce_to_shell(ps, 0.0, unit_bath)


def test_grid_geometry():
    g = fp.MomentumGrid.radial(1.0, 1.0, 64)
    assert g.size == 64 and g.faces[0][0] == 0.0
    assert math.isclose(g.volumes().sum(), 4 * math.pi / 3 * g.faces[0][-1] ** 3, rel_tol=1e-12)
    assert math.isclose(math.exp(-(math.hypot(1, g.faces[0][-1]) - 1)), fp.TAIL, rel_tol=1e-9)
    a = fp.MomentumGrid.axisymmetric(1.0, 1.0, 0.4, 8, 16)
    assert a.shape == (8, 16) and a.points().shape == (128, 3)
    assert np.isclose(mk.norm2(a.w), 1.0)
    with pytest.raises(DomainError):
        fp.MomentumGrid.radial(1.0, 1.0, 8, spacing="log")


def test_initial_states_are_normalized():
    g = fp.MomentumGrid.radial(1.0, 2.0, 100)
    for kind in ("d3p", "invariant", "gaussian"):
        assert math.isclose(fp.initial_state(g, 2.0, kind).total(g), 1.0, rel_tol=1e-12)
    with pytest.raises(DomainError):
        fp.initial_state(g, 2.0, "flat")


def test_probability_is_conserved(unit_bath):
    for grid in (fp.MomentumGrid.radial(1.0, 1.0, 64), fp.MomentumGrid.axisymmetric(1.0, 1.0, 0.0, 8, 16)):
        L = fp.build_operator(grid, unit_bath)
        s0 = fp.initial_state(grid, 1.0, "gaussian")
        s1 = fp.time_march(grid, s0, unit_bath, 0.5 * fp.stability_bound(L), 200, L=L)
        assert math.isclose(s1.total(grid), 1.0, rel_tol=1e-10)
        assert s1.time > 0


def test_unstable_step_is_refused(unit_bath):
    grid = fp.MomentumGrid.radial(1.0, 1.0, 32)
    L = fp.build_operator(grid, unit_bath)
    with pytest.raises(fp.StabilityError) as info:
        fp.time_march(grid, fp.initial_state(grid, 1.0), unit_bath, 2 * fp.stability_bound(L), 1, L=L)
    assert info.value.suggested_dt < fp.stability_bound(L)


def _ou(kappa):
    # J = A (grad f + p f) has the stationary density exp(-|p|^2 / 2)
    def coeffs(ps):
        A = np.eye(3) + kappa * np.einsum("ni,nj->nij", ps, ps)
        return A, np.einsum("nij,nj->ni", A, ps)

    return coeffs


def _gauss(grid):
    f = np.exp(-0.5 * np.sum(grid.points() ** 2, -1))
    return f / np.sum(grid.volumes().ravel() * f)


def test_radial_ou_converges_at_second_order():
    bath = BathParams(beta=1.0, eps=2.0, pi_eps=0.0)
    errs = []
    for n in (32, 64):
        grid = fp.MomentumGrid.radial(1.0, 1.0, n, "uniform", p_max=7.0)
        res = fp.stationary_profile(grid, bath, tol=1e-10, coeffs=_ou(0.0))
        errs.append(fp.l1_distance(grid, res.state.density, _gauss(grid)))
    assert errs[1] < 5e-3
    assert 1.7 < math.log2(errs[0] / errs[1]) < 2.5


def test_axisymmetric_ou_with_cross_diffusion():
    bath = BathParams(beta=1.0, eps=2.0, pi_eps=0.0)
    grid = fp.MomentumGrid("axisymmetric", 1.0, (np.linspace(0, 6, 25), np.linspace(-6, 6, 49)))
    res = fp.stationary_profile(grid, bath, tol=1e-9, coeffs=_ou(0.3))
    assert fp.l1_distance(grid, res.state.density, _gauss(grid)) < 0.02


def test_heat_kernel_widening():
    D, s0, t = 0.5, 1.0, 2.0
    grid = fp.MomentumGrid.radial(1.0, 1.0, 200, "uniform", p_max=12.0)
    coeffs = lambda ps: (np.broadcast_to(D * np.eye(3), (len(ps), 3, 3)), np.zeros_like(ps))  # noqa: E731
    L = fp.build_operator(grid, coeffs=coeffs)
    r2 = np.sum(grid.points() ** 2, -1)
    f0 = np.exp(-r2 / (2 * s0**2))
    f0 /= np.sum(grid.volumes() * f0)
    dt = 0.9 * fp.stability_bound(L)
    steps = int(round(t / dt))
    out = fp.time_march(grid, fp.GridState(f0), None, t / steps, steps, L=L)
    s2 = s0**2 + 2 * D * t
    ref = np.exp(-r2 / (2 * s2))
    ref /= np.sum(grid.volumes() * ref)
    assert fp.l1_distance(grid, out.density, ref) < 0.01
    assert math.isclose(out.total(grid), 1.0, rel_tol=1e-10)


def test_rest_shell_coefficients(unit_bath):
    A, B = fp.reduce_to_shell(np.zeros(3), 1.0, unit_bath)
    assert np.allclose(A, 2.0 * np.eye(3), atol=1e-14)
    assert np.allclose(B, 0.0, atol=1e-14)


def test_shell_operator_matches_four_dimensional_generator(rng, moving_bath):
    # phi depends on the spatial momentum only; apply d_mu (alpha^{mu nu} d_nu phi) + b.d phi in 4D
    def grad(p):
        x, y, z = p[..., 1], p[..., 2], p[..., 3]
        return np.stack([0 * x, np.cos(x) * z, 2 * y * z, np.sin(x) + y * y], -1)

    def hess(ps):
        x, y, z = ps
        return np.array([[-np.sin(x) * z, 0, np.cos(x)], [0, 2 * z, 2 * y], [np.cos(x), 2 * y, 0]])

    for _ in range(5):
        ps = rng.normal(size=3)
        m = rng.uniform(0.5, 2.0)
        p = mk.on_shell(ps, m)
        h = 1e-4
        div = 0.0
        for mu in range(4):
            e = np.zeros(4)
            e[mu] = h
            gp = alpha_array(p + e, moving_bath) @ grad(p + e)
            gm = alpha_array(p - e, moving_bath) @ grad(p - e)
            div += (gp[mu] - gm[mu]) / (2 * h)
        div += friction_drift(p, moving_bath) @ grad(p)
        A, B = fp.reduce_to_shell(ps, m, moving_bath)
        shell = np.sum(A * hess(ps)) + B @ grad(p)[1:]
        assert abs(div - shell) <= 1e-6 * max(1.0, abs(shell))


def test_shell_matrix_is_psd(rng, moving_bath):
    A, _ = fp.reduce_to_shell(rng.normal(size=(1000, 3)) * 3, 1.0, moving_bath)
    assert np.all(np.linalg.eigvalsh(A)[:, 0] >= -1e-10 * np.max(np.abs(A), axis=(1, 2)))


def test_stationary_start_stays_put(unit_bath):
    grid = fp.MomentumGrid.radial(1.0, 1.0, 128)
    res = fp.stationary_profile(grid, unit_bath, tol=1e-10)
    L = fp.build_operator(grid, unit_bath)
    dt = 0.9 * fp.stability_bound(L)
    out = fp.time_march(grid, res.state, unit_bath, dt, 1000, L=L)
    assert fp.l1_distance(grid, out.density, res.state.density) / (1000 * dt) <= 1e-8


def test_doubling_beta_doubles_the_fit(unit_bath):
    fits = []
    for beta in (1.0, 2.0):
        bath = type(unit_bath)(beta=beta, eps=3.0, pi_eps=1.0)
        res = fp.stationary_profile(fp.MomentumGrid.radial(1.0, beta, 256), bath)
        fits.append(res.fits["invariant"]["fitted_beta"])
    assert abs(fits[1] / fits[0] - 2.0) < 0.04


def test_bath_stationary_profile_is_invariant_juttner(unit_bath):
    res = fp.stationary_profile(fp.MomentumGrid.radial(1.0, 1.0, 256), unit_bath)
    inv, d3p = res.fits["invariant"], res.fits["d3p"]
    assert inv["l1"] < 1e-3 and d3p["l1"] > 0.1
    assert abs(inv["fitted_beta"] - 1.0) < 1e-3
    assert res.flux_residual < 1e-6
    assert math.isclose(res.state.total(res.grid), 1.0, rel_tol=1e-9)


def test_convergence_failure_reports_history(unit_bath):
    grid = fp.MomentumGrid.radial(1.0, 1.0, 32)
    with pytest.raises(ConvergenceError) as info:
        fp.stationary_profile(grid, unit_bath, tol=1e-30, max_time=1.0)
    assert len(info.value.history) > 0


def test_boosted_bath_on_axisymmetric_grid():
    bath = BathParams(beta=1.0, eps=3.0, pi_eps=1.0, w=mk.unit_timelike(0.5, (0, 0, 1)))
    grid = fp.MomentumGrid.axisymmetric(1.0, 1.0, 0.5, 24, 48)
    with pytest.warns(fp.NegativityWarning):
        res = fp.stationary_profile(grid, bath, tol=1e-7)
    assert res.fits["invariant"]["l1"] < 0.03
    assert res.fits["invariant"]["l1"] < res.fits["d3p"]["l1"]
    with pytest.raises(DomainError):
        fp.build_operator(grid, bath.with_(w=mk.unit_timelike(0.2, (0, 0, 1))))


def test_radial_probabilities_sum_to_one(unit_bath):
    grid = fp.MomentumGrid.radial(1.0, 1.0, 128)
    f = fp.candidate_profile(grid, 1.0, "invariant")
    probs = fp.radial_probabilities(grid, f, np.linspace(0, grid.faces[0][-1], 17))
    assert math.isclose(probs.sum(), 1.0, rel_tol=1e-12)
    assert np.all(probs >= 0)


def test_refinement_order(unit_bath):
    out = fp.refinement_study(1.0, unit_bath, n=32)
    assert 1.7 < out["order"] < 2.5
