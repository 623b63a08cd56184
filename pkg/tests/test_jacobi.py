import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from em_maslov import flow
from em_maslov import geometry as geo
from em_maslov import jacobi as jac
from em_maslov._roots import locate_singular_instants
from em_maslov.errors import DegenerateCrossing, ZeroEnergy

from conftest import pipeline
from test_geometry import sphere_spec


def _shoot(spec, x0, v0, T):
    return flow.integrate_em_geodesic(spec, x0, v0, T, rtol=1e-13, atol=1e-14, check_closed=False)


@pytest.mark.parametrize("provider", ["analytic", "finite-difference"])
def test_transfer_matches_finite_difference_of_the_flow(provider):
    """[DERIVED] J(t) is the derivative of gamma(t) under a variation of the initial data."""
    spec = sphere_spec(b=0.8, provider=provider)
    x0, v0, T = np.array([1.2, 0.3]), np.array([0.4, 0.8]), 2.5
    traj = flow.integrate_em_geodesic(spec, x0, v0, T)
    u, w = np.array([0.3, -0.5]), np.array([0.7, 0.2])
    J = jac.solve_jacobi(traj, jac.ORDINARY, u, w)
    # DJ/dt(0) = d/dh v(0) + Gamma(v0, u)
    wc = w - np.einsum("kij,i,j->k", geo.christoffel(spec, x0), v0, u)
    h = 1e-5
    ts = np.linspace(0.2, T, 9)
    plus = _shoot(spec, x0 + h * u, v0 + h * wc, T).position(ts)
    minus = _shoot(spec, x0 - h * u, v0 - h * wc, T).position(ts)
    fd = (plus - minus) / (2 * h)
    np.testing.assert_allclose(J.J(ts).T, fd, atol=2e-6)


def test_landau_ordinary_block_closed_form():
    """[DERIVED] x'' + x/4 = 0 in the frame: the J-block is 2 sin(t/2) I."""
    tp = pipeline("landau").ordinary
    for t in (0.5, 2.0, 4.5):
        np.testing.assert_allclose(tp.J_block(t), 2 * np.sin(t / 2) * np.eye(2), atol=1e-9)


def test_sphere_ordinary_block_singular_values():
    """[DERIVED] along a unit-speed great circle the J-block has singular values t and |sin t|."""
    tp = pipeline("round-sphere").ordinary
    for t in (0.5, 2.0, 4.5):
        s = np.linalg.svd(tp.J_block(t), compute_uv=False)
        np.testing.assert_allclose(np.sort(s), np.sort([t, abs(np.sin(t))]), atol=1e-9)


@pytest.mark.parametrize("name", ["landau", "round-sphere", "minkowski-field"])
@pytest.mark.parametrize("frac", [0.25, 0.6, 1.0])
def test_ordinary_transfer_is_symplectic(name, frac):
    """[DERIVED] Phi_t^T Omega_t Phi_t = Omega_0."""
    tp = pipeline(name).ordinary
    t = frac * tp.T
    P = tp.at(t)
    np.testing.assert_allclose(P.T @ tp.omega(t) @ P, tp.omega(0.0), atol=1e-8)


@pytest.mark.parametrize("name", ["landau", "round-sphere", "minkowski-field"])
def test_ec_transfer_preserves_presymplectic_pairing(name):
    """[DERIVED] Psi_t^T Omega_hat_t Psi_t = Omega_hat_0 and Omega_hat_t has a 2-dimensional kernel."""
    tp = pipeline(name).ec
    for t in np.linspace(0, tp.T, 7):
        P = tp.at(t)
        np.testing.assert_allclose(P.T @ tp.omega_hat(t) @ P, tp.omega_hat(0.0), atol=1e-8)
        assert np.linalg.matrix_rank(tp.omega_hat(t), tol=1e-9) == 2 * tp.n - 2


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_ec_field_with_zero_slope_is_ordinary(u1, u2, a):
    """[DERIVED] the forcing term is proportional to g[DJ/dt, v], so it vanishes when that is 0."""
    traj = pipeline("landau").traj
    w = a * np.array([0.0, 1.0])  # g-orthogonal to v0 = (1, 0)
    ts = np.linspace(0, traj.T, 5)
    Jo = jac.solve_jacobi(traj, jac.ORDINARY, [u1, u2], w, pipeline("landau").ordinary)
    Je = jac.solve_jacobi(traj, jac.EC, [u1, u2], w, pipeline("landau").ec)
    np.testing.assert_allclose(Jo.J(ts), Je.J(ts), atol=1e-9)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_slope_constant_is_conserved(u1, u2, w1, w2):
    """[DERIVED] g[DJ/dt, v] is constant along ordinary and energy-constrained Jacobi fields."""
    p = pipeline("landau")
    ts = np.linspace(0, p.T, 9)
    for tp in (p.ordinary, p.ec):
        J = jac.solve_jacobi(p.traj, tp.flavor, [u1, u2], [w1, w2], tp)
        c = J.slope_constant(ts)
        assert np.ptp(c) < 1e-8 * max(1.0, abs(c[0]))
        assert c[0] == pytest.approx(J.c, abs=1e-10)


def test_sphere_conjugate_instant_at_pi():
    """[DERIVED] antipodal points: one ordinary conjugate instant at pi, multiplicity 1."""
    inst = jac.find_conjugate_instants(pipeline("round-sphere").ordinary)
    assert [ci.multiplicity for ci in inst] == [1]
    assert abs(inst[0].time - np.pi) < 1e-8
    assert inst[0].signature == 1


def test_landau_conjugate_instants_and_multiplicities():
    """[DERIVED] ordinary instants at 2 pi k with multiplicity 2, energy-constrained ones at pi k with multiplicity 1."""
    p = pipeline("landau", T=3 * np.pi + 0.5)
    ordinary = jac.find_conjugate_instants(p.ordinary)
    ec = jac.find_conjugate_instants(p.ec)
    assert [round(ci.time / np.pi, 6) for ci in ordinary] == [2.0]
    assert [ci.multiplicity for ci in ordinary] == [2]
    assert [round(ci.time / np.pi, 6) for ci in ec] == [1.0, 2.0, 3.0]
    assert all(ci.multiplicity == 1 for ci in ec)


def test_even_order_zero_without_sign_change_is_found():
    """[DERIVED] det (t - 1)^2 never changes sign, yet the singular-value minimum still finds t = 1."""
    f = lambda t: np.array([[(t - 1.0) ** 2 + 0.0]])
    batch = lambda ts: np.array([f(t) for t in ts])
    found, _ = locate_singular_instants(batch, f, 0.3, 2.0, n_scan=256, absolute=True)
    assert len(found) == 1 and not found[0].sign_change
    assert found[0].t == pytest.approx(1.0, abs=1e-6)


def test_odd_multiplicity_without_sign_change_is_rejected(monkeypatch):
    """[TRIVIAL] a multiplicity-1 zero that det does not cross is reported as DegenerateCrossing."""
    p = pipeline("round-sphere")
    from em_maslov._roots import SingularInstant

    monkeypatch.setattr(jac, "conjugate_scan", lambda *a, **k: ([SingularInstant(np.pi, False, 0.0)], None))
    with pytest.raises(DegenerateCrossing):
        jac.find_conjugate_instants(p.ordinary)


def test_epsilon_precedes_every_instant():
    """[TRIVIAL] epsilon is half the first conjugate instant of either flavor."""
    p = pipeline("landau")
    assert jac.select_epsilon([p.ordinary, p.ec]) == pytest.approx(np.pi / 2, abs=1e-9)
    q = pipeline("flat-trivial")
    assert jac.select_epsilon([q.ordinary, q.ec]) == pytest.approx(0.5)


def test_null_geodesic_has_no_energy_constrained_fields():
    """[TRIVIAL] kappa = 0 is refused by the energy-constrained machinery."""
    g, dg, d2g = geo.flat_metric(2, 1)
    s, ds = geo.zero_form(2)
    spec = geo.GeometrySpec(2, 1, g, s, dmetric=dg, d2metric=d2g, dsigma=ds)
    traj = flow.integrate_em_geodesic(spec, [0, 0], [1, 1], 1.0)
    with pytest.raises(ZeroEnergy):
        jac.build_transfer(traj, flavor=jac.EC)
