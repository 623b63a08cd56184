import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from em_maslov import flow
from em_maslov import geometry as geo
from em_maslov.errors import ChartExit, GramSchmidtFailure

from conftest import pipeline
from test_geometry import sphere_spec, warped_spec


def landau_spec(b=1.0):
    s, ds = geo.uniform_form(2, b)
    g, dg, d2g = geo.flat_metric(2)
    return geo.GeometrySpec(2, 0, g, s, dmetric=dg, d2metric=d2g, dsigma=ds, name="landau")


def test_landau_orbit_is_a_unit_circle():
    """[DERIVED] with Y = [[0,1],[-1,0]] the velocity rotates clockwise: x(t) = (sin t, cos t - 1)."""
    traj = flow.integrate_em_geodesic(landau_spec(), [0, 0], [1, 0], 5.0)
    ts = np.linspace(0, 5, 41)
    X, V = traj.state(ts)
    np.testing.assert_allclose(X, [np.sin(ts), np.cos(ts) - 1], atol=1e-9)
    np.testing.assert_allclose(V, [np.cos(ts), -np.sin(ts)], atol=1e-9)


def test_sphere_equator_is_a_geodesic():
    """[DERIVED] the equator traversed at unit speed stays at theta = pi/2."""
    traj = flow.integrate_em_geodesic(sphere_spec(), [np.pi / 2, 0], [0, 1], 4.0)
    X, _ = traj.state(np.linspace(0, 4, 21))
    np.testing.assert_allclose(X[0], np.pi / 2, atol=1e-12)
    np.testing.assert_allclose(X[1], np.linspace(0, 4, 21), atol=1e-9)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.2, 1.0))
def test_energy_is_conserved(a, b, speed):
    """[DERIVED] the Lorentz force does no work, so g[v, v]/2 stays constant."""
    v0 = np.array([a, b])
    if np.linalg.norm(v0) < 1e-3:
        v0 = np.array([1.0, 0.0])
    v0 = speed * v0 / np.linalg.norm(v0)
    traj = flow.integrate_em_geodesic(warped_spec(), [0.1, -0.2], v0, 1.5)
    E = traj.energies(np.linspace(0, 1.5, 101))
    assert np.abs(E - traj.kappa).max() < 1e-9


def test_leaving_the_chart_raises():
    """[TRIVIAL] heading for the sphere's pole exits the chart."""
    with pytest.raises(ChartExit):
        flow.integrate_em_geodesic(sphere_spec(), [0.5, 0.0], [-1.0, 0.0], 2.0)


@given(st.integers(0, 2), st.integers(0, 10_000))
def test_orthonormal_basis_has_signature_gram(p, seed):
    """[DERIVED] Gram-Schmidt output satisfies E^T g E = I_{n,p} with the given first vector's direction."""
    rng = np.random.default_rng(seed)
    n = 3
    A = rng.standard_normal((n, n)) + 3 * np.eye(n)
    g = A.T @ geo.signature_matrix(n, p) @ A
    first = None
    if p:
        first = np.linalg.solve(A, np.eye(n)[0])  # timelike for g
    E = flow.orthonormal_basis(g, p, first)
    np.testing.assert_allclose(E.T @ g @ E, geo.signature_matrix(n, p), atol=1e-9)
    if first is not None:
        cos = abs(E[:, 0] @ g @ first) / np.sqrt(abs(first @ g @ first))
        assert cos == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["landau", "round-sphere", "minkowski-field"])
def test_dynamical_frame_stays_orthonormal(name):
    """[DERIVED] the frame ODE preserves the Gram matrix because Y is g-antisymmetric."""
    traj = pipeline(name).traj
    assert traj.frame.gram_drift < 1e-8
    t = 0.7 * traj.T
    E = traj.frame.E(t)
    x, _ = traj.state(t)
    np.testing.assert_allclose(E.T @ traj.spec.g(x) @ E, traj.frame.G, atol=1e-8)


def test_landau_frame_rotates_at_half_the_cyclotron_rate():
    """[DERIVED] dE/dt = Y E / 2 with constant Y gives E(t) = exp(t Y / 2) E(0)."""
    traj = pipeline("landau").traj
    t = 2.0
    Y = np.array([[0.0, 1.0], [-1.0, 0.0]])
    c, s = np.cos(t / 2), np.sin(t / 2)
    R = np.eye(2) * c + Y * s
    np.testing.assert_allclose(traj.frame.E(t), R @ traj.frame.E(0.0), atol=1e-9)


def test_foulon_data_of_landau():
    """[DERIVED] flat metric and constant field: K = I/4 in the frame, Yhat = Y and |eta| constant."""
    fd = pipeline("landau").traj.foulon
    for t in (0.3, 2.0, 4.0):
        np.testing.assert_allclose(fd.K(t), 0.25 * np.eye(2), atol=1e-9)
        np.testing.assert_allclose(fd.Yhat(t), [[0, 1], [-1, 0]], atol=1e-9)
        assert fd.eta(t) @ fd.G @ fd.eta(t) == pytest.approx(1.0, abs=1e-9)
    assert fd.symmetry_residual < 1e-12


def test_supplied_frame_must_be_orthonormal():
    """[TRIVIAL] a non-orthonormal initial frame is refused."""
    traj = pipeline("landau").traj
    with pytest.raises(GramSchmidtFailure):
        flow.build_parallel_frame(traj, initial=2 * np.eye(2))


def test_trajectory_csv_rows():
    """[TRIVIAL] rows hold t, x, v and E."""
    traj = pipeline("landau").traj
    rows = traj.to_csv_rows([0.0, 1.0])
    assert np.asarray(rows).shape == (2, 6)
    assert rows[1][-1] == pytest.approx(0.5)
