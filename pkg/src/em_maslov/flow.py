"""Lorentz-force geodesics, the D_t-parallel orthonormal frame and Foulon data."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import geometry as geo
from .errors import ChartExit, GramSchmidtFailure, IntegratorFailure, NotClosed

RTOL = 1e-10
ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class Trajectory:
    spec: geo.GeometrySpec
    x0: np.ndarray
    v0: np.ndarray
    kappa: float
    T: float
    sol: object = field(repr=False)
    stats: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.spec.dim

    def state(self, t):
        y = self.sol(t)
        n = self.dim
        return y[:n], y[n:]

    def position(self, t):
        return self.state(t)[0]

    def velocity(self, t):
        return self.state(t)[1]

    def energies(self, ts) -> np.ndarray:
        X, V = self.state(np.asarray(ts, dtype=float))
        return np.array([self.spec.energy(X[:, i], V[:, i]) for i in range(X.shape[1])])

    @cached_property
    def frame(self) -> "ParallelFrame":
        return build_parallel_frame(self)

    @cached_property
    def foulon(self) -> "FoulonData":
        return foulon_data(self, self.frame)

    def to_csv_rows(self, ts):
        X, V = self.state(np.asarray(ts, dtype=float))
        E = self.energies(ts)
        return np.column_stack([ts, X.T, V.T, E])


def lorentz_rhs(spec: geo.GeometrySpec):
    n = spec.dim

    def rhs(t, y):
        x, v = y[:n], y[n:]
        ev = geo.evaluate(spec, x, second_order=False)
        acc = -np.einsum("kij,i,j->k", ev.christoffel, v, v) + ev.Y @ v
        return np.concatenate([v, acc])

    return rhs


def integrate_em_geodesic(
    spec: geo.GeometrySpec,
    x0,
    v0,
    T: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    energy_tol: float = 1e-8,
    check_closed: bool = True,
) -> Trajectory:
    if T <= 0:
        raise ValueError("T must be positive")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    n = spec.dim
    if x0.shape != (n,) or v0.shape != (n,):
        raise ValueError(f"x0 and v0 must have shape ({n},)")
    geo.metric_inverse(spec, x0)
    if check_closed:
        geo.check_closed(spec, [x0])
    kappa = spec.energy(x0, v0)

    events = None
    if spec.chart_margin is not None:
        if spec.chart_margin(x0) <= 0:
            raise ChartExit(f"initial point {x0} outside chart")

        def leave(t, y):
            return spec.chart_margin(y[:n])

        leave.terminal = True
        leave.direction = -1
        events = [leave]

    res = solve_ivp(
        lorentz_rhs(spec), (0.0, T), np.concatenate([x0, v0]), method="DOP853",
        rtol=rtol, atol=atol, dense_output=True, events=events,
    )
    if res.status == 1:
        raise ChartExit(f"trajectory left the chart at t={res.t_events[0][0]:.6g}")
    if not res.success:
        raise IntegratorFailure(res.message)
    traj = Trajectory(spec, x0, v0, kappa, float(T), res.sol, {"nfev": res.nfev, "nsteps": len(res.t)})
    ts = np.linspace(0.0, T, 2001)
    drift = float(np.abs(traj.energies(ts) - kappa).max())
    traj.stats["energy_drift"] = drift
    if drift > energy_tol * max(1.0, abs(kappa)):
        raise IntegratorFailure(f"energy drift {drift:.3e} exceeds tolerance")
    return traj


# ---------------------------------------------------------------------------
# frame


def orthonormal_basis(g: np.ndarray, p: int, first=None, tol: float = 1e-8) -> np.ndarray:
    """g-orthonormal basis (columns) with timelike vectors first.

    Gram-Schmidt runs over ``first`` (if given) followed by the coordinate
    basis; directions that become null or dependent are skipped.
    """
    n = g.shape[0]
    candidates = ([np.asarray(first, float)] if first is not None else []) + list(np.eye(n))
    scale = np.abs(g).max()
    rng = np.random.default_rng(0)
    basis, signs = [], []
    k = 0
    while len(basis) < n:
        if k < len(candidates):
            c = candidates[k]
        elif k < len(candidates) + 50:
            c = rng.standard_normal(n)
        else:
            raise GramSchmidtFailure("could not complete a g-orthonormal basis")
        k += 1
        w = c.copy()
        for e, s in zip(basis, signs):
            w = w - s * (e @ g @ c) * e
        nrm2 = w @ g @ w
        if abs(nrm2) <= tol * scale * max(1.0, c @ c):
            continue
        basis.append(w / np.sqrt(abs(nrm2)))
        signs.append(np.sign(nrm2))
    signs = np.array(signs)
    if int((signs < 0).sum()) != p:
        raise GramSchmidtFailure(f"metric index mismatch: found {(signs < 0).sum()} timelike directions, expected {p}")
    order = np.argsort(signs, kind="stable")
    return np.column_stack([basis[i] for i in order])


@dataclass(frozen=True, eq=False)
class ParallelFrame:
    traj: Trajectory
    sol: object = field(repr=False)
    G: np.ndarray = None
    gram_drift: float = 0.0

    def E(self, t):
        n = self.traj.dim
        y = self.sol(t)
        if np.ndim(t) == 0:
            return y.reshape(n, n)
        return np.moveaxis(y.reshape(n, n, -1), -1, 0)


def build_parallel_frame(traj: Trajectory, initial: Optional[np.ndarray] = None, gram_tol: float = 1e-8) -> ParallelFrame:
    """Solve dE/dt + Gamma(v, E) = Y E / 2 from a g-orthonormal initial frame."""
    spec = traj.spec
    n, p = spec.dim, spec.metric_index
    G = geo.signature_matrix(n, p)
    g0 = spec.g(traj.x0)
    if initial is None:
        E0 = orthonormal_basis(g0, p, first=traj.v0 if np.any(traj.v0) else None)
    else:
        E0 = np.asarray(initial, dtype=float)
        if np.abs(E0.T @ g0 @ E0 - G).max() > gram_tol:
            raise GramSchmidtFailure("supplied initial frame is not g-orthonormal with I_{n,p} Gram matrix")

    def rhs(t, y):
        x, v = traj.state(t)
        ev = geo.evaluate(spec, x, second_order=False)
        E = y.reshape(n, n)
        dE = -np.einsum("kij,i,ja->ka", ev.christoffel, v, E) + 0.5 * ev.Y @ E
        return dE.ravel()

    res = solve_ivp(rhs, (0.0, traj.T), E0.ravel(), method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
    if not res.success:
        raise IntegratorFailure(res.message)
    frame = ParallelFrame(traj, res.sol, G)
    ts = np.linspace(0.0, traj.T, 513)
    Es = frame.E(ts)
    X, _ = traj.state(ts)
    drift = max(np.abs(Es[i].T @ spec.g(X[:, i]) @ Es[i] - G).max() for i in range(len(ts)))
    object.__setattr__(frame, "gram_drift", float(drift))
    if drift > gram_tol:
        raise IntegratorFailure(f"frame Gram drift {drift:.3e} exceeds tolerance")
    return frame


# ---------------------------------------------------------------------------
# Foulon data


@dataclass(frozen=True, eq=False)
class FoulonData:
    """Frame-coordinate data along the geodesic.

    K(t) is I_{n,p} times the frame matrix of the Jacobi operator and is
    symmetric; xi(t) is I_{n,p} times the frame coordinates of Y v.
    yhat, Yhat and eta are the frame coordinates of Y v, of Y, and of v.
    """

    t: np.ndarray
    K_samples: np.ndarray
    xi_samples: np.ndarray
    Yhat_samples: np.ndarray
    eta_samples: np.ndarray
    G: np.ndarray
    kappa: float
    T: float
    symmetry_residual: float

    @cached_property
    def _splines(self):
        return {
            name: CubicSpline(self.t, getattr(self, name + "_samples"), axis=0)
            for name in ("K", "xi", "Yhat", "eta")
        }

    def K(self, t):
        return self._splines["K"](t)

    def xi(self, t):
        return self._splines["xi"](t)

    def Yhat(self, t):
        return self._splines["Yhat"](t)

    def eta(self, t):
        return self._splines["eta"](t)

    def Kf(self, t):
        """Frame matrix of the Jacobi operator (I_{n,p} K)."""
        return self.G @ self.K(t)

    def yhat(self, t):
        return self.xi(t) @ self.G

    @property
    def dim(self) -> int:
        return self.G.shape[0]


def foulon_data(traj: Trajectory, frame: ParallelFrame, samples: Optional[int] = None) -> FoulonData:
    spec = traj.spec
    if samples is None:
        samples = max(1025, int(512 * traj.T) + 1)
    ts = np.linspace(0.0, traj.T, samples)
    X, V = traj.state(ts)
    Es = frame.E(ts)
    G = frame.G
    n = spec.dim
    K = np.empty((samples, n, n))
    xi = np.empty((samples, n))
    Yh = np.empty((samples, n, n))
    eta = np.empty((samples, n))
    worst = 0.0
    for k in range(samples):
        ev = geo.evaluate(spec, X[:, k])
        dS = spec.dSigma(X[:, k])
        closed = np.abs(geo.exterior_derivative(dS)).max() if dS.size else 0.0
        if closed > geo.CLOSEDNESS_TOL * max(1.0, np.abs(dS).max()):
            raise NotClosed(f"d sigma = {closed:.3e} at t={ts[k]:.6g}")
        E = Es[k]
        Einv = np.linalg.inv(E)
        v = V[:, k]
        Kf = Einv @ ev.jacobi_operator(v) @ E
        Kb = G @ Kf
        worst = max(worst, float(np.abs(Kb - Kb.T).max()))
        K[k] = 0.5 * (Kb + Kb.T)
        Yh[k] = Einv @ ev.Y @ E
        eta[k] = Einv @ v
        xi[k] = G @ (Yh[k] @ eta[k])
    return FoulonData(ts, K, xi, Yh, eta, G, traj.kappa, traj.T, worst)
