"""Ordinary and energy-constrained Jacobi fields, transfer maps, conjugate instants.

Everything is integrated in the parallel-frame coordinates of the geodesic.
In those coordinates the ordinary Jacobi equation reads x'' + K_f x = 0 with
K_f = I_{n,p} K; the energy-constrained one adds the forcing (c / 2 kappa) yhat,
where c = g[DJ/dt, v] is constant along the solution. The covariant derivative
DJ/dt has frame coordinates x' + Yhat x / 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import symplectic as sp
from ._roots import locate_singular_instants, smallest_sigma
from .errors import DegenerateCrossing, IntegratorFailure, ZeroEnergy
from .flow import ATOL, RTOL, FoulonData, ParallelFrame, Trajectory

ORDINARY = "ordinary"
EC = "energy-constrained"
CONJUGATE_RTOL = 1e-7
SCAN_STEPS = 2048


def normalize_flavor(flavor: str) -> str:
    f = flavor.lower().replace("_", "-")
    if f in ("ordinary", "ord"):
        return ORDINARY
    if f in ("ec", "energy-constrained", "energy"):
        return EC
    raise ValueError(f"unknown Jacobi flavor {flavor!r}")


def require_energy(kappa: float, what: str = "energy-constrained machinery"):
    if kappa == 0.0:
        raise ZeroEnergy(f"{what} needs kappa != 0")


@dataclass(frozen=True, eq=False)
class TransferPath:
    """Linearized propagator in frame coordinates (J, DJ/dt).

    ``at(t)`` maps initial frame data at 0 to frame data at t: Phi_t for the
    ordinary flavor, Psi_t for the energy-constrained one.
    """

    flavor: str
    traj: Trajectory
    frame: ParallelFrame
    foulon: FoulonData
    sol: object = field(repr=False)
    times: np.ndarray = None
    matrices: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.foulon.dim

    @property
    def T(self) -> float:
        return self.traj.T

    @property
    def G(self) -> np.ndarray:
        return self.foulon.G

    @property
    def kappa(self) -> float:
        return self.traj.kappa

    def _c_row(self) -> np.ndarray:
        n = self.n
        return np.concatenate([np.zeros(n), self.G @ self.foulon.eta(0.0)])

    def at(self, t):
        n = self.n
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        y = self.sol(ts)
        m = 2 * n
        X = np.moveaxis(y[: m * m].reshape(m, m, -1), -1, 0)
        C = _conversion(self.foulon.Yhat(ts), n)
        C0inv = np.linalg.inv(_conversion(self.foulon.Yhat(0.0)[None], n)[0])
        out = X @ C0inv
        if self.flavor == EC:
            p = y[m * m :].T
            out = out + (1.0 / (2 * self.kappa)) * p[:, :, None] * self._c_row()[None, None, :]
        out = C @ out
        return out[0] if scalar else out

    def J_block(self, t):
        """J-components at t of the solutions with J(0) = 0 and DJ(0) = e_i."""
        n = self.n
        return self.at(t)[..., :n, n:]

    def J_block_normalized(self, t):
        """J-block divided by the spectral norm of the whole transfer matrix.

        The J-block itself can vanish entirely (kernel of full dimension), so
        its own leading singular value is no reference scale.
        """
        P = self.at(t)
        n = self.n
        nrm = np.linalg.svd(P, compute_uv=False)[..., 0]
        return P[..., :n, n:] / nrm[..., None, None]

    def omega(self, t) -> np.ndarray:
        """Matrix of the symplectic form of TM at gamma(t) in frame coordinates."""
        return _omega_matrix(self.G @ self.foulon.Yhat(t), self.G)

    def omega_hat(self, t) -> np.ndarray:
        """Matrix of the presymplectic form (g replaced by the degenerate metric)."""
        return _omega_matrix(self.G @ self.foulon.Yhat(t), metric_g_frame(self.foulon, t))

    def S(self, t) -> np.ndarray:
        """Frame coordinates of the geodesic spray (v, Y v) at t."""
        eta = self.foulon.eta(t)
        return np.concatenate([eta, self.foulon.Yhat(t) @ eta])

    def to_chart(self, t, z) -> np.ndarray:
        """Convert frame data (J, DJ) at t to chart components."""
        n = self.n
        E = self.frame.E(t)
        z = np.asarray(z)
        return np.concatenate([E @ z[:n], E @ z[n:]])

    def from_chart(self, t, z) -> np.ndarray:
        n = self.n
        Einv = np.linalg.inv(self.frame.E(t))
        z = np.asarray(z, dtype=float)
        return np.concatenate([Einv @ z[:n], Einv @ z[n:]])


def _conversion(Yhat: np.ndarray, n: int) -> np.ndarray:
    """Batch of [[I, 0], [Yhat/2, I]] mapping (x, x') to (J, DJ)."""
    C = np.zeros(Yhat.shape[:-2] + (2 * n, 2 * n))
    C[..., :n, :n] = np.eye(n)
    C[..., n:, n:] = np.eye(n)
    C[..., n:, :n] = 0.5 * Yhat
    return C


def _omega_matrix(Sigma_f: np.ndarray, metric: np.ndarray) -> np.ndarray:
    n = metric.shape[0]
    W = np.zeros((2 * n, 2 * n))
    W[:n, :n] = Sigma_f
    W[:n, n:] = -metric
    W[n:, :n] = metric
    return W


def build_transfer(
    traj: Trajectory,
    frame: Optional[ParallelFrame] = None,
    flavor: str = ORDINARY,
    foulon: Optional[FoulonData] = None,
    n_samples: int = 513,
) -> TransferPath:
    flavor = normalize_flavor(flavor)
    if flavor == EC:
        require_energy(traj.kappa)
    if frame is None:
        frame = traj.frame
        foulon = traj.foulon if foulon is None else foulon
    elif foulon is None:
        from .flow import foulon_data

        foulon = foulon_data(traj, frame)
    n = foulon.dim
    m = 2 * n
    Gd = np.diag(foulon.G)

    def rhs(t, y):
        Kf = Gd[:, None] * foulon.K(t)
        X = y[: m * m].reshape(m, m)
        dX = np.empty_like(X)
        dX[:n] = X[n:]
        dX[n:] = -Kf @ X[:n]
        if flavor == ORDINARY:
            return dX.ravel()
        p = y[m * m :]
        dp = np.concatenate([p[n:], -Kf @ p[:n] + Gd * foulon.xi(t)])
        return np.concatenate([dX.ravel(), dp])

    y0 = np.eye(m).ravel()
    if flavor == EC:
        y0 = np.concatenate([y0, np.zeros(m)])
    res = solve_ivp(rhs, (0.0, traj.T), y0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
    if not res.success:
        raise IntegratorFailure(res.message)
    tp = TransferPath(flavor, traj, frame, foulon, res.sol)
    times = np.linspace(0.0, traj.T, n_samples)
    object.__setattr__(tp, "times", times)
    object.__setattr__(tp, "matrices", tp.at(times))
    return tp


@dataclass(frozen=True, eq=False)
class JacobiSolution:
    flavor: str
    u: np.ndarray
    w: np.ndarray
    c: float
    transfer: TransferPath = field(repr=False)
    initial: np.ndarray = field(default=None, repr=False)

    def frame_state(self, t):
        return self.transfer.at(t) @ self.initial

    def J(self, t):
        """Chart components of J(t) (t scalar or array)."""
        return self._chart(t, 0)

    def DJ(self, t):
        return self._chart(t, 1)

    def _chart(self, t, part):
        n = self.transfer.n
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        z = self.transfer.at(ts) @ self.initial
        E = self.transfer.frame.E(ts)
        out = np.einsum("kij,kj->ki", E, z[:, part * n : (part + 1) * n])
        return out[0] if np.ndim(t) == 0 else out

    def slope_constant(self, t):
        """g[DJ/dt, v] at t, computed in frame coordinates."""
        n = self.transfer.n
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        z = self.transfer.at(ts) @ self.initial
        eta = self.transfer.foulon.eta(ts)
        vals = np.einsum("ki,i,ki->k", z[:, n:], np.diag(self.transfer.G), eta)
        return vals[0] if np.ndim(t) == 0 else vals


def solve_jacobi(traj: Trajectory, flavor: str, u, w, transfer: Optional[TransferPath] = None) -> JacobiSolution:
    """Jacobi field with J(0) = u and DJ/dt(0) = w (chart components at gamma(0))."""
    flavor = normalize_flavor(flavor)
    if flavor == EC:
        require_energy(traj.kappa)
    if transfer is None or transfer.flavor != flavor:
        transfer = build_transfer(traj, flavor=flavor)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    z0 = transfer.from_chart(0.0, np.concatenate([u, w]))
    c = float(w @ traj.spec.g(traj.x0) @ traj.v0)
    return JacobiSolution(flavor, u, w, c, transfer, z0)


def metric_g_t(traj: Trajectory, t: float) -> np.ndarray:
    """Chart matrix of g - (1/2 kappa) g[v, .] g[v, .] at gamma(t)."""
    require_energy(traj.kappa)
    x, v = traj.state(t)
    g = traj.spec.g(x)
    gv = g @ v
    return g - np.outer(gv, gv) / (2 * traj.kappa)


def metric_g_frame(foulon: FoulonData, t) -> np.ndarray:
    require_energy(foulon.kappa)
    Geta = foulon.G @ foulon.eta(t)
    return foulon.G - np.outer(Geta, Geta) / (2 * foulon.kappa)


@dataclass(frozen=True)
class ConjugateInstant:
    time: float
    flavor: str
    multiplicity: int
    jprime: np.ndarray  # columns: frame coordinates of DJ/dt(t0) over the kernel
    kernel: np.ndarray  # columns: frame coordinates of DJ/dt(0)
    c: np.ndarray  # g[DJ/dt(0), v] for each kernel column
    nondegenerate: bool
    signature: Optional[int]
    sign_change: bool = True

    def as_dict(self) -> dict:
        return {
            "t": float(self.time),
            "flavor": self.flavor,
            "multiplicity": int(self.multiplicity),
            "nondegenerate": bool(self.nondegenerate),
            "signature": None if self.signature is None else int(self.signature),
            "c": [float(x) for x in self.c],
        }


def conjugate_scan(transfer: TransferPath, window=None, n_scan: int = SCAN_STEPS):
    a, b = window if window is not None else (transfer.T / n_scan, transfer.T)
    if not 0.0 < a < b <= transfer.T * (1 + 1e-12):
        raise ValueError("window must satisfy 0 < a < b <= T")
    b = min(b, transfer.T)
    return locate_singular_instants(
        transfer.J_block_normalized, transfer.J_block_normalized, a, b,
        n_scan=n_scan, rel_tol=CONJUGATE_RTOL, absolute=True,
    )


def find_conjugate_instants(
    transfer: TransferPath,
    flavor: Optional[str] = None,
    window=None,
    n_scan: int = SCAN_STEPS,
) -> list[ConjugateInstant]:
    if flavor is not None and normalize_flavor(flavor) != transfer.flavor:
        raise ValueError("flavor does not match the transfer path")
    raw, _ = conjugate_scan(transfer, window, n_scan)
    out = []
    for inst in raw:
        ci = describe_instant(transfer, inst.t, inst.sign_change)
        if ci.multiplicity % 2 == 1 and not inst.sign_change:
            b = transfer.T if window is None else window[1]
            if abs(inst.t - b) > 1e-9:
                raise DegenerateCrossing(
                    f"{transfer.flavor} det M has a zero without sign change at t={inst.t:.10g}"
                )
        out.append(ci)
    return out


def describe_instant(transfer: TransferPath, t0: float, sign_change: bool = True) -> ConjugateInstant:
    n = transfer.n
    Phi = transfer.at(t0)
    M, N = Phi[:n, n:], Phi[n:, n:]
    _, s, Vt = np.linalg.svd(M)
    lead = np.linalg.svd(Phi, compute_uv=False)[0]
    k = max(1, int((s < CONJUGATE_RTOL * lead).sum()))
    W = Vt[-k:].T
    Jp = N @ W
    c = W.T @ transfer.G @ transfer.foulon.eta(0.0)
    form = transfer.G if transfer.flavor == ORDINARY else metric_g_frame(transfer.foulon, t0)
    res = sp.restricted_signature(form, Jp)
    return ConjugateInstant(
        float(t0), transfer.flavor, k, Jp, W, c, res.nondegenerate,
        res.signature if res.nondegenerate else None, sign_change,
    )


def is_conjugate(transfer: TransferPath, t: float, rtol: float = 1e-6) -> bool:
    return bool(smallest_sigma(transfer.J_block_normalized(t)) < rtol)


def select_epsilon(transfers, n_scan: int = SCAN_STEPS) -> float:
    """Half the first conjugate instant of any supplied flavor, floored at 4 scan steps."""
    T = transfers[0].T
    first = T
    for tp in transfers:
        raw, _ = conjugate_scan(tp, (T / n_scan, T), n_scan)
        if raw:
            first = min(first, raw[0].t)
    eps = 0.5 * first
    floor = 4 * T / n_scan
    if eps < floor and floor < first:
        eps = floor
    return float(eps)
