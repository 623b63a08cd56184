"""Maslov indices of an electromagnetic geodesic.

The Lagrangian path is lcheck(t) = Phi_t^{-1}(vertical) inside T_pM + T_pM
(frame coordinates (J, DJ/dt) at t = 0). Its Maslov index relative to the
vertical subspace is the ordinary index; relative to
L = <S> + {0} x <v>^perp it is the energy-constrained index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from . import jacobi as jac
from . import symplectic as sp
from ._roots import smallest_sigma
from .errors import ConjugateEndpoint, ConsistencyError, EndpointOnCycle, NonIntegerResult, SingularTransfer

TRANSVERSAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EMLagrangianSetup:
    transfer: jac.TransferPath = field(repr=False)
    Omega: np.ndarray
    vertical: np.ndarray
    reference: np.ndarray  # L = <S> + {0} x <v>^perp
    S0: np.ndarray
    orth_condition: float  # condition number of the <v>^perp basis
    seed: int = 0

    @property
    def n(self) -> int:
        return self.transfer.n

    def lcheck(self, t: float) -> np.ndarray:
        Phi = self.transfer.at(t)
        try:
            return np.linalg.solve(Phi, self.vertical)
        except np.linalg.LinAlgError as exc:
            raise SingularTransfer(f"transfer map singular at t={t}") from exc

    def path(self, a: float, b: float, n_samples: int = 257) -> sp.LagrangianPath:
        return sp.LagrangianPath(self.lcheck, a, b, n_samples=n_samples)


def build_setup(traj, transfer_ordinary: Optional[jac.TransferPath] = None, seed: int = 0) -> EMLagrangianSetup:
    jac.require_energy(traj.kappa, "the energy-constrained reference Lagrangian")
    tp = transfer_ordinary if transfer_ordinary is not None else jac.build_transfer(traj)
    if tp.flavor != jac.ORDINARY:
        raise ValueError("setup needs the ordinary transfer path")
    n = tp.n
    Omega = tp.omega(0.0)
    V = np.vstack([np.zeros((n, n)), np.eye(n)])
    eta = tp.foulon.eta(0.0)
    S0 = tp.S(0.0)
    W = null_space((tp.G @ eta)[None, :])
    L = np.hstack([S0[:, None], np.vstack([np.zeros((n, n - 1)), W])])
    sv = np.linalg.svd(L, compute_uv=False)
    cond = float(sv[0] / sv[-1])
    for name, F in (("vertical", V), ("reference", L)):
        Q = sp.orthonormalize(F)
        if Q.shape[1] != n or np.abs(Q.T @ Omega @ Q).max() > 1e-9 * max(1.0, np.abs(Omega).max()):
            raise ValueError(f"{name} frame is not Lagrangian")
    return EMLagrangianSetup(tp, Omega, V, L, S0, cond, seed)


def _maslov(setup: EMLagrangianSetup, L0: np.ndarray, eps: float, T: float, what: str) -> int:
    path = setup.path(eps, T)
    for t in (eps, T):
        if sp.min_angle(path.frame(t), L0) <= TRANSVERSAL_TOL:
            raise EndpointOnCycle(f"{what}: t={t:.10g} lies on the Maslov cycle")
    try:
        return int(sp.maslov_index(path, L0, setup.Omega, seed=setup.seed))
    except NonIntegerResult as exc:
        raise EndpointOnCycle(str(exc)) from exc


def ordinary_maslov(setup: EMLagrangianSetup, eps: float, T: Optional[float] = None) -> int:
    T = setup.transfer.T if T is None else T
    return _maslov(setup, setup.vertical, eps, T, "ordinary index")


def ec_maslov(setup: EMLagrangianSetup, eps: float, T: Optional[float] = None) -> int:
    T = setup.transfer.T if T is None else T
    return _maslov(setup, setup.reference, eps, T, "energy-constrained index")


def crossings(setup: EMLagrangianSetup, reference: str, a: float, b: float, n_scan: int = jac.SCAN_STEPS) -> list[float]:
    L0 = setup.vertical if reference == "vertical" else setup.reference
    return sp.find_crossings(setup.lcheck, L0, a, b, n_scan=n_scan)


def crossing_index(setup: EMLagrangianSetup, reference: str, t0: float, delta: Optional[float] = None):
    """Crossing-form signature at t0 and the chart Maslov index over a small window around t0."""
    L0 = setup.vertical if reference == "vertical" else setup.reference
    nondeg, sig = sp.crossing_signature(setup.lcheck, L0, setup.Omega, t0)
    delta = 1e-2 * setup.transfer.T if delta is None else delta
    local = int(sp.maslov_index(setup.path(t0 - delta, t0 + delta, 33), L0, setup.Omega, seed=setup.seed))
    return nondeg, sig, local


@dataclass(frozen=True)
class SignTest:
    s: float
    value: float  # g[DJ*/dt, v] at t = s
    tau: int

    @property
    def restriction_index(self) -> int:
        return 1 if self.tau == 1 else 0


def jcheck_star(setup: EMLagrangianSetup, s: float, rtol: float = 1e-8):
    """Frame coordinates (J, DJ/dt) at t = s of the ordinary field with J(0)=0, J(s)=v(s)."""
    tp = setup.transfer
    n = tp.n
    Phi = tp.at(s)
    M, N = Phi[:n, n:], Phi[n:, n:]
    if smallest_sigma(tp.J_block_normalized(s)) < rtol:
        raise ConjugateEndpoint(f"t={s:.10g} is an ordinary conjugate instant")
    eta = tp.foulon.eta(s)
    w = np.linalg.solve(M, eta)
    return M @ w, N @ w, w


def sign_test(setup: EMLagrangianSetup, s: float, zero_tol: float = 1e-8) -> SignTest:
    tp = setup.transfer
    _, DJ, _ = jcheck_star(setup, s)
    Geta = tp.G @ tp.foulon.eta(s)
    q = float(DJ @ Geta)
    if abs(q) <= zero_tol * np.linalg.norm(DJ) * np.linalg.norm(Geta):
        tau = 0
    else:
        tau = 1 if q < 0 else -1
    return SignTest(float(s), q, tau)


@dataclass(frozen=True)
class KashiwaraDifference:
    direct: int
    signtable: int
    tau_direct: tuple
    tau_table: tuple
    sign_values: tuple


def kashiwara_difference(setup: EMLagrangianSetup, eps: float, T: Optional[float] = None) -> KashiwaraDifference:
    """mu_ec - mu_ordinary from the Kashiwara index, evaluated directly and via the sign table."""
    T = setup.transfer.T if T is None else T
    L, V, W = setup.reference, setup.vertical, setup.Omega
    taus = tuple(sp.kashiwara_tau(L, V, setup.lcheck(s), W) for s in (eps, T))
    tests = tuple(sign_test(setup, s) for s in (eps, T))
    tab = tuple(t.tau for t in tests)
    d_direct, d_table = taus[1] - taus[0], tab[1] - tab[0]
    if d_direct % 2 or d_table % 2:
        raise ConsistencyError(f"odd Kashiwara difference: direct {taus}, table {tab}")
    res = KashiwaraDifference(d_direct // 2, d_table // 2, taus, tab, tuple(t.value for t in tests))
    if taus != tab:
        raise ConsistencyError(f"Kashiwara indices {taus} disagree with the sign table {tab}")
    return res


@dataclass
class EMIndexResult:
    epsilon: float
    T: float
    mu_ordinary: int
    mu_ec: int
    kashiwara: KashiwaraDifference
    crossings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "mu_ordinary": self.mu_ordinary,
            "mu_ec": self.mu_ec,
            "kashiwara_difference_direct": self.kashiwara.direct,
            "kashiwara_difference_signtable": self.kashiwara.signtable,
            "crossings": self.crossings,
        }


def compute_indices(setup: EMLagrangianSetup, eps: float, T: Optional[float] = None,
                    ordinary_instants=None, ec_instants=None, match_tol: float = 1e-7) -> EMIndexResult:
    """Both Maslov indices, the Kashiwara difference, and the crossing cross-check.

    When conjugate-instant lists are supplied, the crossings of lcheck with the
    two reference Lagrangians must reproduce them to ``match_tol``.
    """
    T = setup.transfer.T if T is None else T
    mu = ordinary_maslov(setup, eps, T)
    mu_k = ec_maslov(setup, eps, T)
    kd = kashiwara_difference(setup, eps, T)
    rows = []
    for ref, inst in (("vertical", ordinary_instants), ("energy", ec_instants)):
        times = crossings(setup, ref, eps, T)
        if inst is not None:
            expected = [ci.time for ci in inst if eps <= ci.time <= T]
            if len(expected) != len(times) or any(abs(a - b) > match_tol for a, b in zip(expected, times)):
                raise ConsistencyError(f"{ref} crossings {times} do not match conjugate instants {expected}")
        for t0 in times:
            nondeg, sig, local = crossing_index(setup, ref, t0, delta=min(1e-2 * T, 0.5 * (t0 - eps), 0.5 * (T - t0)))
            rows.append({"t": float(t0), "reference": ref, "nondegenerate": bool(nondeg), "signature": int(sig), "local_index": int(local)})
    return EMIndexResult(float(eps), float(T), mu, mu_k, kd, rows)
