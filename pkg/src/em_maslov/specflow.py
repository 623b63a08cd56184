"""Galerkin index forms Q_s and their spectral flow.

Q_s acts on pairs (v, B) with v in H^1_0([0,1], R^n) and B a scalar:

    Q_s = (1/s) int <G v1', v2'> - (1/s) int <K_s v1, v2>
          + B1 (1/s) int <v2, xi_s> + B2 (1/s) int <v1, xi_s> + 2 kappa s B1 B2

with K_s(t) = s^2 K(st), xi_s(t) = s^2 xi(st), G = I_{n,p}. The v-part is
discretized with piecewise-linear hats on N uniform elements; unknowns are
ordered node-major (node k, component i -> k n + i) with B last.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.optimize import brentq

from .errors import ConjugateEndpoint, ConsistencyError, DegenerateEndpoint, NotConverged, ZeroEnergy
from .flow import FoulonData

DEGENERACY_RTOL = 1e-8
_GX, _GW = np.polynomial.legendre.leggauss(3)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


@dataclass(frozen=True)
class GalerkinSpace:
    N: int
    n: int

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two elements")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def dim_v(self) -> int:
        return self.n * (self.N - 1)

    @property
    def dim(self) -> int:
        return self.dim_v + 1

    def quadrature(self):
        """Quadrature nodes (N, 3), weights (3,), hat values (3, 2) on each element."""
        e = np.arange(self.N)[:, None]
        t = (e + _GX[None, :]) * self.h
        phi = np.column_stack([1.0 - _GX, _GX])
        return t, _GW * self.h, phi

    def stiffness_1d(self) -> np.ndarray:
        m = self.N - 1
        return (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / self.h

    def mass_1d(self) -> np.ndarray:
        m = self.N - 1
        return self.h * (4.0 * np.eye(m) + np.eye(m, k=1) + np.eye(m, k=-1)) / 6.0

    def gram(self, restricted: bool = False) -> np.ndarray:
        """H^1 inner product on the v-part, plus 1 on B."""
        Gv = np.kron(self.stiffness_1d() + self.mass_1d(), np.eye(self.n))
        if restricted:
            return Gv
        out = np.zeros((self.dim, self.dim))
        out[:-1, :-1] = Gv
        out[-1, -1] = 1.0
        return out

    def l2_gram(self) -> np.ndarray:
        return np.kron(self.mass_1d(), np.eye(self.n))


def _mass_matrix(space: GalerkinSpace, Kq: np.ndarray) -> np.ndarray:
    """int <K(t) v1, v2> for hats, given K at the quadrature nodes (N, 3, n, n)."""
    N, n = space.N, space.n
    _, w, phi = space.quadrature()
    C = np.einsum("q,qa,qb,eqij->eaibj", w, phi, phi, Kq)
    big = np.zeros((N + 1, n, N + 1, n))
    for a in (0, 1):
        for b in (0, 1):
            idx_a = np.arange(N) + a
            idx_b = np.arange(N) + b
            for e in range(N):
                big[idx_a[e], :, idx_b[e], :] += C[e, a, :, b, :]
    big = big[1:N, :, 1:N, :]
    return big.reshape(space.dim_v, space.dim_v)


def _load_vector(space: GalerkinSpace, xq: np.ndarray) -> np.ndarray:
    """int <v, xi(t)> for hats, given xi at the quadrature nodes (N, 3, n)."""
    N, n = space.N, space.n
    _, w, phi = space.quadrature()
    C = np.einsum("q,qa,eqi->eai", w, phi, xq)
    big = np.zeros((N + 1, n))
    big[:N] += C[:, 0]
    big[1:] += C[:, 1]
    return big[1:N].ravel()


def assemble_Q(foulon: FoulonData, kappa: float, s: float, space: GalerkinSpace, restricted: bool = False) -> np.ndarray:
    """Matrix of Q_s (or of its restriction to B = 0) on the Galerkin space."""
    if not 0.0 < s <= foulon.T * (1 + 1e-12):
        raise ValueError(f"s={s} outside (0, T]")
    if not restricted and kappa == 0.0:
        raise ZeroEnergy("the B-row of Q_s needs kappa != 0")
    tq, _, _ = space.quadrature()
    flat = tq.ravel()
    Kq = (s**2 * foulon.K(s * flat)).reshape(space.N, 3, space.n, space.n)
    Qv = (np.kron(space.stiffness_1d(), foulon.G) - _mass_matrix(space, Kq)) / s
    Qv = 0.5 * (Qv + Qv.T)
    if restricted:
        return Qv
    xq = (s**2 * foulon.xi(s * flat)).reshape(space.N, 3, space.n)
    bvec = _load_vector(space, xq) / s
    Q = np.zeros((space.dim, space.dim))
    Q[:-1, :-1] = Qv
    Q[:-1, -1] = bvec
    Q[-1, :-1] = bvec
    Q[-1, -1] = 2.0 * kappa * s
    return Q


def index(Q: np.ndarray) -> int:
    return int((np.linalg.eigvalsh(Q) < 0).sum())


def _check_nondegenerate(ev: np.ndarray, what: str, rtol: float = DEGENERACY_RTOL):
    if np.abs(ev).min() <= rtol * np.abs(ev).max():
        raise DegenerateEndpoint(f"{what} is numerically degenerate (smallest |eigenvalue| {np.abs(ev).min():.3e})")


@dataclass(eq=False)
class FormPath:
    foulon: FoulonData
    kappa: float
    space: GalerkinSpace
    restricted: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def matrix(self, s: float) -> np.ndarray:
        key = float(s)
        if key not in self._cache:
            self._cache[key] = assemble_Q(self.foulon, self.kappa, key, self.space, self.restricted)
        return self._cache[key]

    def gram(self) -> np.ndarray:
        return self.space.gram(self.restricted)

    def eigvals(self, s: float) -> np.ndarray:
        """Eigenvalues of the operator representing Q_s in the H^1 (x R) inner product."""
        return eigh(self.matrix(s), self.gram(), eigvals_only=True)

    def index(self, s: float) -> int:
        return index(self.matrix(s))

    def refined(self, factor: int = 2) -> "FormPath":
        return FormPath(self.foulon, self.kappa, GalerkinSpace(self.space.N * factor, self.space.n), self.restricted)

    def with_restriction(self, restricted: bool) -> "FormPath":
        return FormPath(self.foulon, self.kappa, self.space, restricted)


def build_form_path(foulon: FoulonData, kappa: float, N: int = 128, restricted: bool = False) -> FormPath:
    return FormPath(foulon, kappa, GalerkinSpace(N, foulon.dim), restricted)


def _sf_once(path: FormPath, a: float, b: float) -> int:
    for s in (a, b):
        _check_nondegenerate(path.eigvals(s), f"Q_s at s={s:.6g} (N={path.space.N})")
    return path.index(a) - path.index(b)


def _check_resolved(coarse: FormPath, fine: FormPath, s: float, margin: float = 10.0):
    """Reject s when the eigenvalue nearest zero is not resolved away from zero.

    P1 eigenvalues carry an O(h^2) error, so a degenerate endpoint shows up as
    a small eigenvalue whose Richardson extrapolation is lost in that error.
    """
    ev_c, ev_f = coarse.eigvals(s), fine.eigvals(s)
    lc = ev_c[np.argmin(np.abs(ev_c))]
    lf = ev_f[np.argmin(np.abs(ev_f - lc))]
    extrapolated = (4.0 * lf - lc) / 3.0
    if abs(extrapolated) <= margin * abs(lf - lc):
        raise DegenerateEndpoint(
            f"Q_s at s={s:.6g} has an eigenvalue {extrapolated:.3e} within discretization error of zero"
        )


def spectral_flow(path: FormPath, interval) -> int:
    """ind(Q_a) - ind(Q_b), required to agree at N and 2N."""
    a, b = interval
    fine = path.refined()
    sf1 = _sf_once(path, a, b)
    sf2 = _sf_once(fine, a, b)
    for s in (a, b):
        _check_resolved(path, fine, s)
    if sf1 != sf2:
        raise NotConverged(f"spectral flow {sf1} at N={path.space.N} but {sf2} at N={2 * path.space.N}")
    return sf1


def restriction_complement_value(path: FormPath, s: float) -> float:
    """Q_s on the Q_s-orthogonal complement of {B = 0}, normalized to B = 1."""
    Q = path.matrix(s) if not path.restricted else path.with_restriction(False).matrix(s)
    A, bvec, d = Q[:-1, :-1], Q[:-1, -1], Q[-1, -1]
    ev = np.linalg.eigvalsh(A)
    if np.abs(ev).min() <= DEGENERACY_RTOL * np.abs(ev).max():
        raise ConjugateEndpoint(f"restricted form degenerate at s={s:.6g}")
    return float(d - bvec @ np.linalg.solve(A, bvec))


def index_of_restriction_complement(path: FormPath, s: float, setup=None) -> int:
    """Index of Q_s on the complement of {B = 0}; cross-checked by the sign test when a setup is given."""
    val = restriction_complement_value(path, s)
    ind = 1 if val < 0 else 0
    if setup is not None:
        from .emindex import sign_test

        other = sign_test(setup, s).restriction_index
        if other != ind:
            raise ConsistencyError(f"complement index {ind} (Galerkin) vs {other} (sign test) at s={s:.6g}")
    return ind


@dataclass(frozen=True)
class RestrictionDifference:
    sf_full: int
    sf_restricted: int
    ind_a: int
    ind_b: int

    @property
    def lhs(self) -> int:
        return self.sf_full - self.sf_restricted

    @property
    def rhs(self) -> int:
        return self.ind_a - self.ind_b

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


def restriction_difference(path: FormPath, interval) -> RestrictionDifference:
    a, b = interval
    full = path.with_restriction(False)
    sub = path.with_restriction(True)
    res = RestrictionDifference(
        spectral_flow(full, interval), spectral_flow(sub, interval),
        index_of_restriction_complement(full, a), index_of_restriction_complement(full, b),
    )
    if not res.holds:
        raise ConsistencyError(f"restriction formula fails: {res}")
    return res


# ---------------------------------------------------------------------------
# plain matrix paths


def complement_index(Q: np.ndarray, V: np.ndarray) -> int:
    """Index of Q on the Q-orthogonal complement of span(V)."""
    W = null_space(V.T @ Q)
    return index(W.T @ Q @ W) if W.size else 0


def matrix_restriction_difference(Qfun: Callable[[float], np.ndarray], V: np.ndarray, a: float, b: float) -> RestrictionDifference:
    Qa, Qb = Qfun(a), Qfun(b)
    for Q, what in ((Qa, "Q_a"), (Qb, "Q_b"), (V.T @ Qa @ V, "restricted Q_a"), (V.T @ Qb @ V, "restricted Q_b")):
        _check_nondegenerate(np.linalg.eigvalsh(Q), what)
    return RestrictionDifference(
        index(Qa) - index(Qb), index(V.T @ Qa @ V) - index(V.T @ Qb @ V),
        complement_index(Qa, V), complement_index(Qb, V),
    )


def brute_force_spectral_flow(Qfun: Callable[[float], np.ndarray], a: float, b: float, n_grid: int = 400, dQ=None) -> int:
    """Net count of eigenvalues crossing zero upward minus downward.

    Each sign change of a sorted eigenvalue branch is refined by root finding
    and its direction read from u^T Q'(s) u at the crossing.
    """
    ts = np.linspace(a, b, n_grid + 1)
    evs = np.array([np.linalg.eigvalsh(Qfun(t)) for t in ts])
    if dQ is None:
        h = 1e-6 * max(1.0, b - a)

        def dQ(s):
            return (Qfun(s + h) - Qfun(s - h)) / (2 * h)

    total = 0
    for k in range(n_grid):
        for j in range(evs.shape[1]):
            if evs[k, j] * evs[k + 1, j] < 0:
                s = brentq(lambda t: np.linalg.eigvalsh(Qfun(t))[j], ts[k], ts[k + 1], xtol=1e-14)
                w, U = np.linalg.eigh(Qfun(s))
                u = U[:, np.argmin(np.abs(w))]
                total += 1 if u @ dQ(s) @ u > 0 else -1
    return total


# ---------------------------------------------------------------------------
# eigenvalue traces and degenerate instants


def eigen_traces(path: FormPath, s_grid, k: int = 8):
    """Rows (s, k smallest-magnitude eigenvalues sorted ascending, ind Q_s)."""
    rows = []
    for s in s_grid:
        ev = path.eigvals(s)
        sel = np.sort(ev[np.argsort(np.abs(ev))[:k]])
        rows.append(np.concatenate([[s], sel, [path.index(s)]]))
    return np.array(rows)


def degenerate_instants(path: FormPath, a: float, b: float, n_grid: int = 512, xtol: float = 1e-10) -> list[float]:
    """Values of s where ind Q_s jumps, located by bisection on the index."""
    grid = np.linspace(a, b, n_grid)
    inds = [path.index(s) for s in grid]
    out = []
    for k in range(n_grid - 1):
        if inds[k] == inds[k + 1]:
            continue
        lo, hi, il = grid[k], grid[k + 1], inds[k]
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if index(assemble_Q(path.foulon, path.kappa, mid, path.space, path.restricted)) == il:
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return out
