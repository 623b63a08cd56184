"""Finite-dimensional symplectic linear algebra.

Lagrangian subspaces are passed around as 2n x n frames (column spans).
The symplectic form is a matrix Omega with omega[u, v] = u @ Omega @ v.
Maslov indices are computed with the chart formula on segments, each with
its own auxiliary Lagrangian, and accumulated as doubled integers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from ._roots import locate_singular_instants
from .errors import NonIntegerResult, NotTransversal, RefinementExhausted

SIGNATURE_RTOL = 1e-8


def standard_omega(n: int) -> np.ndarray:
    """[[0, I], [-I, 0]] on R^n x R^n."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


@dataclass(frozen=True, eq=False)
class SymplecticSpace:
    Omega: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.Omega, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] % 2:
            raise ValueError("Omega must be a square matrix of even size")
        if np.abs(W + W.T).max() > 1e-12 * max(1.0, np.abs(W).max()):
            raise ValueError("Omega must be antisymmetric")
        if np.linalg.svd(W, compute_uv=False)[-1] < 1e-12 * max(1.0, np.abs(W).max()):
            raise ValueError("Omega is degenerate")
        object.__setattr__(self, "Omega", W)

    @property
    def n(self) -> int:
        return self.Omega.shape[0] // 2

    def is_lagrangian(self, A, tol: float = 1e-9) -> bool:
        Q = orthonormalize(A)
        return Q.shape[1] == self.n and np.abs(Q.T @ self.Omega @ Q).max() <= tol * max(1.0, np.abs(self.Omega).max())


@dataclass(frozen=True)
class SignatureCounts:
    n_plus: int
    n_minus: int
    n_zero: int

    @property
    def signature(self) -> int:
        return self.n_plus - self.n_minus

    @property
    def nondegenerate(self) -> bool:
        return self.n_zero == 0


def signature_counts(S: np.ndarray, rtol: float = SIGNATURE_RTOL, scale: Optional[float] = None) -> SignatureCounts:
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return SignatureCounts(0, 0, 0)
    ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    ref = np.abs(ev).max() if scale is None else scale
    thr = rtol * ref
    return SignatureCounts(int((ev > thr).sum()), int((ev < -thr).sum()), int((np.abs(ev) <= thr).sum()))


def signature(S: np.ndarray, rtol: float = SIGNATURE_RTOL) -> int:
    return signature_counts(S, rtol).signature


@dataclass(frozen=True)
class RestrictedSignature:
    nondegenerate: bool
    signature: int
    counts: SignatureCounts
    matrix: np.ndarray


def restricted_signature(form: np.ndarray, basis: np.ndarray, rtol: float = 1e-6) -> RestrictedSignature:
    """Signature of a symmetric form restricted to span(basis).

    The zero threshold is relative to the norm of the full form, so an
    isotropic restriction is reported as degenerate.
    """
    Q = orthonormalize(basis)
    B = Q.T @ form @ Q
    scale = max(np.abs(np.linalg.eigvalsh(0.5 * (form + form.T))).max(), 1e-300)
    c = signature_counts(B, rtol, scale=scale)
    return RestrictedSignature(c.nondegenerate, c.signature, c, B)


def orthonormalize(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column span (polar factor when full rank)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int((s > rtol * max(s[0], 1e-300)).sum()) if s.size else 0
    if r == A.shape[1]:
        return U @ Vt
    return U[:, :r]


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.sort(subspace_angles(np.asarray(A, float), np.asarray(B, float)))


def min_angle(A, B) -> float:
    return float(principal_angles(A, B)[0])


def max_angle(A, B) -> float:
    return float(principal_angles(A, B)[-1])


def chart_form(L0, L1, L, Omega: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Matrix of phi(u, u') = omega[T u, u'] on L0 (in the basis of the L0 frame).

    T: L0 -> L1 is the linear map whose graph is L.
    """
    L0 = np.asarray(L0, float)
    L1 = np.asarray(L1, float)
    L = np.asarray(L, float)
    if min_angle(L1, L0) <= tol:
        raise NotTransversal("auxiliary Lagrangian meets the reference", pair=("L1", "L0"))
    if min_angle(L1, L) <= tol:
        raise NotTransversal("auxiliary Lagrangian meets the target", pair=("L1", "L"))
    n = L0.shape[1]
    XY = np.linalg.solve(np.hstack([L0, L1]), L)
    X, Y = XY[:n], XY[n:]
    F = (L1 @ Y @ np.linalg.inv(X)).T @ Omega @ L0
    asym = np.abs(F - F.T).max()
    if asym > 1e-6 * max(1.0, np.abs(F).max()):
        raise ValueError(f"chart form is not symmetric (residual {asym:.2e}); inputs are not Lagrangian")
    return 0.5 * (F + F.T)


def kashiwara_tau(L1, L2, L3, Omega: np.ndarray, rtol: float = SIGNATURE_RTOL) -> int:
    """Signature of omega[v1,v2] + omega[v2,v3] + omega[v3,v1] on L1 + L2 + L3."""
    A = [orthonormalize(L) for L in (L1, L2, L3)]
    n = A[0].shape[1]
    B = np.zeros((3 * n, 3 * n))
    B[:n, n : 2 * n] = A[0].T @ Omega @ A[1]
    B[n : 2 * n, 2 * n :] = A[1].T @ Omega @ A[2]
    B[2 * n :, :n] = A[2].T @ Omega @ A[0]
    return signature(0.5 * (B + B.T), rtol)


def lagrangian_complement(L0, Omega: np.ndarray) -> np.ndarray:
    """A Lagrangian frame B with L0^T Omega B = I."""
    A0 = np.asarray(L0, float)
    OA = Omega.T @ A0
    B0 = OA @ np.linalg.inv(A0.T @ Omega @ OA)
    W = B0.T @ Omega @ B0
    return B0 + 0.5 * A0 @ W


def random_symplectic(n: int, rng: np.random.Generator, Omega: Optional[np.ndarray] = None, scale: float = 0.5) -> np.ndarray:
    """exp(Omega^{-1} H) for a random symmetric H: a symplectic matrix for Omega."""
    from scipy.linalg import expm

    Omega = standard_omega(n) if Omega is None else Omega
    H = rng.standard_normal((2 * n, 2 * n))
    H = scale * (H + H.T) / 2
    return expm(np.linalg.solve(Omega, H))


def random_lagrangian(n: int, rng: np.random.Generator, Omega: Optional[np.ndarray] = None) -> np.ndarray:
    """Random Lagrangian; Omega must make the first n coordinates Lagrangian (e.g. +-standard)."""
    M = random_symplectic(n, rng, Omega, scale=1.0)
    return orthonormalize(M[:, :n])


# ---------------------------------------------------------------------------
# Lagrangian paths and the Maslov index


class LagrangianPath:
    """A path t -> L(t) on [a, b] given by a frame-valued function.

    Frames returned by ``func`` should depend continuously on t; samples are
    cached so repeated evaluation is cheap.
    """

    def __init__(self, func: Optional[Callable[[float], np.ndarray]], a: float, b: float, n_samples: int = 257, samples=None):
        self.func = func
        self.a, self.b = float(a), float(b)
        self._cache: dict[float, np.ndarray] = {}
        if samples is not None:
            ts, frames = samples
            for t, F in zip(ts, frames):
                self._cache[float(t)] = np.asarray(F, float)
        elif func is None:
            raise ValueError("either func or samples must be supplied")
        else:
            for t in np.linspace(self.a, self.b, n_samples):
                self.frame(t)

    @classmethod
    def from_samples(cls, ts: Sequence[float], frames: Sequence[np.ndarray]) -> "LagrangianPath":
        return cls(None, ts[0], ts[-1], samples=(ts, frames))

    def frame(self, t: float) -> np.ndarray:
        t = float(t)
        F = self._cache.get(t)
        if F is None:
            if self.func is None:
                raise RefinementExhausted(f"sampled path cannot be refined at t={t}")
            F = np.asarray(self.func(t), float)
            self._cache[t] = F
        return F

    def times(self, lo: float, hi: float) -> list[float]:
        return sorted(t for t in self._cache if lo <= t <= hi)


@dataclass(frozen=True)
class MaslovResult:
    doubled: int
    segments: int

    @property
    def value(self):
        return self.doubled // 2 if self.doubled % 2 == 0 else Fraction(self.doubled, 2)


def _chart_signature(F: np.ndarray) -> int:
    # orthonormal frames keep chart entries O(1); tiny eigenvalues mean the cycle itself
    return signature_counts(F, scale=max(1.0, np.abs(F).max())).signature


def maslov_index(
    path: LagrangianPath,
    L0: np.ndarray,
    Omega: np.ndarray,
    seed: int = 0,
    integer: bool = True,
    max_depth: int = 20,
    max_step: float = 0.1,
    tries: int = 24,
    transversal_tol: float = 1e-6,
    details: bool = False,
):
    """Maslov index of the path relative to L0 by the chart formula."""
    rng = np.random.default_rng(seed)
    L0 = orthonormalize(L0)
    n = L0.shape[1]
    B = lagrangian_complement(L0, Omega)
    A0 = L0

    if integer:
        for t in (path.a, path.b):
            if min_angle(path.frame(t), L0) <= transversal_tol:
                raise NonIntegerResult(f"endpoint t={t:.10g} lies on the Maslov cycle of the reference")

    def ensure_continuity(lo, hi, depth):
        for _ in range(60):
            ts = path.times(lo, hi)
            frames = [orthonormalize(path.frame(t)) for t in ts]
            steps = [max_angle(frames[k], frames[k + 1]) for k in range(len(ts) - 1)]
            bad = [k for k, s in enumerate(steps) if s > max_step]
            if not bad:
                return ts, frames, steps
            if path.func is None:
                raise RefinementExhausted("sampled path is too coarse and has no refinement callback")
            for k in bad:
                path.frame(0.5 * (ts[k] + ts[k + 1]))
        raise RefinementExhausted("path could not be made continuous by refinement")

    def candidate():
        P = rng.standard_normal((n, n)) * rng.choice([0.3, 1.0, 3.0])
        P = 0.5 * (P + P.T)
        return orthonormalize(B + A0 @ P)

    count = {"segments": 0}

    def segment(lo, hi, depth):
        ts, frames, steps = ensure_continuity(lo, hi, depth)
        margin = max(transversal_tol, 2.0 * max(steps, default=0.0))
        for _ in range(tries):
            L1 = candidate()
            if min_angle(L1, A0) <= transversal_tol:
                continue
            if all(min_angle(L1, F) > margin for F in frames):
                count["segments"] += 1
                s_end = _chart_signature(chart_form(A0, L1, frames[-1], Omega))
                s_start = _chart_signature(chart_form(A0, L1, frames[0], Omega))
                return s_end - s_start
        if depth >= max_depth:
            raise RefinementExhausted(f"no transversal auxiliary Lagrangian on [{lo:.6g}, {hi:.6g}]")
        inner = [t for t in ts if lo + 0.25 * (hi - lo) <= t <= hi - 0.25 * (hi - lo)]
        if inner:
            tm = max(inner, key=lambda t: min_angle(path.frame(t), A0))
        else:
            if path.func is None:
                raise RefinementExhausted("cannot split a sampled segment without a callback")
            tm = 0.5 * (lo + hi)
            path.frame(tm)
        return segment(lo, tm, depth + 1) + segment(tm, hi, depth + 1)

    doubled = segment(path.a, path.b, 0)
    res = MaslovResult(int(doubled), count["segments"])
    if integer and res.doubled % 2:
        raise NonIntegerResult(f"chart formula produced the half-integer {Fraction(res.doubled, 2)}")
    return res if details else res.value


def derivative_frame(func: Callable[[float], np.ndarray], t: float, h: float = 1e-4) -> np.ndarray:
    """Order-4 central difference of a frame-valued function."""
    return (-func(t + 2 * h) + 8 * func(t + h) - 8 * func(t - h) + func(t - 2 * h)) / (12 * h)


def crossing_form(func: Callable[[float], np.ndarray], L0: np.ndarray, Omega: np.ndarray, t0: float, h: float = 1e-4):
    """Matrix of the crossing form on L(t0) and a basis of L(t0) ∩ L0 (as coefficient vectors)."""
    A = np.asarray(func(t0), float)
    dA = derivative_frame(func, t0, h)
    n = A.shape[1]
    Gam = dA.T @ Omega @ A
    Gam = 0.5 * (Gam + Gam.T)
    # coefficient vectors a with A a in L0; loose tolerance since t0 is numerical
    U, sv, Vt = np.linalg.svd(np.hstack([A, orthonormalize(L0)]))
    k = int((sv < 1e-6 * sv[0]).sum())
    return Gam, Vt[len(sv) - k :].T[:n] if k else np.zeros((n, 0))


def crossing_signature(func, L0, Omega, t0: float, h: float = 1e-4, rtol: float = 1e-6):
    """(nondegenerate, signature) of the crossing form restricted to L(t0) ∩ L0."""
    Gam, N = crossing_form(func, L0, Omega, t0, h)
    if N.shape[1] == 0:
        return True, 0
    res = restricted_signature(Gam, N, rtol)
    return res.nondegenerate, res.signature


def find_crossings(func, L0, a: float, b: float, n_scan: int = 2048, rel_tol: float = 1e-7):
    """Instants in [a, b] where L(t) meets L0, found from [L(t), L0] becoming singular."""
    Q0 = orthonormalize(L0)

    def single(t):
        return np.hstack([orthonormalize(func(t)), Q0])

    def batch(ts):
        return np.array([single(t) for t in ts])

    found, _ = locate_singular_instants(batch, single, a, b, n_scan=n_scan, rel_tol=rel_tol)
    return [f.t for f in found]
