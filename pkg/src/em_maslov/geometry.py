"""Chart-level evaluation of a metric g and a closed 2-form sigma.

Conventions used everywhere in the package:

* ``sigma[u, v] = u @ Sigma @ v`` with ``Sigma`` antisymmetric.
* The Lorentz force is ``Y = g^{-1} Sigma`` so that ``sigma[u, v] = g[u, Y v]``.
* ``dg[k, i, j] = d_k g_ij`` and ``d2g[k, l, i, j] = d_k d_l g_ij``.
* Christoffels ``Gamma[k, i, j] = Gamma^k_ij``.
* Curvature ``R[l, i, j, k] = R^l_ijk``, the components of
  ``R(e_i, e_j) e_k`` with ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``.
* ``nablaY[i, j, k] = (nabla_i Y)^j_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateMetric, DerivativeUnavailable, NotClosed

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEGENERACY_RTOL = 1e-10
CLOSEDNESS_TOL = 1e-7


def signature_matrix(n: int, p: int) -> np.ndarray:
    """I_{n,p}: -1 on the first p diagonal entries, +1 on the rest."""
    return np.diag(np.r_[-np.ones(p), np.ones(n - p)])


@dataclass(frozen=True)
class GeometrySpec:
    dim: int
    metric_index: int
    metric: ArrayFn
    sigma: ArrayFn
    provider: str = "analytic"
    dmetric: Optional[ArrayFn] = None
    d2metric: Optional[ArrayFn] = None
    dsigma: Optional[ArrayFn] = None
    fd_step: float = 1e-5
    fd_step2: float = 1e-3
    # positive inside the chart's validity region, crosses zero at its boundary
    chart_margin: Optional[ArrayFn] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not 0 <= self.metric_index <= self.dim:
            raise ValueError("metric_index must lie in [0, dim]")
        if self.provider not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown derivative provider {self.provider!r}")

    def with_provider(self, provider: str) -> "GeometrySpec":
        return _replace(self, provider=provider)

    def g(self, x) -> np.ndarray:
        return np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)

    def Sigma(self, x) -> np.ndarray:
        return np.asarray(self.sigma(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.provider == "analytic":
            if self.dmetric is None:
                raise DerivativeUnavailable("no analytic first derivative of g supplied")
            return np.asarray(self.dmetric(x), dtype=float)
        return fd_gradient(self.metric, x, self.fd_step)

    def d2g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.provider == "analytic":
            if self.d2metric is None:
                raise DerivativeUnavailable("no analytic second derivative of g supplied")
            return np.asarray(self.d2metric(x), dtype=float)
        return fd_hessian(self.metric, x, self.fd_step2)

    def dSigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.provider == "analytic":
            if self.dsigma is None:
                raise DerivativeUnavailable("no analytic derivative of sigma supplied")
            return np.asarray(self.dsigma(x), dtype=float)
        return fd_gradient(self.sigma, x, self.fd_step)

    def energy(self, x, v) -> float:
        v = np.asarray(v, dtype=float)
        return 0.5 * float(v @ self.g(x) @ v)


def _replace(spec: GeometrySpec, **changes) -> GeometrySpec:
    from dataclasses import replace

    return replace(spec, **changes)


# ---------------------------------------------------------------------------
# finite differences

_D1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D1_OFFSETS = np.array([-2, -1, 1, 2])
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D2_OFFSETS = np.array([-2, -1, 0, 1, 2])


def _steps(x: np.ndarray, h: float) -> np.ndarray:
    return h * (1.0 + np.abs(x))


def fd_gradient(f: ArrayFn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Order-4 central differences; result[k] = d_k f(x)."""
    x = np.asarray(x, dtype=float)
    hs = _steps(x, h)
    out = []
    for k in range(x.size):
        acc = 0.0
        for c, o in zip(_D1, _D1_OFFSETS):
            xp = x.copy()
            xp[k] += o * hs[k]
            acc = acc + c * np.asarray(f(xp), dtype=float)
        out.append(acc / hs[k])
    return np.array(out)


def fd_hessian(f: ArrayFn, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Order-4 second derivatives; result[k, l] = d_k d_l f(x)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    hs = _steps(x, h)
    f0 = np.asarray(f(x), dtype=float)
    out = np.zeros((n, n) + f0.shape)
    for k in range(n):
        acc = 0.0
        for c, o in zip(_D2, _D2_OFFSETS):
            xp = x.copy()
            xp[k] += o * hs[k]
            acc = acc + c * (f0 if o == 0 else np.asarray(f(xp), dtype=float))
        out[k, k] = acc / hs[k] ** 2
        for l in range(k + 1, n):
            acc = 0.0
            for ck, ok in zip(_D1, _D1_OFFSETS):
                for cl, ol in zip(_D1, _D1_OFFSETS):
                    xp = x.copy()
                    xp[k] += ok * hs[k]
                    xp[l] += ol * hs[l]
                    acc = acc + ck * cl * np.asarray(f(xp), dtype=float)
            out[k, l] = out[l, k] = acc / (hs[k] * hs[l])
    return out


# ---------------------------------------------------------------------------
# tensors


def metric_inverse(spec: GeometrySpec, x, g: Optional[np.ndarray] = None) -> np.ndarray:
    g = spec.g(x) if g is None else g
    if not np.allclose(g, g.T, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise DegenerateMetric(f"metric is not symmetric at x={np.asarray(x)}")
    ev = np.linalg.eigvalsh(g)
    amax = np.abs(ev).max()
    if amax == 0.0 or np.abs(ev).min() <= DEGENERACY_RTOL * amax:
        raise DegenerateMetric(f"metric is degenerate at x={np.asarray(x)} (eigenvalues {ev})")
    return np.linalg.inv(g)


def _christoffel_from(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # A[l,i,j] = d_i g_lj + d_j g_li - d_l g_ij
    A = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, A)


def christoffel(spec: GeometrySpec, x) -> np.ndarray:
    g = spec.g(x)
    return _christoffel_from(metric_inverse(spec, x, g), spec.dg(x))


def _christoffel_derivative(ginv, dg, d2g):
    # dGamma[m,k,i,j] = d_m Gamma^k_ij
    A = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
    dA = d2g.transpose(0, 2, 1, 3) + d2g.transpose(0, 2, 3, 1) - d2g
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    return 0.5 * (np.einsum("mkl,lij->mkij", dginv, A) + np.einsum("kl,mlij->mkij", ginv, dA))


def _riemann_from(Gamma, dGamma):
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    dterm = np.einsum("iljk->lijk", dGamma)
    quad = np.einsum("lim,mjk->lijk", Gamma, Gamma)
    return dterm - dterm.transpose(0, 2, 1, 3) + quad - quad.transpose(0, 2, 1, 3)


def curvature(spec: GeometrySpec, x) -> np.ndarray:
    g = spec.g(x)
    ginv = metric_inverse(spec, x, g)
    dg = spec.dg(x)
    Gamma = _christoffel_from(ginv, dg)
    return _riemann_from(Gamma, _christoffel_derivative(ginv, dg, spec.d2g(x)))


def lorentz_force(spec: GeometrySpec, x) -> np.ndarray:
    return metric_inverse(spec, x) @ spec.Sigma(x)


def _nabla_Y_from(ginv, dg, Sigma, dSigma, Gamma):
    Y = ginv @ Sigma
    dY = -np.einsum("ja,iab,bk->ijk", ginv, dg, Y) + np.einsum("ja,iak->ijk", ginv, dSigma)
    return dY + np.einsum("jim,mk->ijk", Gamma, Y) - np.einsum("mik,jm->ijk", Gamma, Y)


def nabla_Y(spec: GeometrySpec, x) -> np.ndarray:
    g = spec.g(x)
    ginv = metric_inverse(spec, x, g)
    dg = spec.dg(x)
    return _nabla_Y_from(ginv, dg, spec.Sigma(x), spec.dSigma(x), _christoffel_from(ginv, dg))


def exterior_derivative(dSigma: np.ndarray) -> np.ndarray:
    """(d sigma)_ijk = d_i S_jk + d_j S_ki + d_k S_ij."""
    return dSigma + dSigma.transpose(1, 2, 0) + dSigma.transpose(2, 0, 1)


def check_closed(spec: GeometrySpec, points: Sequence, tol: float = CLOSEDNESS_TOL) -> float:
    """Raise NotClosed if d sigma is visibly nonzero at any of the points."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        dS = spec.dSigma(x)
        res = np.abs(exterior_derivative(dS)).max() if dS.size else 0.0
        scale = max(1.0, np.abs(dS).max()) if dS.size else 1.0
        if res > tol * scale:
            raise NotClosed(f"d sigma = {res:.3e} at x={x}")
        worst = max(worst, res)
    return worst


@dataclass(frozen=True)
class GeometryEval:
    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    Y: np.ndarray
    riemann: Optional[np.ndarray] = None
    nablaY: Optional[np.ndarray] = None
    Sigma: Optional[np.ndarray] = field(default=None, repr=False)

    def jacobi_operator(self, v: np.ndarray) -> np.ndarray:
        """Coordinate matrix of K(u) = R(u,v)v + 1/2 (nabla_v Y)u - (nabla_u Y)v - 1/4 Y^2 u."""
        R = np.einsum("lijk,j,k->li", self.riemann, v, v)
        half_dv = 0.5 * np.einsum("i,ijk->jk", v, self.nablaY)
        du = -np.einsum("ijk,k->ji", self.nablaY, v)
        return R + half_dv + du - 0.25 * self.Y @ self.Y


def evaluate(spec: GeometrySpec, x, second_order: bool = True) -> GeometryEval:
    x = np.asarray(x, dtype=float)
    g = spec.g(x)
    ginv = metric_inverse(spec, x, g)
    dg = spec.dg(x)
    Gamma = _christoffel_from(ginv, dg)
    Sigma = spec.Sigma(x)
    Y = ginv @ Sigma
    R = nY = None
    if second_order:
        R = _riemann_from(Gamma, _christoffel_derivative(ginv, dg, spec.d2g(x)))
        nY = _nabla_Y_from(ginv, dg, Sigma, spec.dSigma(x), Gamma)
    return GeometryEval(x=x, g=g, ginv=ginv, christoffel=Gamma, Y=Y, riemann=R, nablaY=nY, Sigma=Sigma)


# ---------------------------------------------------------------------------
# builtin geometries


def flat_metric(n: int, p: int = 0):
    G = signature_matrix(n, p)
    return (
        lambda x: G.copy(),
        lambda x: np.zeros((n, n, n)),
        lambda x: np.zeros((n, n, n, n)),
    )


def round_sphere_metric(radius: float = 1.0):
    r2 = radius**2

    def g(x):
        return r2 * np.diag([1.0, np.sin(x[0]) ** 2])

    def dg(x):
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = r2 * np.sin(2 * x[0])
        return out

    def d2g(x):
        out = np.zeros((2, 2, 2, 2))
        out[0, 0, 1, 1] = 2 * r2 * np.cos(2 * x[0])
        return out

    return g, dg, d2g


def sphere_chart_margin(x):
    return min(x[0], np.pi - x[0]) - 1e-3


def zero_form(n: int):
    return lambda x: np.zeros((n, n)), lambda x: np.zeros((n, n, n))


def uniform_form(n: int, b: float, i: int = 0, j: int = 1):
    S = np.zeros((n, n))
    S[i, j], S[j, i] = b, -b
    return lambda x: S.copy(), lambda x: np.zeros((n, n, n))


def sphere_area_form(b: float, radius: float = 1.0):
    c = b * radius**2

    def sigma(x):
        s = c * np.sin(x[0])
        return np.array([[0.0, s], [-s, 0.0]])

    def dsigma(x):
        out = np.zeros((2, 2, 2))
        out[0, 0, 1] = c * np.cos(x[0])
        out[0, 1, 0] = -out[0, 0, 1]
        return out

    return sigma, dsigma


@dataclass(frozen=True)
class PolyTerm:
    i: int
    j: int
    coeff: float
    powers: tuple


class PolynomialMatrixField:
    """Matrix field whose (i, j) entries are sums of monomials.

    Each term adds ``coeff * prod(x**powers)`` to entry (i, j) and, to keep the
    field symmetric (or antisymmetric), the mirrored amount to (j, i).
    """

    def __init__(self, n: int, terms: Sequence[PolyTerm], antisymmetric: bool):
        self.n = n
        self.terms = list(terms)
        self.sign = -1.0 if antisymmetric else 1.0
        for t in self.terms:
            if len(t.powers) != n:
                raise ValueError(f"term powers {t.powers} do not match dim {n}")
            if antisymmetric and t.i == t.j:
                raise ValueError("antisymmetric field cannot have diagonal terms")

    def _put(self, out, idx, t, val):
        out[idx + (t.i, t.j)] += val
        if t.i != t.j:
            out[idx + (t.j, t.i)] += self.sign * val

    @staticmethod
    def _mono(x, powers, dk=()):
        p = np.array(powers, dtype=float)
        c = 1.0
        for k in dk:
            c *= p[k]
            p[k] -= 1
        if c == 0.0 or np.any(p < 0):
            return 0.0
        return c * float(np.prod(x**p))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n, self.n))
        for t in self.terms:
            self._put(out, (), t, t.coeff * self._mono(x, t.powers))
        return out

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n, self.n, self.n))
        for t in self.terms:
            for k in range(self.n):
                self._put(out, (k,), t, t.coeff * self._mono(x, t.powers, (k,)))
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n,) * 4)
        for t in self.terms:
            for k in range(self.n):
                for l in range(self.n):
                    self._put(out, (k, l), t, t.coeff * self._mono(x, t.powers, (k, l)))
        return out
