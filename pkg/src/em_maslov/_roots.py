"""Locating instants where a square matrix-valued function becomes singular."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_min(f: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-13) -> float:
    """Golden-section minimizer on [lo, hi] down to an absolute width xtol.

    Used for V-shaped objectives (smallest singular values) where parabolic
    steps stall and scipy's bounded Brent stops at a relative sqrt(eps) width.
    """
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    cands = [(f(a), a), (fc, c), (fd, d), (f(b), b)]
    return min(cands)[1]


@dataclass(frozen=True)
class SingularInstant:
    t: float
    sign_change: bool
    rel_sigma: float


def relative_sigma_min(M: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(M, compute_uv=False)
    top = s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(top > 0, s[..., -1] / top, 0.0)


def smallest_sigma(M: np.ndarray) -> np.ndarray:
    return np.linalg.svd(M, compute_uv=False)[..., -1]


def locate_singular_instants(
    batch: Callable[[np.ndarray], np.ndarray],
    single: Callable[[float], np.ndarray],
    a: float,
    b: float,
    n_scan: int = 2048,
    rel_tol: float = 1e-7,
    screen: float = 0.05,
    merge_tol: float = 1e-6,
    absolute: bool = False,
):
    """Scan [a, b] for singular instants of a square matrix path.

    Odd-order zeros are bracketed by sign changes of det and refined with
    brentq; zeros of any order also appear as local minima of the relative
    smallest singular value, refined by golden-section search. With
    ``absolute`` the matrices are taken as pre-normalized and the plain
    smallest singular value is used (needed when the whole matrix can vanish).
    """
    measure = smallest_sigma if absolute else relative_sigma_min
    ts = np.linspace(a, b, n_scan + 1)
    mats = batch(ts)
    dets = np.linalg.det(mats)
    r = measure(mats)

    def det(t):
        return float(np.linalg.det(single(t)))

    def rel(t):
        return float(measure(single(t)))

    found: list[SingularInstant] = []
    for k in range(n_scan):
        if dets[k] * dets[k + 1] < 0:
            t = brentq(det, ts[k], ts[k + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
            found.append(SingularInstant(t, True, rel(t)))

    h = ts[1] - ts[0]
    for k in range(n_scan + 1):
        left = r[k - 1] if k > 0 else np.inf
        right = r[k + 1] if k < n_scan else np.inf
        if not (r[k] <= left and r[k] <= right and r[k] < screen):
            continue
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, n_scan)]
        t = golden_min(rel, lo, hi)
        rt = rel(t)
        if rt >= rel_tol:
            continue
        if any(abs(t - f.t) < merge_tol for f in found):
            continue
        tl, tr = max(a, t - h / 2), min(b, t + h / 2)
        changes = det(tl) * det(tr) < 0 if (tl < t < tr) else False
        found.append(SingularInstant(t, bool(changes), rt))

    found.sort(key=lambda f: f.t)
    return found, (ts, dets, r)
