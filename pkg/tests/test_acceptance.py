"""Acceptance criteria, one test each; every test logs a single PASS/FAIL line.

Run directly with ``python3 tests/test_acceptance.py`` or through pytest,
which repeats the lines in an "acceptance criteria" summary section.
"""
import time

import numpy as np
import pytest

from em_maslov import app
from em_maslov import emindex as em
from em_maslov import jacobi as jac
from em_maslov import specflow as sf
from em_maslov import symplectic as sp
from em_maslov.config import GALLERY, gallery_config

from test_specflow import random_form_path
from test_symplectic import maslov_difference_holds

_FRESH: dict = {}


def fresh_reports():
    """Gallery reports computed from scratch, with wall-clock time per system."""
    if not _FRESH:
        for name in GALLERY:
            t0 = time.perf_counter()
            rep = app.run_report(gallery_config(name, N=128))
            _FRESH[name] = (rep, time.perf_counter() - t0)
    return _FRESH


def test_criterion_1_morse_index_identity(acceptance_log):
    """[PAPER] sf_ec = -mu_ec exactly on every gallery system, each under 60 s at N = 128."""
    rows = fresh_reports()
    bad = [n for n, (r, dt) in rows.items() if r.sf_ec != -r.mu_ec or dt >= 60]
    detail = ", ".join(f"{n}: sf_ec={r.sf_ec} mu_ec={r.mu_ec} ({dt:.1f}s)" for n, (r, dt) in rows.items())
    acceptance_log(1, not bad, detail)
    assert not bad


def test_criterion_2_difference_identity(acceptance_log):
    """[PAPER] sf_ec - sf = mu - mu_ec, with mu - mu_ec also given by the Kashiwara index and the sign table."""
    rows = fresh_reports()
    bad = []
    for n, (r, _) in rows.items():
        rhs = r.mu_ordinary - r.mu_ec
        ok = (r.sf_ec - r.sf_ordinary == rhs and -r.kashiwara_difference_direct == rhs
              and -r.kashiwara_difference_signtable == rhs)
        if not ok:
            bad.append(n)
    detail = ", ".join(f"{n}: {r.sf_ec - r.sf_ordinary}={r.mu_ordinary - r.mu_ec}" for n, (r, _) in rows.items())
    acceptance_log(2, not bad, detail)
    assert not bad


def test_criterion_3_restriction_formula(acceptance_log):
    """[PAPER] 100 random dimension-6 paths with a codimension-1 subspace: formula equals brute-force crossings."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100):
        Q, V = random_form_path(rng)
        res = sf.matrix_restriction_difference(Q, V, 0.0, 1.0)
        brute = sf.brute_force_spectral_flow(Q, 0, 1, 200) - sf.brute_force_spectral_flow(lambda s: V.T @ Q(s) @ V, 0, 1, 200)
        bad += int(res.rhs != brute)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 5.0
    acceptance_log(3, ok, f"{100 - bad}/100 agree in {dt:.2f}s")
    assert ok


def test_criterion_4_landau_instants(acceptance_log):
    """[DERIVED] b = 1, kappa = 1/2: ec instants at k pi (multiplicity 1), ordinary at 2 k pi (multiplicity 2) on (0, 3 pi]."""
    p = app.prepare(gallery_config("landau"), 3 * np.pi)
    ordinary = jac.find_conjugate_instants(p.ordinary)
    ec = jac.find_conjugate_instants(p.ec)
    exp_o, exp_e = [2 * np.pi], [np.pi, 2 * np.pi, 3 * np.pi]
    ok = (
        len(ordinary) == 1 and len(ec) == 3
        and all(abs(ci.time - t) < 1e-6 and ci.multiplicity == 2 for ci, t in zip(ordinary, exp_o))
        and all(abs(ci.time - t) < 1e-6 and ci.multiplicity == 1 for ci, t in zip(ec, exp_e))
    )
    err = max(abs(ci.time - t) for ci, t in zip(ordinary + ec, exp_o + exp_e)) if ordinary and ec else np.inf
    acceptance_log(4, ok, f"ordinary {[round(c.time, 9) for c in ordinary]} ec {[round(c.time, 9) for c in ec]} max error {err:.1e}")
    assert ok


def test_criterion_5_sphere(acceptance_log):
    """[DERIVED] conjugate instant at pi within 1e-8, mu = 1 on [eps, 3 pi/2], sf = -1 for N = 32..256."""
    p = app.prepare(gallery_config("round-sphere"))
    inst = jac.find_conjugate_instants(p.ordinary)
    eps = jac.select_epsilon([p.ordinary, p.ec])
    mu = em.ordinary_maslov(em.build_setup(p.traj, p.ordinary), eps, p.T)
    sfs = {N: sf.spectral_flow(sf.build_form_path(p.traj.foulon, p.traj.kappa, N, restricted=True), (eps, p.T))
           for N in (32, 64, 128, 256)}
    err = abs(inst[0].time - np.pi) if len(inst) == 1 else np.inf
    ok = err < 1e-8 and mu == 1 and all(v == -1 for v in sfs.values())
    acceptance_log(5, ok, f"instant error {err:.1e}, mu={mu}, sf by N {sfs}")
    assert ok


def test_criterion_6_symplectic_suite(acceptance_log):
    """[PAPER] Kashiwara antisymmetry, invariance, chain condition on 500 quadruples; difference formula on 100 paths."""
    rng = np.random.default_rng(7)
    fails = 0
    for k in range(500):
        n = 1 + k % 3
        W = sp.standard_omega(n)
        L1, L2, L3, L4 = (sp.random_lagrangian(n, rng) for _ in range(4))
        S = sp.random_symplectic(n, rng)
        tau = lambda a, b, c: sp.kashiwara_tau(a, b, c, W)
        t = tau(L1, L2, L3)
        fails += int(tau(L2, L1, L3) != -t or tau(L1, L3, L2) != -t)
        fails += int(tau(S @ L1, S @ L2, S @ L3) != t)
        fails += int(t - tau(L1, L2, L4) + tau(L1, L3, L4) - tau(L2, L3, L4) != 0)
    diff_fails = sum(not maslov_difference_holds(rng) for _ in range(100))
    ok = fails == 0 and diff_fails == 0
    acceptance_log(6, ok, f"quadruple failures {fails}/1500 checks, difference-formula failures {diff_fails}/100")
    assert ok


def test_criterion_7_conservation(acceptance_log):
    """[PAPER] energy, g[DJ/dt, v], the presymplectic pairing and its 2-dimensional kernel, within 1e-7."""
    rng = np.random.default_rng(3)
    worst = {"energy": 0.0, "slope": 0.0, "pairing": 0.0}
    kernel_ok = True
    for name in GALLERY:
        p = app.prepare(gallery_config(name))
        ts = np.linspace(0, p.T, 65)
        worst["energy"] = max(worst["energy"], float(np.abs(p.traj.energies(ts) - p.traj.kappa).max()))
        for tp in (p.ordinary, p.ec):
            for _ in range(3):
                u, w = rng.standard_normal((2, p.traj.dim))
                c = jac.solve_jacobi(p.traj, tp.flavor, u, w, tp).slope_constant(ts)
                worst["slope"] = max(worst["slope"], float(np.ptp(c)))
        W0 = p.ec.omega_hat(0.0)
        for t in ts:
            P = p.ec.at(t)
            Wt = p.ec.omega_hat(t)
            worst["pairing"] = max(worst["pairing"], float(np.abs(P.T @ Wt @ P - W0).max()))
            kernel_ok &= 2 * p.ec.n - np.linalg.matrix_rank(Wt, tol=1e-7) == 2
            kernel_ok &= np.abs(Wt @ p.ec.S(t)).max() < 1e-7
    ok = kernel_ok and all(v < 1e-7 for v in worst.values())
    acceptance_log(7, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", kernel dim 2: {kernel_ok}")
    assert ok


def test_criterion_8_signature_identity(acceptance_log):
    """[PAPER] at the Landau ec instant pi the local crossing index equals the g-signature on J'[pi]."""
    p = app.prepare(gallery_config("landau"))
    setup = em.build_setup(p.traj, p.ordinary)
    ci = jac.describe_instant(p.ec, np.pi)
    nondeg, sig, local = em.crossing_index(setup, "energy", np.pi, delta=0.05)
    ok = nondeg and ci.nondegenerate and local == sig == ci.signature
    acceptance_log(8, ok, f"local index {local}, crossing-form signature {sig}, sig(g|J') {ci.signature}")
    assert ok


def test_criterion_9_bifurcation_probe(acceptance_log):
    """[PAPER] at Landau t0 = pi a distinct same-energy branch meets gamma with residual < 1e-8."""
    p = app.prepare(gallery_config("landau"), 2 * np.pi - 0.1)
    res = app.bifurcation_probe(p.traj, np.pi, max_branches=2)
    good = [b for b in res.branches if b["residual"] < 1e-8]
    ok = res.status == "ok" and bool(good)
    best = min((b["residual"] for b in good), default=np.inf)
    acceptance_log(9, ok, f"{len(good)} branch(es), best residual {best:.1e}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
