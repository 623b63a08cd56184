"""End-to-end runs: index reports, the bifurcation probe and the gallery."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space
from scipy.optimize import root

from . import emindex as em
from . import flow
from . import jacobi as jac
from . import specflow as sf
from .config import GALLERY, RunConfig, gallery_config
from .errors import EndpointConjugate


@dataclass
class Pipeline:
    config: RunConfig
    traj: flow.Trajectory
    ordinary: jac.TransferPath
    ec: Optional[jac.TransferPath]

    @property
    def T(self) -> float:
        return self.traj.T


def prepare(config: RunConfig, T: Optional[float] = None) -> Pipeline:
    T = config.T if T is None else float(T)
    traj = flow.integrate_em_geodesic(config.spec, config.x0, config.v0, T)
    ordinary = jac.build_transfer(traj, flavor=jac.ORDINARY)
    ec = jac.build_transfer(traj, flavor=jac.EC) if traj.kappa != 0.0 else None
    return Pipeline(config, traj, ordinary, ec)


def _check_endpoint(tp: jac.TransferPath, instants):
    if jac.is_conjugate(tp, tp.T):
        nearest = min((ci.time for ci in instants), key=lambda t: abs(t - tp.T), default=tp.T)
        raise EndpointConjugate(f"T={tp.T:.10g} is an {tp.flavor} conjugate instant", flavor=tp.flavor, nearest=nearest)


@dataclass
class IndexReport:
    system_id: str
    kappa: float
    T: float
    epsilon: float
    N: int
    seed: int
    ordinary_conjugate_instants: list
    ec_conjugate_instants: list
    mu_ordinary: int
    mu_ec: int
    sf_ordinary: int
    sf_ec: int
    kashiwara_difference_direct: int
    kashiwara_difference_signtable: int
    restriction_complement_index: list
    crossings: list
    verdict_sf_equals_minus_mu: bool
    verdict_sf_ec_equals_minus_mu_ec: bool
    verdict_difference_identity: bool
    verdict_crossing_signatures: bool
    bifurcation_predicted: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> dict:
        return {
            "sf_equals_minus_mu": self.verdict_sf_equals_minus_mu,
            "sf_ec_equals_minus_mu_ec": self.verdict_sf_ec_equals_minus_mu_ec,
            "difference_identity": self.verdict_difference_identity,
            "crossing_signatures": self.verdict_crossing_signatures,
        }

    @property
    def all_verdicts(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_round_floats(self.to_dict()), indent=2, sort_keys=True)


def _round_floats(obj, digits: int = 12):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def run_report(config: RunConfig, T: Optional[float] = None, N: Optional[int] = None,
               seed: Optional[int] = None, pipeline: Optional[Pipeline] = None) -> IndexReport:
    pipe = pipeline if pipeline is not None else prepare(config, T)
    N = config.N if N is None else N
    seed = config.seed if seed is None else seed
    traj = pipe.traj
    T = pipe.T
    jac.require_energy(traj.kappa, "the index report")

    ordinary = jac.find_conjugate_instants(pipe.ordinary)
    ec = jac.find_conjugate_instants(pipe.ec)
    _check_endpoint(pipe.ordinary, ordinary)
    _check_endpoint(pipe.ec, ec)
    eps = jac.select_epsilon([pipe.ordinary, pipe.ec])

    setup = em.build_setup(traj, pipe.ordinary, seed=seed)
    idx = em.compute_indices(setup, eps, T, ordinary, ec)

    path = sf.build_form_path(traj.foulon, traj.kappa, N)
    sf_ec = sf.spectral_flow(path, (eps, T))
    sf_ord = sf.spectral_flow(path.with_restriction(True), (eps, T))
    comp = [sf.index_of_restriction_complement(path, s, setup) for s in (eps, T)]

    ec_sig = {round(ci.time, 6): ci.signature for ci in ec}
    crossing_ok = all(
        row["signature"] == row["local_index"]
        and (row["reference"] != "energy" or ec_sig.get(round(row["t"], 6)) in (None, row["signature"]))
        for row in idx.crossings
    )
    return IndexReport(
        system_id=config.name,
        kappa=float(traj.kappa),
        T=float(T),
        epsilon=float(eps),
        N=int(N),
        seed=int(seed),
        ordinary_conjugate_instants=[ci.as_dict() for ci in ordinary],
        ec_conjugate_instants=[ci.as_dict() for ci in ec],
        mu_ordinary=idx.mu_ordinary,
        mu_ec=idx.mu_ec,
        sf_ordinary=sf_ord,
        sf_ec=sf_ec,
        kashiwara_difference_direct=idx.kashiwara.direct,
        kashiwara_difference_signtable=idx.kashiwara.signtable,
        restriction_complement_index=comp,
        crossings=idx.crossings,
        verdict_sf_equals_minus_mu=sf_ord == -idx.mu_ordinary,
        verdict_sf_ec_equals_minus_mu_ec=sf_ec == -idx.mu_ec,
        verdict_difference_identity=(
            sf_ec - sf_ord == idx.mu_ordinary - idx.mu_ec
            and idx.kashiwara.direct == idx.mu_ec - idx.mu_ordinary
            and idx.kashiwara.signtable == idx.kashiwara.direct
            and comp[0] - comp[1] == sf_ec - sf_ord
        ),
        verdict_crossing_signatures=crossing_ok,
        bifurcation_predicted=idx.mu_ec != 0,
        diagnostics={
            "energy_drift": float(traj.stats["energy_drift"]),
            "frame_gram_drift": float(traj.frame.gram_drift),
            "jacobi_symmetry_residual": float(traj.foulon.symmetry_residual),
        },
    )


# ---------------------------------------------------------------------------
# bifurcation probe


@dataclass
class Branch:
    target_time: float
    w: list
    meeting_time: float
    residual: float
    energy_error: float


@dataclass
class BifurcationProbeResult:
    t0: float
    status: str
    branches: list
    attempts: int
    converged: int
    notes: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _shoot(spec, x0, w, tau):
    res = solve_ivp(flow.lorentz_rhs(spec), (0.0, tau), np.concatenate([x0, w]), method="DOP853",
                    rtol=1e-12, atol=1e-13)
    if not res.success:
        return None
    return res.y[: spec.dim, -1]


def bifurcation_probe(traj: flow.Trajectory, t0: float,
                      offsets: Sequence[float] = (0.05, -0.05, 0.1, -0.1, 0.2, -0.2, 0.0),
                      scales: Sequence[float] = (0.05, 0.2, 0.5),
                      residual_tol: float = 1e-8, distinct_tol: float = 1e-6,
                      max_branches: int = 4) -> BifurcationProbeResult:
    """Search for same-energy geodesics from gamma(0) through gamma(t) for t near t0.

    Unknowns are u in the g-orthogonal complement of v and the meeting time
    tau; the initial velocity is w(u) = a(u) v + u with a chosen so that the
    energy stays kappa. Seeds follow the energy-constrained kernel direction.
    """
    spec, x0, v, kappa = traj.spec, traj.x0, traj.v0, traj.kappa
    jac.require_energy(kappa, "the bifurcation probe")
    n = spec.dim
    g0 = spec.g(x0)
    U = null_space((g0 @ v)[None, :])
    te = jac.build_transfer(traj, flavor=jac.EC)
    ci = jac.describe_instant(te, t0)
    kdir = U.T @ (te.frame.E(0.0) @ ci.kernel[:, 0])
    if np.linalg.norm(kdir) < 1e-8:
        kdir = np.ones(n - 1)
    kdir = kdir / np.linalg.norm(kdir)

    def velocity(z):
        u = U @ z[: n - 1]
        a2 = 1.0 - (u @ g0 @ u) / (2 * kappa)
        if a2 <= 0:
            return None
        return np.sqrt(a2) * v + u

    branches: list[Branch] = []
    attempts = converged = 0
    for dt in offsets:
        t = t0 + dt
        if not 0 < t <= traj.T:
            continue
        target = traj.position(t)
        for sc in scales:
            for sgn in (1.0, -1.0):
                for tau0 in (t, t0 - dt):
                    if tau0 <= 0 or len(branches) >= max_branches:
                        continue
                    attempts += 1
                    z0 = np.concatenate([sgn * sc * kdir, [tau0]])

                    def F(z):
                        w = velocity(z)
                        if w is None or z[-1] <= 0:
                            return np.full(n, 1e3)
                        end = _shoot(spec, x0, w, z[-1])
                        return np.full(n, 1e3) if end is None else end - target

                    sol = root(F, z0, method="hybr", options={"xtol": 1e-13})
                    w = velocity(sol.x)
                    if w is None or sol.x[-1] <= 0:
                        continue
                    end = _shoot(spec, x0, w, sol.x[-1])
                    if end is None:
                        continue
                    resid = float(np.linalg.norm(end - target))
                    if resid >= residual_tol:
                        continue
                    converged += 1
                    if np.linalg.norm(w - v) <= distinct_tol:
                        continue
                    eerr = abs(spec.energy(x0, w) - kappa)
                    if eerr >= 1e-10:
                        continue
                    if any(np.linalg.norm(np.array(b.w) - w) < 1e-6 and abs(b.target_time - t) < 1e-12 for b in branches):
                        continue
                    branches.append(Branch(float(t), [float(c) for c in w], float(sol.x[-1]), resid, float(eerr)))
    status = "ok" if branches else "NoBranchFound"
    return BifurcationProbeResult(float(t0), status, [asdict(b) for b in branches], attempts, converged,
                                  "meeting time is a free unknown; finitely many branches are evidence only")


# ---------------------------------------------------------------------------
# exports


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{float(x):.12g}" for x in r])


def trajectory_rows(traj: flow.Trajectory, samples: int = 513):
    n = traj.dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["E"]
    return header, traj.to_csv_rows(np.linspace(0.0, traj.T, samples))


def det_trace_rows(pipe: Pipeline, samples: int = 513):
    T = pipe.T
    ts = np.linspace(T / jac.SCAN_STEPS, T, samples)
    cols = [ts, np.linalg.det(pipe.ordinary.J_block(ts))]
    cols.append(np.linalg.det(pipe.ec.J_block(ts)) if pipe.ec is not None else np.full_like(ts, np.nan))
    cols.append(np.linalg.svd(pipe.ordinary.J_block_normalized(ts), compute_uv=False)[:, -1])
    if pipe.ec is not None:
        cols.append(np.linalg.svd(pipe.ec.J_block_normalized(ts), compute_uv=False)[:, -1])
    else:
        cols.append(np.full_like(ts, np.nan))
    header = ["t", "det_ordinary", "det_ec", "smallest_singular_value", "smallest_singular_value_ec"]
    return header, np.column_stack(cols)


def eigen_trace_rows(path: sf.FormPath, a: float, b: float, samples: int = 512, k: int = 8):
    grid = np.linspace(a, b, samples)
    jumps = sf.degenerate_instants(path, a, b, n_grid=samples)
    extra = []
    h = grid[1] - grid[0]
    for s in jumps:
        extra.extend(s + h * np.linspace(-0.5, 0.5, 5))
    grid = np.unique(np.concatenate([grid, np.clip(extra, a, b)])) if extra else grid
    header = ["s"] + [f"lambda{i + 1}" for i in range(k)] + ["ind"]
    return header, sf.eigen_traces(path, grid, k)


def run_gallery(out_dir="gallery_out", systems: Optional[Sequence[str]] = None, N: int = 128,
                traces: bool = True, log=print):
    """Run every built-in system; returns (exit_code, aggregate dict)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    aggregate = {"systems": [], "all_verdicts": True}
    for name in systems or list(GALLERY):
        cfg = gallery_config(name, N=N)
        t_start = time.perf_counter()
        entry = {"system_id": name}
        try:
            pipe = prepare(cfg)
            rep = run_report(cfg, pipeline=pipe)
            (out / f"{name}.json").write_text(rep.to_json() + "\n")
            if traces:
                write_csv(out / f"{name}_trajectory.csv", *trajectory_rows(pipe.traj))
                write_csv(out / f"{name}_det.csv", *det_trace_rows(pipe))
                path = sf.build_form_path(pipe.traj.foulon, pipe.traj.kappa, N)
                write_csv(out / f"{name}_eigen.csv", *eigen_trace_rows(path, rep.epsilon, rep.T))
            entry.update({k: getattr(rep, k) for k in ("mu_ordinary", "mu_ec", "sf_ordinary", "sf_ec")})
            entry["verdicts"] = rep.verdicts
            ok = rep.all_verdicts
        except Exception as exc:  # aggregated, reported per system
            entry["error"] = f"{type(exc).__name__}: {exc}"
            ok = False
        entry["ok"] = ok
        aggregate["systems"].append(entry)
        aggregate["all_verdicts"] &= ok
        if log:
            log(f"{name:16s} {'ok' if ok else 'FAIL'}  ({time.perf_counter() - t_start:.1f}s)")
    (out / "gallery.json").write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    return (0 if aggregate["all_verdicts"] else 1), aggregate
