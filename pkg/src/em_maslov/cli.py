"""Command line interface: ``em-maslov <command> --config FILE|GALLERY_NAME``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import app
from . import jacobi as jac
from . import specflow as sf
from .config import GALLERY, gallery_config, load_config
from .errors import EMMaslovError


def _config(arg: str):
    if arg in GALLERY:
        return gallery_config(arg)
    return load_config(arg)


def _emit(obj, as_json: bool):
    if as_json:
        print(json.dumps(app._round_floats(obj), indent=2, sort_keys=True))
    else:
        for k, v in obj.items():
            print(f"{k}: {v}")


def cmd_geodesic(args):
    cfg = _config(args.config)
    pipe = app.prepare(cfg, args.T)
    header, rows = app.trajectory_rows(pipe.traj, args.samples)
    if args.out:
        app.write_csv(args.out, header, rows)
    _emit({"system_id": cfg.name, "kappa": pipe.traj.kappa, "T": pipe.T,
           "energy_drift": pipe.traj.stats["energy_drift"], "csv": args.out}, args.json)


def cmd_conjugate(args):
    cfg = _config(args.config)
    pipe = app.prepare(cfg, args.T)
    out = {"system_id": cfg.name,
           "ordinary_conjugate_instants": [c.as_dict() for c in jac.find_conjugate_instants(pipe.ordinary)]}
    if pipe.ec is not None:
        out["ec_conjugate_instants"] = [c.as_dict() for c in jac.find_conjugate_instants(pipe.ec)]
    if args.out:
        app.write_csv(args.out, *app.det_trace_rows(pipe))
    _emit(out, args.json)


def cmd_maslov(args):
    rep = app.run_report(_config(args.config), args.T)
    _emit({k: getattr(rep, k) for k in ("system_id", "epsilon", "mu_ordinary", "mu_ec",
                                         "kashiwara_difference_direct", "kashiwara_difference_signtable")}, args.json)


def cmd_specflow(args):
    cfg = _config(args.config)
    pipe = app.prepare(cfg, args.T)
    jac.require_energy(pipe.traj.kappa, "spectral flow")
    eps = jac.select_epsilon([pipe.ordinary, pipe.ec])
    N = args.N or cfg.N
    path = sf.build_form_path(pipe.traj.foulon, pipe.traj.kappa, N, restricted=not args.ec)
    value = sf.spectral_flow(path, (eps, pipe.T))
    if args.out:
        app.write_csv(args.out, *app.eigen_trace_rows(path, eps, pipe.T))
    _emit({"system_id": cfg.name, "flavor": "energy-constrained" if args.ec else "ordinary",
           "N": N, "epsilon": eps, "spectral_flow": value}, args.json)


def cmd_report(args):
    rep = app.run_report(_config(args.config), args.T, N=args.N)
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if rep.all_verdicts else 1


def cmd_probe(args):
    cfg = _config(args.config)
    pipe = app.prepare(cfg, args.T)
    res = app.bifurcation_probe(pipe.traj, args.t0)
    _emit(res.to_dict(), True)
    return 0


def cmd_gallery(args):
    code, agg = app.run_gallery(args.out_dir, N=args.N or 128, traces=not args.no_traces,
                                log=None if args.json else print)
    if args.json:
        print(json.dumps(agg, indent=2, sort_keys=True))
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="em-maslov", description="Maslov index and spectral flow of electromagnetic geodesics")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help=f"YAML file or gallery name ({', '.join(GALLERY)})")
            sp.add_argument("--T", type=float, default=None, help="override the final time")
        sp.add_argument("--json", action="store_true", help="print JSON")
        return sp

    s = common(sub.add_parser("geodesic", help="integrate the trajectory"))
    s.add_argument("--out", help="trajectory CSV path")
    s.add_argument("--samples", type=int, default=513)
    s.set_defaults(func=cmd_geodesic)

    s = common(sub.add_parser("conjugate", help="ordinary and energy-constrained conjugate instants"))
    s.add_argument("--out", help="det trace CSV path")
    s.set_defaults(func=cmd_conjugate)

    s = common(sub.add_parser("maslov", help="both Maslov indices and the Kashiwara difference"))
    s.set_defaults(func=cmd_maslov)

    s = common(sub.add_parser("specflow", help="Galerkin spectral flow"))
    g = s.add_mutually_exclusive_group()
    g.add_argument("--ec", dest="ec", action="store_true", default=True, help="full form (default)")
    g.add_argument("--ordinary", dest="ec", action="store_false", help="form restricted to B = 0")
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--out", help="eigenvalue trace CSV path")
    s.set_defaults(func=cmd_specflow)

    s = common(sub.add_parser("report", help="full index report as JSON"))
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--out", help="write the JSON report here too")
    s.set_defaults(func=cmd_report)

    s = common(sub.add_parser("probe", help="bifurcation probe near t0"))
    s.add_argument("--t0", type=float, required=True)
    s.set_defaults(func=cmd_probe)

    s = common(sub.add_parser("gallery", help="run all built-in systems"), config=False)
    s.add_argument("--out-dir", default="gallery_out")
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--no-traces", action="store_true", help="skip CSV traces")
    s.set_defaults(func=cmd_gallery)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except EMMaslovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
