"""Landau problem over (0, 3 pi]: conjugate instants of both flavors, det traces and the probe at pi."""
import argparse
import json
from pathlib import Path

import numpy as np

from em_maslov import app
from em_maslov import jacobi as jac
from em_maslov.config import gallery_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="landau_out")
    args = ap.parse_args()
    out = Path(args.out_dir)
    p = app.prepare(gallery_config("landau"), 3 * np.pi)
    for tp in (p.ordinary, p.ec):
        for ci in jac.find_conjugate_instants(tp):
            print(f"{tp.flavor:20s} t/pi = {ci.time / np.pi:.10f}  multiplicity {ci.multiplicity}  signature {ci.signature}")
    app.write_csv(out / "landau_det.csv", *app.det_trace_rows(p, samples=1025))
    probe = app.bifurcation_probe(app.prepare(gallery_config("landau"), 2 * np.pi - 0.1).traj, np.pi)
    (out / "landau_probe.json").write_text(json.dumps(probe.to_dict(), indent=2) + "\n")
    print(f"probe: {probe.status}, {len(probe.branches)} branches; traces in {out}/")


if __name__ == "__main__":
    main()
