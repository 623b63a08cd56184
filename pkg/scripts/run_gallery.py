"""Run all gallery systems and write reports and CSV traces to an output directory."""
import argparse
import sys

from em_maslov.app import run_gallery

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="gallery_out")
    ap.add_argument("--N", type=int, default=128)
    args = ap.parse_args()
    code, _ = run_gallery(args.out_dir, N=args.N)
    sys.exit(code)
