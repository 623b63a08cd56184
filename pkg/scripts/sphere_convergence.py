"""Galerkin convergence on the round sphere: spectral flow and the eigenvalue nearest zero versus N."""
import numpy as np

from em_maslov import app
from em_maslov import jacobi as jac
from em_maslov import specflow as sf
from em_maslov.config import gallery_config


def main():
    p = app.prepare(gallery_config("round-sphere"))
    eps = jac.select_epsilon([p.ordinary, p.ec])
    print(f"{'N':>5} {'sf':>4} {'sf_ec':>6} {'lambda_min(T)':>16} {'lambda_min(pi)':>16}")
    for N in (16, 32, 64, 128, 256):
        sub = sf.build_form_path(p.traj.foulon, p.traj.kappa, N, restricted=True)
        full = sub.with_restriction(False)
        at_T = np.abs(sub.eigvals(p.T)).min()
        at_pi = np.abs(sub.eigvals(np.pi)).min()
        print(f"{N:5d} {sf.spectral_flow(sub, (eps, p.T)):4d} {sf.spectral_flow(full, (eps, p.T)):6d} "
              f"{at_T:16.10f} {at_pi:16.3e}")


if __name__ == "__main__":
    main()
