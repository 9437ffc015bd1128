"""FEM vs spectral Galerkin in 1D: L2 difference at t = 0.25 under (h, k) refinement.

Used to pick the tolerance frozen in the cross-validation test.

    python scripts/convergence_study.py [--levels 5]
"""

import argparse
import time

from nhllg.mesh import generate_structured
from nhllg.spectral import SpectralBasis, compare_to_fem, integrate, norm_drift, smooth_initial_1d
from nhllg.stepper import SolverConfig, run
from nhllg.torque import SttParams, make_stt, make_zero

T_CMP = 0.25


def study(model, levels, n0=32, k0=0.01, K=32, Q=512, substeps=50):
    ref_cfg = SolverConfig(k=0.005, J=int(round(T_CMP / 0.005)))
    traj = integrate(smooth_initial_1d, SpectralBasis(1.0, K, Q), model, ref_cfg, substeps=substeps)
    print(f"  spectral K={K}: max norm drift {norm_drift(traj).max():.2e}")
    rows = []
    for lvl in range(levels):
        n, k = n0 * 2**lvl, k0 / 2**lvl
        J = int(round(T_CMP / k))
        mesh = generate_structured([(0.0, 1.0)], [n])
        t0 = time.time()
        res = run(mesh, SolverConfig(k=k, J=J, snapshot_interval=J), model, smooth_initial_1d)
        err = compare_to_fem(traj, res.snapshots, [T_CMP], mesh)
        rows.append((n, k, err))
        print(f"  N={n:5d} k={k:.2e}  L2 diff {err:.3e}  ({time.time() - t0:.1f}s)")
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()
    for name, model in [("zero torque", make_zero(1)), ("STT j=(1)", make_stt(SttParams(j=(1.0,))))]:
        print(name)
        study(model, args.levels)
