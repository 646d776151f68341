"""Print radial Hessian eigenvalues against the comparison profiles along sample geodesics."""

import argparse

import numpy as np

from ahg.comparison import check_hessian_comparison_general, check_hessian_comparison_nk
from ahg.models import MODEL_NAMES, build_model, default_origin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="cpn_fs", choices=MODEL_NAMES)
    ap.add_argument("--n", type=int, default=None)
    ap.add_argument("--K", type=float, default=None)
    ap.add_argument("--directions", type=int, default=4)
    ap.add_argument("--rho", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.75, 1.0, 1.25])
    args = ap.parse_args()
    M = build_model(args.model, args.n, args.K)
    o = default_origin(M)
    if args.model == "hopf":
        rep = check_hessian_comparison_general(M, o, directions=args.directions, rho_grid=tuple(args.rho))
    else:
        rep = check_hessian_comparison_nk(M, o, directions=args.directions, rho_grid=tuple(args.rho))
    print(f"{rep.check} on {rep.model}: passed={rep.passed} min margin={rep.min_margin:.3e}")
    keys = sorted({k for r in rep.rows for k in r if isinstance(r[k], (float, int, np.floating))})
    print("  ".join(f"{k:>14}" for k in keys))
    for r in rep.rows:
        print("  ".join(f"{r.get(k, float('nan')):>14.6g}" for k in keys))


if __name__ == "__main__":
    main()
