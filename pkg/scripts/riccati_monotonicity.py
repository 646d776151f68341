"""Random Riccati pairs S1 <= S2: report the smallest eigenvalue of X2 - X1 over the grid."""

import argparse

import numpy as np

from ahg.riccati import RiccatiProblem, hermitian_min_eig, riccati_solve


def random_pair(rng, n, scale=0.2):
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    S1 = scale * (Z + Z.conj().T)
    W = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return S1, S1 + scale * W @ W.conj().T


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problems", type=int, default=20)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--rho1", type=float, default=1.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    grid = np.linspace(0.05, args.rho1, 30)
    worst = np.inf
    for k in range(args.problems):
        rng = np.random.default_rng([args.seed, k])
        S1, S2 = random_pair(rng, args.n)
        X1, X2 = (riccati_solve(RiccatiProblem(lambda r, S=S: S, args.rho1, args.n), grid).X for S in (S1, S2))
        m = min(hermitian_min_eig(b - a) for a, b in zip(X1, X2))
        worst = min(worst, m)
        print(f"problem {k:2d}: min eig(X2 - X1) = {m:.3e}")
    print(f"worst over {args.problems} problems: {worst:.3e}")


if __name__ == "__main__":
    main()
