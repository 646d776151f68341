"""Error of finite-difference Ricci curvature on S^6 as the step is halved."""

import numpy as np

from ahg import fd
from ahg.curvature import ricci_at
from ahg.models import build_model, default_origin


def main():
    M = build_model("s6_nk")
    p = default_origin(M)
    prev = None
    for h in (2e-2, 1e-2, 5e-3, 2.5e-3, 1e-3):
        fd.STEP = h
        err = float(np.max(np.abs(ricci_at(M, p, "levi_civita") - 5 * np.eye(3))))
        ratio = "" if prev is None else f"  ratio {prev / max(err, 1e-300):.1f}"
        print(f"h={h:.1e}  error {err:.3e}{ratio}")
        prev = err


if __name__ == "__main__":
    main()
