"""Matrix Riccati equation dX/drho = -X^2 - A X - X A^* + S."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

BLOWUP_NORM = 1e8
SINGULAR_START = 1e-4


@dataclass
class RiccatiProblem:
    S: Callable[[float], np.ndarray]
    rho1: float
    n: int
    A: Optional[Callable[[float], np.ndarray]] = None
    rho0: float = SINGULAR_START
    init: Union[str, np.ndarray] = "singular"

    def __post_init__(self):
        if isinstance(self.init, str) and self.init != "singular":
            raise ValueError("init must be 'singular' or an explicit matrix")
        if not isinstance(self.init, str) and self.rho0 <= 0:
            raise ValueError("explicit starts need rho0 > 0")
        if self.rho1 <= self.rho0:
            raise ValueError("rho1 must exceed rho0")

    def a(self, r: float) -> np.ndarray:
        return np.zeros((self.n, self.n)) if self.A is None else np.asarray(self.A(r))

    def initial(self) -> np.ndarray:
        if not isinstance(self.init, str):
            return np.array(self.init, dtype=complex)
        r0 = self.rho0
        A0 = self.a(0.0)
        # X = I/r + C + r S/3 with C = -(A + A^*)/2 cancelling the 1/r term of A X + X A^*
        return np.eye(self.n) / r0 - 0.5 * (A0 + A0.conj().T) + (r0 / 3.0) * np.asarray(self.S(0.0))


@dataclass
class RiccatiSolution:
    grid: np.ndarray
    X: np.ndarray  # (len(grid), n, n); NaN after a blowup
    blowup_at: Optional[float] = None
    steps: int = 0
    meta: dict = field(default_factory=dict)

    def at(self, rho: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.grid - rho)))
        if abs(self.grid[i] - rho) > 1e-12 * max(1.0, rho):
            raise KeyError(f"rho={rho} is not on the solution grid")
        return self.X[i]


def _rhs(prob: RiccatiProblem, r: float, X: np.ndarray) -> np.ndarray:
    A = prob.a(r)
    return -X @ X - A @ X - X @ A.conj().T + np.asarray(prob.S(r))


def riccati_solve(
    prob: RiccatiProblem,
    grid,
    h_max: float = 1e-2,
    c: float = 0.005,
) -> RiccatiSolution:
    """RK4 with step min(h_max, c*rho, c/|X|); grid points are hit exactly."""
    grid = np.asarray(sorted(float(g) for g in np.atleast_1d(grid)))
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid[0] < prob.rho0 or grid[-1] > prob.rho1 + 1e-12:
        raise ValueError(f"grid must lie in [{prob.rho0}, {prob.rho1}]")
    X = prob.initial()
    r = prob.rho0
    out = np.full((grid.size,) + X.shape, np.nan, dtype=complex)
    steps = 0
    for gi, target in enumerate(grid):
        while r < target - 1e-15:
            nrm = max(np.linalg.norm(X, 2), 1e-300)
            h = min(h_max, c * r, c / nrm, target - r)
            k1 = _rhs(prob, r, X)
            k2 = _rhs(prob, r + h / 2, X + h / 2 * k1)
            k3 = _rhs(prob, r + h / 2, X + h / 2 * k2)
            k4 = _rhs(prob, r + h, X + h * k3)
            X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            r = r + h
            steps += 1
            if not np.all(np.isfinite(X)) or np.linalg.norm(X, 2) > BLOWUP_NORM:
                return RiccatiSolution(grid, out, blowup_at=r, steps=steps)
        r = target
        out[gi] = X
    return RiccatiSolution(grid, out, None, steps)


def scalar_oracle(K: float, rho):
    """Solution of y' + y^2 = -K with y ~ 1/rho at 0."""
    rho = np.asarray(rho, float)
    if K > 0:
        s = np.sqrt(K)
        return s / np.tan(s * rho)
    if K < 0:
        s = np.sqrt(-K)
        return s / np.tanh(s * rho)
    return 1.0 / rho


def hermitian_min_eig(M: np.ndarray) -> float:
    H = 0.5 * (M + M.conj().T)
    return float(np.linalg.eigvalsh(H)[0])
