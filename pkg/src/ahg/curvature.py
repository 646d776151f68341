"""Torsion, curvature, Ricci forms and curvature bounds in a unitary frame.

Frame index layout: ``0..n-1`` are e_1..e_n and ``n..2n-1`` their conjugates.
Curvature arrays use R[a, b, c, d] = R(e_a, e_b, e_c, e_d) = <R(e_c, e_d) e_a, e_b>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .connection import Connection, LocalGeometry, canonical, levi_civita, to_frame
from .frames import UnitaryFrame, rotate, unitary_frame_at
from .manifold import ClassificationError, DomainError, ManifoldSpec, PointRef

CURVATURE_CONVENTION = "R(X,Y,Z,W) = <R(Z,W)X, Y>"


class FrameTensors:
    """Torsion, curvature and covariant derivative of torsion in one full frame."""

    def __init__(self, geom: LocalGeometry, E: np.ndarray):
        self.geom = geom
        self.E = E
        self.F = np.linalg.inv(E)
        self.n = E.shape[1] // 2
        self._cache = {}

    @classmethod
    def at(cls, M: ManifoldSpec, p: PointRef, conn: Optional[Connection] = None, frame=None):
        conn = canonical(M) if conn is None else conn
        frame = unitary_frame_at(M, p) if frame is None else frame
        E = frame.full if isinstance(frame, UnitaryFrame) else np.asarray(frame)
        return cls(LocalGeometry(M, p, conn), E)

    def with_frame(self, E: np.ndarray) -> "FrameTensors":
        return FrameTensors(self.geom, E)

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def tau(self) -> np.ndarray:
        """tau[a, b, c] = tau^a_{bc}."""
        return self._get("tau", lambda: to_frame(self.geom.torsion(), "ull", self.E, self.F))

    @property
    def R(self) -> np.ndarray:
        return self._get("R", lambda: to_frame(self.geom.curvature(), "llll", self.E, self.F))

    @property
    def dtau(self) -> np.ndarray:
        """dtau[a, b, c, d] = tau^a_{bc;d}."""
        return self._get("dtau", lambda: to_frame(self.geom.torsion_derivative(), "ulll", self.E, self.F))

    @property
    def metric(self) -> np.ndarray:
        return self.E.T @ self.geom.g @ self.E


@dataclass
class TorsionTensor:
    tau_20: np.ndarray  # [k, i, j] = tau^k_{ij}
    tau_02: np.ndarray  # [k, i, j] = tau^{k bar}_{ij}
    base: PointRef
    full: np.ndarray = field(repr=False, default=None)

    def mixed_norm(self) -> float:
        n = self.tau_20.shape[0]
        return float(np.max(np.abs(self.full[:, :n, n:])))


@dataclass
class CurvatureTensor:
    components: np.ndarray  # R[a, b, c, d]
    base: PointRef
    convention: str = CURVATURE_CONVENTION

    @property
    def n(self) -> int:
        return self.components.shape[0] // 2

    def block(self, kinds: str) -> np.ndarray:
        """Block by index kinds, e.g. 'hbhb' gives R_{i jbar k lbar} ('h' = (1,0), 'b' = (0,1))."""
        n = self.n
        sl = {"h": slice(0, n), "b": slice(n, 2 * n)}
        return self.components[tuple(sl[k] for k in kinds)]

    def antisymmetry_residual(self) -> float:
        R = self.components
        return float(max(np.max(np.abs(R + R.transpose(1, 0, 2, 3))), np.max(np.abs(R + R.transpose(0, 1, 3, 2)))))

    def type_residual(self) -> float:
        """max |R_{ij ab}| and |R_{ibar jbar ab}|: zero for a connection preserving types."""
        n = self.n
        R = self.components
        return float(max(np.max(np.abs(R[:n, :n])), np.max(np.abs(R[n:, n:]))))


def torsion_at(M: ManifoldSpec, p: PointRef, conn: Optional[Connection] = None, frame=None) -> TorsionTensor:
    T = FrameTensors.at(M, p, conn, frame)
    n = T.n
    tau = T.tau
    return TorsionTensor(tau[:n, :n, :n].copy(), tau[n:, :n, :n].copy(), p, tau)


def curvature_at(M: ManifoldSpec, p: PointRef, conn: Optional[Connection] = None, frame=None) -> CurvatureTensor:
    return CurvatureTensor(FrameTensors.at(M, p, conn, frame).R, p)


# ---------------------------------------------------------------- Ricci forms


def tau_square(T: FrameTensors) -> np.ndarray:
    """S[i, j] = sum_{l,m} tau^{ibar}_{l m} tau^{j}_{lbar mbar}."""
    n = T.n
    tau = T.tau
    return np.einsum("ilm,jlm->ij", tau[n:, :n, :n], tau[:n, n:, n:])


def ricci_from(T: FrameTensors, kind: str) -> np.ndarray:
    n = T.n
    R, tau = T.R, T.tau
    h, b = slice(0, n), slice(n, 2 * n)
    if kind == "first":
        return np.einsum("llij->ij", R[h, b, h, b])
    if kind == "second":
        return np.einsum("ijll->ij", R[h, b, h, b])
    if kind == "quasi":
        second = np.einsum("ijll->ij", R[h, b, h, b])
        # tau^j_{lbar mbar} tau^{mbar}_{l i}
        t1 = np.einsum("jlm,mli->ij", tau[h, b, b], tau[b, h, h])
        # tau^{ibar}_{l m} tau^{m}_{lbar jbar}
        t2 = np.einsum("ilm,mlj->ij", tau[b, h, h], tau[h, b, b])
        t3 = np.einsum("ilm,jlm->ij", tau[b, h, h], tau[h, b, b])
        return second - 0.5 * (t1 + t2) - 0.25 * t3
    raise DomainError(f"unknown Ricci kind {kind!r}")


def levi_civita_ricci(M: ManifoldSpec, p: PointRef, frame: Optional[UnitaryFrame] = None) -> np.ndarray:
    """Ric(e_i, conj e_j) of the Riemannian metric."""
    frame = unitary_frame_at(M, p) if frame is None else frame
    L = LocalGeometry(M, p, levi_civita(M))
    Ric = np.einsum("azay->yz", L.curvature_up())
    E = frame.full
    n = frame.n
    return (E.T @ Ric @ E)[:n, n:]


def ricci_at(M: ManifoldSpec, p: PointRef, kind: str, frame: Optional[UnitaryFrame] = None, tensors=None) -> np.ndarray:
    if kind == "levi_civita":
        return levi_civita_ricci(M, p, frame)
    if kind == "quasi" and M.kind not in ("kaehler", "quasi_kaehler", "nearly_kaehler"):
        raise ClassificationError(f"quasi Ricci curvature needs a quasi Kaehler manifold, {M.name} is {M.kind}")
    T = FrameTensors.at(M, p, canonical(M), frame) if tensors is None else tensors
    return ricci_from(T, kind)


# ---------------------------------------------------------------- sectional-type quantities


def _unit_real(M: ManifoldSpec, p: PointRef, X) -> np.ndarray:
    X = np.asarray(X, float)
    nrm = float(np.sqrt(X @ M.g(p) @ X))
    if not np.isfinite(nrm) or nrm == 0.0:
        raise DomainError("tangent vector must be nonzero")
    return X / nrm


def qh_from(T: FrameTensors) -> float:
    """R_{1 1bar 1 1bar} - sum_{i >= 2} |tau^1_{i1} + tau^{1bar}_{i1}|^2 in the frame of ``T``."""
    n = T.n
    R, tau = T.R, T.tau
    corr = sum(abs(tau[0, i, 0] + tau[n, i, 0]) ** 2 for i in range(1, n))
    return float((R[0, n, 0, n] - corr).real)


def qh_sectional(M: ManifoldSpec, p: PointRef, X, geom: Optional[LocalGeometry] = None, completion=None) -> float:
    """Quasi holomorphic sectional curvature at ``p`` along the real vector ``X``.

    ``completion``: optional unitary (n-1)x(n-1) matrix rotating e_2..e_n.
    """
    X = _unit_real(M, p, X)
    frame = unitary_frame_at(M, p, seed=X)
    E = frame.full
    if completion is not None:
        U = np.eye(M.complex_dim, dtype=complex)
        U[1:, 1:] = completion
        E = rotate(E, U)
    geom = LocalGeometry(M, p, canonical(M)) if geom is None else geom
    return qh_from(FrameTensors(geom, E))


def bisectional(R: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """R(X, Xbar, Y, Ybar) for batches of (1,0) frame components X, Y of shape (..., n)."""
    n = X.shape[-1]
    return np.einsum("ijkl,...i,...j,...k,...l->...", R[:n, n:, :n, n:], X, X.conj(), Y, Y.conj()).real


def torsion_norm2(tau: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """||tau(X, Y)||^2 in the Hermitian metric; X, Y are (1,0) frame components."""
    n = X.shape[-1]
    V = np.einsum("aij,...i,...j->...a", tau[:, :n, :n], X, Y)
    return np.sum(np.abs(V) ** 2, axis=-1)


def curvature_20(R: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """|R(Xbar, Y, Y, X)|."""
    n = X.shape[-1]
    return np.abs(np.einsum("ijkl,...i,...j,...k,...l->...", R[n:, :n, :n, :n], X.conj(), Y, Y, X))


def quasi_bisectional(
    M: ManifoldSpec,
    p: PointRef,
    X,
    Y,
    frame: Optional[UnitaryFrame] = None,
    tensors: Optional[FrameTensors] = None,
) -> float:
    """Normalized quasi holomorphic bisectional curvature for (1,0) frame components X, Y."""
    if M.kind not in ("kaehler", "nearly_kaehler"):
        raise ClassificationError(f"quasi bisectional curvature needs a nearly Kaehler manifold, {M.name} is {M.kind}")
    X = np.asarray(X, complex)
    Y = np.asarray(Y, complex)
    if np.linalg.norm(X) == 0.0 or np.linalg.norm(Y) == 0.0:
        raise DomainError("X and Y must be nonzero")
    T = FrameTensors.at(M, p, canonical(M), frame) if tensors is None else tensors
    num = bisectional(T.R, X, Y) + torsion_norm2(T.tau, X, Y)
    den = np.vdot(X, X).real * np.vdot(Y, Y).real + abs(np.vdot(Y, X)) ** 2
    return float(num / den)


# ---------------------------------------------------------------- bound estimation


@dataclass
class CurvatureBounds:
    K_lower: float
    A1: float
    A2: float
    sample_count: int
    points: int
    seed: int
    refinement: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "K_lower": self.K_lower,
            "A1": self.A1,
            "A2": self.A2,
            "sample_count": self.sample_count,
            "points": self.points,
            "seed": self.seed,
            "refinement": self.refinement,
        }


_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _unit_pairs(rng, count, n):
    Z = rng.standard_normal((count, 4 * n))
    return Z


def _pairs_from_params(Z: np.ndarray, n: int):
    X = Z[..., : n] + 1j * Z[..., n: 2 * n]
    Y = Z[..., 2 * n: 3 * n] + 1j * Z[..., 3 * n:]
    X = X / np.linalg.norm(X, axis=-1, keepdims=True)
    Y = Y / np.linalg.norm(Y, axis=-1, keepdims=True)
    return X, Y


def golden_polish(obj, Z: np.ndarray, width: float = 0.5, iters: int = 24, sweeps: int = 1) -> np.ndarray:
    """Coordinate-wise golden-section descent on every row of ``Z`` (minimizes ``obj``).

    A move is accepted only when it lowers the objective, so polished values
    never exceed the raw ones.
    """
    Z = Z.copy()
    best = obj(Z)
    for _ in range(sweeps):
        for k in range(Z.shape[1]):
            a = np.full(Z.shape[0], -width)
            b = np.full(Z.shape[0], width)
            base = Z[:, k].copy()

            def f(t):
                W = Z.copy()
                W[:, k] = base + t
                return obj(W)

            c = b - _GOLD * (b - a)
            d = a + _GOLD * (b - a)
            fc, fdv = f(c), f(d)
            for _ in range(iters):
                left = fc < fdv
                a, b = np.where(left, a, c), np.where(left, d, b)
                c_new = np.where(left, b - _GOLD * (b - a), d)
                d_new = np.where(left, c, a + _GOLD * (b - a))
                fnew = f(np.where(left, c_new, d_new))
                fc, fdv = np.where(left, fnew, fdv), np.where(left, fc, fnew)
                c, d = c_new, d_new
            t = 0.5 * (a + b)
            val = f(t)
            improve = val < best
            Z[improve, k] = base[improve] + t[improve]
            best = np.where(improve, val, best)
    return Z


def estimate_bounds(
    M: ManifoldSpec,
    region: Sequence[PointRef],
    samples: int,
    seed: int = 0,
    polish: bool = True,
    tensors: Optional[Sequence[FrameTensors]] = None,
) -> CurvatureBounds:
    """Monte Carlo estimate of (K_lower, A1, A2) over unit (1,0) pairs at each region point."""
    if len(region) == 0:
        raise DomainError("region must contain at least one point")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    n = M.complex_dim
    K, A1, A2 = np.inf, 0.0, 0.0
    worst = {}
    for idx, p in enumerate(region):
        T = FrameTensors.at(M, p, canonical(M)) if tensors is None else tensors[idx]
        R, tau = T.R, T.tau
        rng = np.random.default_rng([seed, idx])
        Z = _unit_pairs(rng, samples, n)

        def kobj(W):
            return bisectional(R, *_pairs_from_params(W, n))

        def a1obj(W):
            return -torsion_norm2(tau, *_pairs_from_params(W, n))

        def a2obj(W):
            return -curvature_20(R, *_pairs_from_params(W, n))

        vals = []
        for obj in (kobj, a1obj, a2obj):
            W = golden_polish(obj, Z) if polish else Z
            vals.append(obj(W))
        k_here = float(np.min(vals[0]))
        a1_here = float(np.sqrt(max(0.0, -np.min(vals[1]))))
        a2_here = float(max(0.0, -np.min(vals[2])))
        if k_here < K:
            K, worst["K_lower"] = k_here, p.to_json()
        if a1_here > A1:
            A1, worst["A1"] = a1_here, p.to_json()
        if a2_here > A2:
            A2, worst["A2"] = a2_here, p.to_json()
    refinement = {"method": "golden-section coordinate polish" if polish else "none", "sweeps": 1 if polish else 0, "worst_points": worst}
    return CurvatureBounds(float(K), float(A1), float(A2), samples, len(region), seed, refinement)


def estimate_quasi_bisectional_min(
    M: ManifoldSpec,
    region: Sequence[PointRef],
    samples: int,
    seed: int = 0,
    polish: bool = True,
) -> float:
    """Sampled lower bound of the normalized quasi holomorphic bisectional curvature."""
    if M.kind not in ("kaehler", "nearly_kaehler"):
        raise ClassificationError(f"quasi bisectional curvature needs a nearly Kaehler manifold, {M.name} is {M.kind}")
    if len(region) == 0:
        raise DomainError("region must contain at least one point")
    n = M.complex_dim
    best = np.inf
    for idx, p in enumerate(region):
        T = FrameTensors.at(M, p, canonical(M))
        R, tau = T.R, T.tau

        def obj(W):
            X, Y = _pairs_from_params(W, n)
            den = 1.0 + np.abs(np.einsum("...i,...i->...", X, Y.conj())) ** 2
            return (bisectional(R, X, Y) + torsion_norm2(tau, X, Y)) / den

        Z = _unit_pairs(np.random.default_rng([seed, idx]), samples, n)
        W = golden_polish(obj, Z) if polish else Z
        best = min(best, float(np.min(obj(W))))
    return best
