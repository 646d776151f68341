"""Unitary (1,0)-frames built by Gram-Schmidt on projected coordinate vectors.

Conventions: tangent vectors are coordinate column vectors; the complex
bilinear extension of g is ``g_C(u, v) = u^T g v`` and the Hermitian pairing is
``<u, conj(v)> = u^T g conj(v)``.  A frame is stored as an ``(m, 2n)`` complex
matrix whose columns are ``e_1..e_n, conj(e_1)..conj(e_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .manifold import GeometryError, ManifoldSpec, PointRef

_DEGENERATE = 1e-8


class FrameError(GeometryError):
    pass


@dataclass(frozen=True)
class UnitaryFrame:
    vectors: np.ndarray  # (m, n) complex, columns e_1..e_n
    base: PointRef
    pivots: tuple
    seed: Optional[tuple] = None

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.vectors, self.vectors.conj()], axis=1)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]


def _herm(u, v, g):
    # <u, conj(v)> batched over the leading axis
    return np.einsum("...i,...ij,...j->...", u, g, v.conj())


def _projector(J: np.ndarray) -> np.ndarray:
    m = J.shape[-1]
    return 0.5 * (np.eye(m) - 1j * J)


def _seed_vector(seed: np.ndarray, g: np.ndarray, J: np.ndarray) -> np.ndarray:
    s = np.broadcast_to(seed, g.shape[:-1]).astype(float)
    norm = np.sqrt(np.einsum("...i,...ij,...j->...", s, g, s))
    Js = np.einsum("...ij,...j->...i", J, s)
    return (s - 1j * Js) / (np.sqrt(2.0) * norm[..., None])


def choose_pivots_batch(g: np.ndarray, J: np.ndarray, n: int, seed: Optional[np.ndarray] = None) -> np.ndarray:
    """Greedy pivot order per point: largest residual first, ties to the lowest index.

    ``g`` and ``J`` have shape (N, m, m); returns an int array of shape (N, k).
    """
    N, m, _ = g.shape
    P = _projector(J)
    cands = np.swapaxes(P, 1, 2)  # (N, m candidates, m)
    basis = []
    if seed is not None:
        basis.append(_seed_vector(np.asarray(seed, float), g, J))
    used = np.zeros((N, m), dtype=bool)
    rows = np.arange(N)
    order = []
    while len(basis) < n:
        R = cands.copy()
        for e in basis:
            R = R - np.einsum("nci,nij,nj->nc", R, g, e.conj())[..., None] * e[:, None, :]
        norms = np.sqrt(np.maximum(np.einsum("nci,nij,ncj->nc", R, g, R.conj()).real, 0.0))
        norms = np.where(used, -1.0, norms)
        # round so that roundoff-level differences do not decide ties
        best = np.argmax(np.round(norms, 12), axis=1)
        bn = norms[rows, best]
        if np.any(bn < _DEGENERATE):
            raise FrameError("projected coordinate vectors are rank deficient")
        basis.append(R[rows, best] / bn[:, None])
        used[rows, best] = True
        order.append(best)
    return np.stack(order, axis=1) if order else np.zeros((N, 0), dtype=int)


def choose_pivots(g: np.ndarray, J: np.ndarray, n: int, seed: Optional[np.ndarray] = None) -> tuple:
    """Pivot order at a single point."""
    return tuple(int(k) for k in choose_pivots_batch(g[None], J[None], n, seed)[0])


def frame_batch(
    g: np.ndarray,
    J: np.ndarray,
    pivots: np.ndarray,
    seed: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Vectorised Gram-Schmidt. ``pivots`` has shape (N, k) or (k,); returns (N, m, 2n).

    Raises FrameError if any point is numerically degenerate.
    """
    N, m, _ = g.shape
    n = m // 2
    piv = np.broadcast_to(np.asarray(pivots, dtype=int), (N, np.shape(pivots)[-1]))
    P = _projector(J)
    basis = []
    if seed is not None:
        basis.append(_seed_vector(np.asarray(seed, float), g, J))
    rows = np.arange(N)
    for k in range(n - len(basis)):
        v = P[rows, :, piv[:, k]]
        for e in basis:
            v = v - _herm(v, e, g)[:, None] * e
        # second pass keeps unitarity at roundoff level
        for e in basis:
            v = v - _herm(v, e, g)[:, None] * e
        nv = np.sqrt(np.maximum(_herm(v, v, g).real, 0.0))
        if np.any(nv < _DEGENERATE):
            raise FrameError("frame construction degenerate at a stencil point")
        basis.append(v / nv[:, None])
    E = np.stack(basis, axis=-1)
    return np.concatenate([E, E.conj()], axis=-1)


def unitary_frame_at(M: ManifoldSpec, p: PointRef, seed=None) -> UnitaryFrame:
    """Deterministic unitary (1,0)-frame at ``p``.

    With ``seed`` (a nonzero real tangent vector), ``e_1 = (seed - iJ seed)/(sqrt 2 |seed|)``.
    """
    g, J = M.g(p), M.J(p)
    if seed is not None:
        seed = np.asarray(seed, dtype=float)
        if seed.shape != (M.real_dim,) or not np.all(np.isfinite(seed)) or np.linalg.norm(seed) == 0.0:
            raise FrameError(f"{M.name}: seed must be a nonzero real tangent vector")
    try:
        pivots = choose_pivots(g, J, M.complex_dim, seed)
        E = frame_batch(g[None], J[None], np.asarray(pivots), seed)[0]
    except FrameError as exc:
        raise FrameError(f"{M.name}: {exc} (chart {p.chart_id}, point {p.coords.tolist()})") from None
    return UnitaryFrame(E[:, : M.complex_dim], p, pivots, None if seed is None else tuple(seed))


def frame_field(M: ManifoldSpec, frame: UnitaryFrame):
    """The local extension of ``frame``: same pivots and constant seed components."""
    chart = frame.base.chart_id
    seed = None if frame.seed is None else np.asarray(frame.seed)
    piv = np.asarray(frame.pivots)

    def E(X):
        return frame_batch(M.metric(chart, X), M.acs(chart, X), piv, seed)

    return E


def unitarity_residual(M: ManifoldSpec, frame: UnitaryFrame) -> float:
    """max |<e_a, conj(e_b)> - delta_ab| over the full frame, plus the J-eigen residual."""
    g, J = M.g(frame.base), M.J(frame.base)
    E = frame.full
    G = E.T @ g @ E.conj()
    res = np.max(np.abs(G - np.eye(E.shape[1])))
    Je = J @ frame.vectors - 1j * frame.vectors
    return float(max(res, np.max(np.abs(Je))))


def rotate(frame_full: np.ndarray, U: np.ndarray) -> np.ndarray:
    """New full frame with e'_i = sum_k U[k, i] e_k for a unitary n x n matrix ``U``."""
    n = U.shape[0]
    E = frame_full[:, :n] @ U
    return np.concatenate([E, E.conj()], axis=1)


def change_matrix(E_old: np.ndarray, E_new: np.ndarray) -> np.ndarray:
    """Matrix T with E_new = E_old @ T (both full frames at the same point)."""
    return np.linalg.solve(E_old, E_new)
