"""Levi-Civita and canonical connections.

Coordinate Christoffel arrays use ``G[a, b, c]`` for the coefficient of
``d_a`` in ``nabla_{d_b} d_c``: the first lower index is the direction.
Frame coefficients follow the same pattern, ``nabla_{e_b} e_c = Gamma^a_{bc} e_a``,
with frame indices ``0..n-1`` for e_i and ``n..2n-1`` for conj(e_i).

Covariant derivatives put the differentiation index *last*, so for a function
``f_{ab} = e_b(e_a f) - (nabla_{e_b} e_a) f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import fd
from .frames import FrameError, UnitaryFrame, choose_pivots_batch, frame_batch, frame_field
from .manifold import GeometryError, ManifoldSpec, PointRef

QUASI_CLASSES = ("kaehler", "quasi_kaehler", "nearly_kaehler")


class IllConditionedStructureError(GeometryError):
    pass


# ---------------------------------------------------------------- coordinate Christoffels


def levi_civita_christoffel(M: ManifoldSpec, chart: str, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    g = M.metric(chart, X)
    dg = fd.derivative(lambda Y: M.metric(chart, Y), X)  # dg[:, l, i, j] = d_l g_ij
    A = dg.transpose(0, 2, 1, 3)  # A[d, b, c] = d_b g_dc
    lower = A + A.transpose(0, 1, 3, 2) - dg
    return 0.5 * np.einsum("nad,ndbc->nabc", np.linalg.inv(g), lower)


def _quasi_kaehler_christoffel(M: ManifoldSpec, chart: str, X: np.ndarray) -> np.ndarray:
    # nabla = D - 1/2 J (D J)
    X = np.atleast_2d(X)
    G = levi_civita_christoffel(M, chart, X)
    if M.kind == "kaehler":
        # D J = 0, so the correction vanishes identically; skipping it keeps torsion exactly zero
        return G
    J = M.acs(chart, X)
    dJ = fd.derivative(lambda Y: M.acs(chart, Y), X)  # dJ[:, mu, nu, ka]
    DJ = dJ + np.einsum("nvml,nlk->nmvk", G, J) - np.einsum("nvl,nlmk->nmvk", J, G)
    return G - 0.5 * np.einsum("nvs,nmsk->nvmk", J, DJ)


@lru_cache(maxsize=None)
def _canonical_system(n: int):
    """Real linear system for the (1,0)-block Gamma^k_{aj} of the canonical connection.

    Unknown z[a, k, j] = Gamma^k_{aj} (a over all 2n frame indices); x = [Re z, Im z].
    Rows impose metric compatibility Gamma^k_{aj} + conj(Gamma^j_{a* k}) = 0 and the
    vanishing of the mixed torsion:  -Gamma^k_{j* i} = c^k_{i j*}  and
    conj(Gamma^k_{i* j}) = c^{k*}_{i j*}  (a* denotes the conjugate index).
    Returns (pinv, rank, n_rows) where rhs is assembled by ``_canonical_rhs``.
    """
    nz = 2 * n * n * n

    def idx(a, k, j):
        return (a * n + k) * n + j

    rows = []

    def add(coeffs):
        # coeffs: list of (unknown index, complex coefficient, conjugated?)
        re = np.zeros(2 * nz)
        im = np.zeros(2 * nz)
        for u, c, conj in coeffs:
            s = -1.0 if conj else 1.0
            # c * (x_re + i s x_im)
            re[u] += c.real
            re[nz + u] += -s * c.imag
            im[u] += c.imag
            im[nz + u] += s * c.real
        rows.append(re)
        rows.append(im)

    def bar(a):
        return a + n if a < n else a - n

    for a in range(2 * n):
        for k in range(n):
            for j in range(n):
                add([(idx(a, k, j), 1.0 + 0j, False), (idx(bar(a), j, k), 1.0 + 0j, True)])
    for i in range(n):
        for j in range(n):
            for k in range(n):
                add([(idx(n + j, k, i), -1.0 + 0j, False)])
                add([(idx(n + i, k, j), 1.0 + 0j, True)])
    A = np.array(rows)
    rank = np.linalg.matrix_rank(A)
    return np.linalg.pinv(A), A, rank


def _canonical_rhs(c: np.ndarray, n: int) -> np.ndarray:
    """Right-hand side matching the row layout of ``_canonical_system``; c is (N, 2n, 2n, 2n)."""
    N = c.shape[0]
    parts = [np.zeros((N, 2 * (2 * n * n * n)))]
    tors = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                tors.append(c[:, k, i, n + j])
                tors.append(c[:, n + k, i, n + j])
    T = np.stack(tors, axis=1)
    out = np.empty((N, 2 * T.shape[1]))
    out[:, 0::2] = T.real
    out[:, 1::2] = T.imag
    parts.append(out)
    return np.concatenate(parts, axis=1)


def structure_functions(E: np.ndarray, dE: np.ndarray, F: np.ndarray) -> np.ndarray:
    """c^a_{bc} with [e_b, e_c] = c^a_{bc} e_a.  dE[n, mu, nu, c] = d_mu E^nu_c."""
    br = np.einsum("nmb,nmvc->nvbc", E, dE)
    br = br - br.transpose(0, 1, 3, 2)
    return np.einsum("nav,nvbc->nabc", F, br)


def canonical_frame_coeffs_from_structure(c: np.ndarray, n: int, check: bool = True) -> np.ndarray:
    """Solve the pointwise linear system; returns full frame coefficients (N, 2n, 2n, 2n)."""
    pinv, A, rank = _canonical_system(n)
    if rank < A.shape[1]:
        raise IllConditionedStructureError(f"canonical connection system has rank {rank} < {A.shape[1]}")
    b = _canonical_rhs(c, n)
    x = b @ pinv.T
    if check:
        resid = np.max(np.abs(x @ A.T - b)) if b.size else 0.0
        scale = 1.0 + np.max(np.abs(b)) if b.size else 1.0
        if resid > 1e-9 * scale:
            raise IllConditionedStructureError(f"canonical connection system inconsistent (residual {resid:.3g})")
    N = c.shape[0]
    nz = 2 * n * n * n
    z = (x[:, :nz] + 1j * x[:, nz:]).reshape(N, 2 * n, n, n)  # z[a, k, j]
    G = np.zeros((N, 2 * n, 2 * n, 2 * n), dtype=complex)
    G[:, :n, :, :n] = z.transpose(0, 2, 1, 3)  # Gamma^k_{a j}
    zb = np.concatenate([z[:, n:], z[:, :n]], axis=1)  # z at conjugate direction index
    G[:, n:, :, n:] = zb.conj().transpose(0, 2, 1, 3)
    return G


def coords_from_frame_coeffs(E, F, dE, Gf) -> np.ndarray:
    """Coordinate Christoffels from frame coefficients; real part of the complex result."""
    t1 = -np.einsum("nmvc,nck->nvmk", dE, F)
    t2 = np.einsum("nvc,nam,nbk,ncab->nvmk", E, F, F, Gf, optimize=True)
    return (t1 + t2).real


def frame_coeffs_from_coords(E, F, dE, G) -> np.ndarray:
    """Gamma^a_{bc} = F^a_nu (E^mu_b d_mu E^nu_c + G^nu_{mu ka} E^mu_b E^ka_c)."""
    t1 = np.einsum("nmb,nmvc->nvbc", E, dE)
    t2 = np.einsum("nvmk,nmb,nkc->nvbc", G, E, E, optimize=True)
    return np.einsum("nav,nvbc->nabc", F, t1 + t2)


def _local_frames(M, chart, X):
    """Frames at X with per-point pivots, plus their derivatives using the same pivots."""
    X = np.atleast_2d(X)
    N = X.shape[0]
    g, J = M.metric(chart, X), M.acs(chart, X)
    piv = choose_pivots_batch(g, J, M.complex_dim)
    E = frame_batch(g, J, piv)

    def Ef(Y):
        reps = Y.shape[0] // N
        return frame_batch(M.metric(chart, Y), M.acs(chart, Y), np.repeat(piv, reps, axis=0))

    dE = fd.derivative(Ef, X)
    return E, np.linalg.inv(E), dE


def _general_canonical_christoffel(M: ManifoldSpec, chart: str, X: np.ndarray) -> np.ndarray:
    E, F, dE = _local_frames(M, chart, X)
    c = structure_functions(E, dE, F)
    Gf = canonical_frame_coeffs_from_structure(c, M.complex_dim)
    return coords_from_frame_coeffs(E, F, dE, Gf)


# ---------------------------------------------------------------- connection objects


@dataclass(frozen=True)
class Connection:
    """A connection on ``M`` evaluated through coordinate Christoffel arrays."""

    M: ManifoldSpec
    kind: str = "canonical"  # levi_civita | canonical
    path: str = "auto"  # a | b | auto (canonical only)

    def __post_init__(self):
        if self.kind not in ("levi_civita", "canonical"):
            raise ValueError(f"unknown connection kind {self.kind!r}")
        if self.path not in ("a", "b", "auto"):
            raise ValueError(f"unknown canonical path {self.path!r}")

    @property
    def resolved_path(self) -> str:
        if self.kind == "levi_civita":
            return "-"
        if self.path == "auto":
            return "a" if self.M.kind in QUASI_CLASSES else "b"
        return self.path

    def christoffel(self, chart: str, X: np.ndarray) -> np.ndarray:
        if self.kind == "levi_civita":
            return levi_civita_christoffel(self.M, chart, X)
        if self.resolved_path == "a":
            return _quasi_kaehler_christoffel(self.M, chart, X)
        return _general_canonical_christoffel(self.M, chart, X)

    def christoffel_derivative(self, chart: str, X: np.ndarray) -> np.ndarray:
        """dG[:, l, a, b, c] = d_l G^a_{bc}."""
        return fd.derivative(lambda Y: self.christoffel(chart, Y), X)


def levi_civita(M: ManifoldSpec) -> Connection:
    return Connection(M, "levi_civita")


def canonical(M: ManifoldSpec, path: str = "auto") -> Connection:
    return Connection(M, "canonical", path)


@dataclass
class ConnectionCoeffs:
    gamma: np.ndarray  # (2n, 2n, 2n): gamma[a, b, c] = Gamma^a_{bc}
    kind: str
    structure_fns: np.ndarray
    frame: UnitaryFrame
    christoffel: np.ndarray  # coordinate array at the base point
    metric: np.ndarray  # g at the base point

    def conjugation_residual(self) -> float:
        n = self.frame.n
        perm = np.r_[n:2 * n, 0:n]
        G = self.gamma
        return float(np.max(np.abs(G[np.ix_(perm, perm, perm)] - G.conj())))

    def type_residual(self) -> float:
        """max |Gamma^{k*}_{a j}| + |Gamma^{k}_{a j*}|: zero when (1,0)-fields stay (1,0)."""
        n = self.frame.n
        G = self.gamma
        return float(max(np.max(np.abs(G[n:, :, :n])), np.max(np.abs(G[:n, :, n:]))))

    def metric_residual(self) -> float:
        # frame metric is constant: Gamma_{c a b} + Gamma_{b a c} = 0 after lowering
        E = self.frame.full
        gC = E.T @ self.metric @ E
        low = np.einsum("xa,abc->xbc", gC, self.gamma)  # low[x, b, c] = <nabla_b e_c, e_x>
        return float(np.max(np.abs(low + low.transpose(2, 1, 0))))


def _coeffs(M: ManifoldSpec, p: PointRef, frame: UnitaryFrame, conn: Connection) -> ConnectionCoeffs:
    M.validate(p)
    E = frame.full[None]
    F = np.linalg.inv(E)
    dE = fd.derivative(frame_field(M, frame), p.coords[None])
    G = conn.christoffel(p.chart_id, p.coords[None])
    gamma = frame_coeffs_from_coords(E, F, dE, G)[0]
    c = structure_functions(E, dE, F)[0]
    return ConnectionCoeffs(gamma, conn.kind, c, frame, G[0], M.g(p))


def levi_civita_coeffs(M: ManifoldSpec, p: PointRef, frame: UnitaryFrame) -> ConnectionCoeffs:
    return _coeffs(M, p, frame, levi_civita(M))


def canonical_coeffs(M: ManifoldSpec, p: PointRef, frame: UnitaryFrame, path: str = "auto") -> ConnectionCoeffs:
    return _coeffs(M, p, frame, canonical(M, path))


def koszul_frame_coeffs(frame_metric: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Levi-Civita frame coefficients for a frame with constant metric matrix (Koszul formula).

    2 <nabla_b e_c, e_a> = <[e_b, e_c], e_a> - <[e_c, e_a], e_b> + <[e_a, e_b], e_c>.
    """
    cl = np.einsum("xa,abc->xbc", frame_metric, c)  # cl[x, b, c] = <[e_b, e_c], e_x>
    # low[a, b, c] = cl[a,b,c] - cl[b,c,a] + cl[c,a,b]
    low = 0.5 * (cl - cl.transpose(2, 0, 1) + cl.transpose(1, 2, 0))
    return np.einsum("ax,xbc->abc", np.linalg.inv(frame_metric), low)


# ---------------------------------------------------------------- covariant derivatives in coordinates


def covariant_derivative_coords(T: np.ndarray, dT: np.ndarray, G: np.ndarray, valence: str) -> np.ndarray:
    """Covariant derivative of a coordinate tensor at one point; new index appended last.

    ``valence`` has one letter per index: 'u' (upper) or 'l' (lower).  ``dT[l, ...]``
    holds the partial derivatives of the components.
    """
    if len(valence) != T.ndim or any(v not in "ul" for v in valence):
        raise TypeError(f"valence {valence!r} does not match a tensor of rank {T.ndim}")
    out = np.moveaxis(dT, 0, -1).astype(np.result_type(T, dT, G))
    for pos, v in enumerate(valence):
        Tm = np.moveaxis(T, pos, 0)  # index being corrected first
        if v == "u":
            corr = np.einsum("alk,k...->a...l", G, Tm)  # G^a_{l k} T^k
        else:
            corr = -np.einsum("klb,k...->b...l", G, Tm)  # -G^k_{l b} T_k
        out = out + np.moveaxis(corr, 0, pos)
    return out


def to_frame(T: np.ndarray, valence: str, E: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Contract coordinate tensor components with a full frame (upper indices use F = E^-1)."""
    out = T
    for pos, v in enumerate(valence):
        M = F if v == "u" else E.T
        out = np.moveaxis(np.tensordot(M, np.moveaxis(out, pos, 0), axes=([1], [0])), 0, pos)
    return out


@dataclass
class LocalGeometry:
    """Coordinate data of one connection at one point, computed once and reused."""

    M: ManifoldSpec
    p: PointRef
    conn: Connection
    g: np.ndarray = field(init=False)
    J: np.ndarray = field(init=False)
    G: np.ndarray = field(init=False)
    dG: np.ndarray = field(init=False)

    def __post_init__(self):
        self.M.validate(self.p)
        X = self.p.coords[None]
        self.g = self.M.g(self.p)
        self.J = self.M.J(self.p)
        self.G = self.conn.christoffel(self.p.chart_id, X)[0]
        self.dG = self.conn.christoffel_derivative(self.p.chart_id, X)[0]

    def torsion(self) -> np.ndarray:
        """T^a_{bc} = G^a_{bc} - G^a_{cb}."""
        return self.G - self.G.transpose(0, 2, 1)

    def torsion_derivative(self) -> np.ndarray:
        """Covariant derivative (nabla T)^a_{bc;d}."""
        dT = self.dG - self.dG.transpose(0, 1, 3, 2)
        return covariant_derivative_coords(self.torsion(), dT, self.G, "ull")

    def curvature_up(self) -> np.ndarray:
        """R^a_{bcd} with R(d_c, d_d) d_b = R^a_{bcd} d_a."""
        dG, G = self.dG, self.G
        R = dG.transpose(1, 3, 0, 2) - dG.transpose(1, 3, 2, 0)  # [a, b, c, d]: d_c G^a_{db} - d_d G^a_{cb}
        R = R + np.einsum("acm,mdb->abcd", G, G) - np.einsum("adm,mcb->abcd", G, G)
        return R

    def curvature(self) -> np.ndarray:
        """Fully lowered R(X, Y, Z, W) = <R(Z, W) X, Y> as coordinate array [x, y, z, w]."""
        return np.einsum("ya,axzw->xyzw", self.g, self.curvature_up())

    def nabla_g(self) -> np.ndarray:
        dg = fd.derivative(lambda Y: self.M.metric(self.p.chart_id, Y), self.p.coords[None])[0]
        return covariant_derivative_coords(self.g, dg, self.G, "ll")

    def nabla_J(self) -> np.ndarray:
        dJ = fd.derivative(lambda Y: self.M.acs(self.p.chart_id, Y), self.p.coords[None])[0]
        return covariant_derivative_coords(self.J, dJ, self.G, "ul")


def function_jets(f: Callable, p: PointRef, order: int = 2) -> list:
    """[f, df, d2f, (d3f)] at p from a batched chart function."""
    x = p.coords[None]
    out = [np.asarray(f(x))[0], fd.derivative(f, x)[0]]
    if order >= 2:
        out.append(fd.second_derivative(f, x)[0])
    if order >= 3:
        m = x.shape[1]
        trip = [(a, b, c) for a in range(m) for b in range(a, m) for c in range(b, m)]
        vals = fd.partials(f, x, trip)[0]
        d3 = np.empty((m, m, m) + vals.shape[1:], dtype=vals.dtype)
        for v, (a, b, c) in zip(vals, trip):
            for perm in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
                d3[perm] = v
        out.append(d3)
    return out


def hessian_coords(df: np.ndarray, d2f: np.ndarray, G: np.ndarray) -> np.ndarray:
    """H[mu, nu] = d_nu d_mu f - G^k_{nu mu} d_k f (derivative index last)."""
    return d2f - np.einsum("knm,k->mn", G, df)


def third_coords(df, d2f, d3f, G, dG) -> np.ndarray:
    """(nabla^3 f)[mu, nu, l]: covariant derivative along l of the Hessian."""
    H = hessian_coords(df, d2f, G)
    dH = d3f.transpose(2, 0, 1) - np.einsum("lknm,k->lmn", dG, df) - np.einsum("knm,lk->lmn", G, d2f)
    return covariant_derivative_coords(H, dH, G, "ll")


def covariant_hessian(
    M: ManifoldSpec,
    p: PointRef,
    f: Callable,
    conn: Connection,
    frame: UnitaryFrame,
) -> np.ndarray:
    """Frame matrix f_{ab}, a, b over (e_1..e_n, conj e_1..conj e_n)."""
    M.validate(p)
    _, df, d2f = function_jets(f, p, 2)
    G = conn.christoffel(p.chart_id, p.coords[None])[0]
    E = frame.full
    return E.T @ hessian_coords(df, d2f, G) @ E


def covariant_derivative_tensor(
    M: ManifoldSpec,
    p: PointRef,
    T: Callable,
    valence: str,
    conn: Connection,
    frame: Optional[UnitaryFrame] = None,
) -> np.ndarray:
    """Covariant derivative of a coordinate tensor field ``T(X) -> (N, m, ..., m)``.

    Returns frame components (if ``frame`` is given) or coordinate components,
    with the differentiation index last.
    """
    M.validate(p)
    x = p.coords[None]
    T0 = np.asarray(T(x))[0]
    if T0.ndim != len(valence):
        raise TypeError(f"valence {valence!r} does not match a tensor of rank {T0.ndim}")
    dT = fd.derivative(T, x)[0]
    G = conn.christoffel(p.chart_id, x)[0]
    out = covariant_derivative_coords(T0, dT, G, valence)
    if frame is None:
        return out
    E = frame.full
    return to_frame(out, valence + "l", E, np.linalg.inv(E))


__all__ = [
    "Connection",
    "ConnectionCoeffs",
    "FrameError",
    "IllConditionedStructureError",
    "LocalGeometry",
    "canonical",
    "canonical_coeffs",
    "covariant_derivative_tensor",
    "covariant_hessian",
    "levi_civita",
    "levi_civita_coeffs",
]
