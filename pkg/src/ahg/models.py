"""Catalog of model manifolds used as ground truth.

Coordinates of C^n are interleaved as (x_1, y_1, ..., x_n, y_n) with z = x + iy
and the standard J sends d/dx to d/dy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .manifold import (
    Chart,
    ChartTransitionError,
    CutLocusError,
    DomainError,
    ManifoldSpec,
    PointRef,
)

MODEL_NAMES = ("flat_cn", "cpn_fs", "chn_ball", "s6_nk", "hopf")

# Imaginary octonion units e1..e7: e_i e_j = e_k for each oriented triple below.
FANO_TRIPLES = ((1, 2, 3), (1, 4, 5), (1, 7, 6), (2, 4, 6), (2, 5, 7), (3, 4, 7), (3, 6, 5))


def _cross_tensor() -> np.ndarray:
    eps = np.zeros((7, 7, 7))
    for i, j, k in FANO_TRIPLES:
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            eps[a - 1, b - 1, c - 1] = 1.0
            eps[b - 1, a - 1, c - 1] = -1.0
    return eps


CROSS = _cross_tensor()


def cross7(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Seven-dimensional cross product (imaginary part of the octonion product)."""
    return np.einsum("ijk,...i,...j->...k", CROSS, u, v)


@dataclass(frozen=True)
class ModelId:
    name: str
    n: Optional[int] = None
    K: Optional[float] = None

    def resolved(self) -> "ModelId":
        n, K = self.n, self.K
        if self.name == "s6_nk":
            if n not in (None, 3):
                raise DomainError("s6_nk has complex dimension 3")
            n = 3
        elif self.name == "hopf":
            if n not in (None, 2):
                raise DomainError("hopf has complex dimension 2")
            n = 2
        elif n is None:
            n = 1 if self.name != "flat_cn" else 2
        if self.name == "cpn_fs":
            K = 1.0 if K is None else K
            if not K > 0:
                raise DomainError("cpn_fs needs K > 0")
        elif self.name == "chn_ball":
            K = -1.0 if K is None else K
            if not K < 0:
                raise DomainError("chn_ball needs K < 0")
        if n < 1:
            raise DomainError("n must be >= 1")
        return ModelId(self.name, n, K)


def standard_J(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    for a in range(n):
        J[2 * a + 1, 2 * a] = 1.0
        J[2 * a, 2 * a + 1] = -1.0
    return J


def to_complex(X: np.ndarray) -> np.ndarray:
    return X[..., 0::2] + 1j * X[..., 1::2]


def hermitian_to_real(H: np.ndarray) -> np.ndarray:
    """Real matrix of g(X, Y) = Re(xi^T H conj(eta)) in interleaved coordinates."""
    shape = H.shape[:-2]
    n = H.shape[-1]
    G = np.empty(shape + (2 * n, 2 * n))
    G[..., 0::2, 0::2] = H.real
    G[..., 1::2, 1::2] = H.real
    G[..., 0::2, 1::2] = H.imag
    G[..., 1::2, 0::2] = -H.imag
    return G


def _const(X, A):
    return np.broadcast_to(A, (X.shape[0],) + A.shape).copy()


def _sample_shell(count, seed, dim, r_lo, r_hi):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, size=count)
    return d * r[:, None]


# ---------------------------------------------------------------- flat C^n


def _flat(n: int) -> ManifoldSpec:
    m = 2 * n
    J0 = standard_J(n)

    def dist_field(o: PointRef, chart: str):
        oc = np.array(o.coords)
        return lambda X: np.linalg.norm(X - oc, axis=-1)

    def distance(o, p):
        return float(np.linalg.norm(p.coords - o.coords))

    def geodesic(o, v, rho):
        return PointRef(o.chart_id, o.coords + rho * np.asarray(v))

    return ManifoldSpec(
        name="flat_cn",
        complex_dim=n,
        charts=(Chart("C", (-6.0,) * m, (6.0,) * m),),
        metric=lambda c, X: _const(X, np.eye(m)),
        acs=lambda c, X: _const(X, J0),
        kind="kaehler",
        params={"n": n, "K": 0.0, "sample": (0.0, 2.0)},
        distance=distance,
        distance_field=dist_field,
        geodesic=geodesic,
    )


# ---------------------------------------------------------------- CP^n and CH^n


def _space_form(n: int, K: float) -> ManifoldSpec:
    m = 2 * n
    sgn = 1.0 if K > 0 else -1.0
    c = 2.0 / abs(K)
    J0 = standard_J(n)

    def metric(chart, X):
        z = to_complex(X)
        s = 1.0 + sgn * np.sum(np.abs(z) ** 2, axis=-1)
        H = np.eye(n) / s[:, None, None] - sgn * np.einsum("ka,kb->kab", z.conj(), z) / (s**2)[:, None, None]
        return c * hermitian_to_real(H)

    def _reduced(z, w):
        # distance for the unscaled potential; stable near the diagonal
        inner = np.sum(z * np.conj(w), axis=-1)
        zz = np.sum(np.abs(z) ** 2, axis=-1)
        ww = np.sum(np.abs(w) ** 2, axis=-1)
        diff = np.sum(np.abs(z - w) ** 2, axis=-1)
        if sgn > 0:
            num = diff + zz * ww - np.abs(inner) ** 2
            return np.arctan2(np.sqrt(np.maximum(num, 0.0)), np.abs(1.0 + inner))
        num = diff - zz * ww + np.abs(inner) ** 2
        return np.arctanh(np.sqrt(np.maximum(num, 0.0)) / np.abs(1.0 - inner))

    scale = np.sqrt(c)

    def dist_field(o: PointRef, chart: str):
        w = to_complex(np.array(o.coords))
        return lambda X: scale * _reduced(to_complex(X), w)

    def distance(o, p):
        d = float(scale * _reduced(to_complex(p.coords), to_complex(o.coords)))
        if sgn > 0 and d >= np.pi / np.sqrt(2.0 * K) - 1e-9:
            raise CutLocusError("point lies on the cut locus")
        return d

    def geodesic(o, v, rho):
        if np.any(o.coords != 0.0):
            raise DomainError("exact geodesics are only provided from the chart origin")
        v = np.asarray(v, float)
        vhat = v / np.linalg.norm(v)
        t = rho / scale
        r = np.tan(t) if sgn > 0 else np.tanh(t)
        return PointRef(o.chart_id, r * vhat)

    if sgn > 0:
        charts = (Chart("affine", (-8.0,) * m, (8.0,) * m),)
        sample = (0.0, 2.0)
    else:
        charts = (Chart("ball", (-1.0,) * m, (1.0,) * m, 0.0, 1.0),)
        sample = (0.0, 0.8)
    extras = {}
    if sgn > 0 and n == 1:
        r = 1.0 / np.sqrt(2.0 * K)

        def embedding(chart, X):
            z = to_complex(X)[..., 0]
            s = 1.0 + np.abs(z) ** 2
            return r * np.stack([2 * z.real / s, 2 * z.imag / s, (1 - np.abs(z) ** 2) / s], axis=-1)

        extras = {"embedding": embedding, "compact": True}
        params_extra = {"sphere_radius": r, "ambient_dim": 3}
    else:
        params_extra = {}
    return ManifoldSpec(
        name="cpn_fs" if sgn > 0 else "chn_ball",
        complex_dim=n,
        charts=charts,
        metric=metric,
        acs=lambda ch, X: _const(X, J0),
        kind="kaehler",
        params={"n": n, "K": K, "sample": sample, **params_extra},
        distance=distance,
        distance_field=dist_field,
        geodesic=geodesic,
        **extras,
    )


# ---------------------------------------------------------------- nearly Kaehler S^6


def stereo(chart: str, U: np.ndarray) -> np.ndarray:
    """Inverse stereographic map of chart 'N' (around +e7) or 'S' (around -e7)."""
    s = 1.0 + np.sum(U**2, axis=-1)
    last = (1.0 - np.sum(U**2, axis=-1)) / s
    if chart == "S":
        last = -last
    return np.concatenate([2.0 * U / s[..., None], last[..., None]], axis=-1)


def stereo_jacobian(chart: str, U: np.ndarray) -> np.ndarray:
    """d(stereo)/du, shape (N, 7, 6)."""
    s = 1.0 + np.sum(U**2, axis=-1)
    N = U.shape[0]
    Jac = np.empty((N, 7, 6))
    Jac[:, :6, :] = 2.0 * np.eye(6)[None] / s[:, None, None] - 4.0 * np.einsum("ki,kj->kij", U, U) / (s**2)[:, None, None]
    Jac[:, 6, :] = -4.0 * U / (s**2)[:, None]
    if chart == "S":
        Jac[:, 6, :] = -Jac[:, 6, :]
    return Jac


def inverse_stereo(chart: str, x: np.ndarray) -> np.ndarray:
    last = x[..., 6] if chart == "N" else -x[..., 6]
    return x[..., :6] / (1.0 + last)[..., None]


def _s6() -> ManifoldSpec:
    def metric(chart, U):
        s = 1.0 + np.sum(U**2, axis=-1)
        return (4.0 / s**2)[:, None, None] * np.eye(6)[None]

    def acs(chart, U):
        x = stereo(chart, U)
        D = stereo_jacobian(chart, U)
        s = 1.0 + np.sum(U**2, axis=-1)
        lam2 = 4.0 / s**2
        # columns: x cross (dPhi e_j), pulled back with dPhi^T / lambda^2
        XD = np.einsum("ijk,ni,njl->nkl", CROSS, x, D)
        return np.einsum("nkm,nkl->nml", D, XD) / lam2[:, None, None]

    def transition(src, dst, coords, vectors):
        if src == dst:
            return np.array(coords, float), None if vectors is None else np.array(vectors)
        if {src, dst} != {"N", "S"}:
            raise ChartTransitionError(f"unknown charts {src}->{dst}")
        u = np.asarray(coords, float)
        r2 = float(u @ u)
        if r2 < 1e-12:
            raise ChartTransitionError("point is the pole of the target chart")
        out = u / r2
        if vectors is None:
            return out, None
        Jinv = np.eye(6) / r2 - 2.0 * np.outer(u, u) / r2**2
        return out, Jinv @ np.asarray(vectors)

    def _amb(p: PointRef):
        return stereo(p.chart_id, p.coords[None])[0]

    def dist_field(o: PointRef, chart: str):
        xo = _amb(o)

        def f(U):
            x = stereo(chart, U)
            c = x @ xo
            s = np.linalg.norm(x - c[:, None] * xo[None], axis=-1)
            return np.arctan2(s, c)

        return f

    def distance(o, p):
        d = float(dist_field(o, p.chart_id)(p.coords[None])[0])
        if d > np.pi - 1e-9:
            raise CutLocusError("antipodal point: distance pi lies on the cut locus")
        return d

    def geodesic(o, v, rho):
        xo = _amb(o)
        D = stereo_jacobian(o.chart_id, o.coords[None])[0]
        va = D @ np.asarray(v, float)
        va = va / np.linalg.norm(va)
        x = np.cos(rho) * xo + np.sin(rho) * va
        chart = "N" if x[6] >= 0 else "S"
        return PointRef(chart, inverse_stereo(chart, x))

    charts = (
        Chart("N", (-2.3,) * 6, (2.3,) * 6, 0.0, 2.2),
        Chart("S", (-2.3,) * 6, (2.3,) * 6, 0.0, 2.2),
    )
    return ManifoldSpec(
        name="s6_nk",
        complex_dim=3,
        charts=charts,
        metric=metric,
        acs=acs,
        kind="nearly_kaehler",
        params={"n": 3, "K": None, "sample": (0.0, 1.5), "sphere_radius": 1.0, "ambient_dim": 7, "switch_radius": 1.5},
        distance=distance,
        distance_field=dist_field,
        geodesic=geodesic,
        transition=transition,
        embedding=lambda chart, U: stereo(chart, U),
        compact=True,
    )


# ---------------------------------------------------------------- Hopf (C^2 minus 0)


def _hopf() -> ManifoldSpec:
    J0 = standard_J(2)

    def metric(chart, X):
        r2 = np.sum(X**2, axis=-1)
        return np.eye(4)[None] / r2[:, None, None]

    def _parts(X, o):
        r = np.linalg.norm(X, axis=-1)
        ro = np.linalg.norm(o)
        oh = o / ro
        c = (X @ oh) / r
        s = np.linalg.norm(X / r[:, None] - c[:, None] * oh[None], axis=-1)
        return np.log(r / ro), np.arctan2(s, c)

    def dist_field(o: PointRef, chart: str):
        oc = np.array(o.coords)

        def f(X):
            t, th = _parts(X, oc)
            return np.sqrt(t**2 + th**2)

        return f

    def distance(o, p):
        t, th = _parts(p.coords[None], o.coords)
        if th[0] > np.pi - 1e-9:
            raise CutLocusError("antipodal sphere direction lies on the cut locus")
        return float(np.hypot(t[0], th[0]))

    def geodesic(o, v, rho):
        x0 = np.array(o.coords)
        r0 = np.linalg.norm(x0)
        v = np.asarray(v, float)
        oh = x0 / r0
        a = (v @ oh) / r0
        b = v - (v @ oh) * oh
        w = np.linalg.norm(b) / r0
        bh = b / np.linalg.norm(b) if w > 0 else np.zeros_like(b)
        x = np.exp(a * rho) * r0 * (np.cos(w * rho) * oh + np.sin(w * rho) * bh)
        return PointRef(o.chart_id, x)

    return ManifoldSpec(
        name="hopf",
        complex_dim=2,
        charts=(Chart("annulus", (-20.0,) * 4, (20.0,) * 4, 0.05, 20.0),),
        metric=metric,
        acs=lambda c, X: _const(X, J0),
        kind="hermitian",
        params={"n": 2, "K": None, "sample": (0.4, 2.5)},
        distance=distance,
        distance_field=dist_field,
        geodesic=geodesic,
    )


def build_model(model: ModelId | str, n: int | None = None, K: float | None = None) -> ManifoldSpec:
    if isinstance(model, str):
        model = ModelId(model, n, K)
    if model.name not in MODEL_NAMES:
        raise DomainError(f"unknown model {model.name!r}; expected one of {MODEL_NAMES}")
    mid = model.resolved()
    if mid.name == "flat_cn":
        return _flat(mid.n)
    if mid.name in ("cpn_fs", "chn_ball"):
        return _space_form(mid.n, mid.K)
    if mid.name == "s6_nk":
        return _s6()
    return _hopf()


def analytic_distance(M: ManifoldSpec, o: PointRef, p: PointRef) -> float:
    if M.distance is None:
        raise DomainError(f"{M.name} has no analytic distance")
    if o.chart_id != p.chart_id:
        if M.transition is None:
            raise ChartTransitionError("points in different charts")
        try:
            q, _ = M.transition(p.chart_id, o.chart_id, p.coords, None)
            p = PointRef(o.chart_id, q)
        except ChartTransitionError:
            # p sits at the pole of o's chart: move o instead
            q, _ = M.transition(o.chart_id, p.chart_id, o.coords, None)
            o = PointRef(p.chart_id, q)
    return M.distance(o, p)


def random_points(M: ManifoldSpec, count: int, seed: int) -> list:
    """Seeded interior sample points in the model's first chart."""
    lo, hi = M.params["sample"]
    X = _sample_shell(count, seed, M.real_dim, lo, hi)
    return [PointRef(M.charts[0].id, x) for x in X]


def default_origin(M: ManifoldSpec) -> PointRef:
    if M.name == "hopf":
        return PointRef("annulus", np.array([1.0, 0.0, 0.0, 0.0]))
    return PointRef(M.charts[0].id, np.zeros(M.real_dim))
