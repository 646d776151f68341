"""Geodesics, distance-function Hessians and the Hessian/Laplacian/diameter comparisons."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .connection import (
    Connection,
    LocalGeometry,
    canonical,
    function_jets,
    hessian_coords,
    levi_civita,
    third_coords,
    to_frame,
)
from .curvature import FrameTensors, estimate_bounds, estimate_quasi_bisectional_min, qh_sectional
from .frames import unitary_frame_at
from .models import random_points
from .manifold import ClassificationError, CutLocusError, DomainError, ManifoldSpec, PointRef
from .riccati import RiccatiProblem, hermitian_min_eig, riccati_solve
from .verify import ResidualReport

DEFAULT_DIRECTIONS = 16
DEFAULT_STEP = 1e-2
PSD_TOL = 1e-4
NK_CLASSES = ("kaehler", "nearly_kaehler")


# ---------------------------------------------------------------- geodesics


def cut_distance(M: ManifoldSpec, o: PointRef, v) -> float:
    """Distance to the cut point along the unit direction v (inf if none is known)."""
    if M.name == "s6_nk":
        return float(np.pi)
    if M.name == "cpn_fs":
        return float(np.pi / np.sqrt(2.0 * M.params["K"]))
    if M.name == "hopf":
        x = o.coords
        r = np.linalg.norm(x)
        v = np.asarray(v, float)
        a = (v @ x) / r**2
        w = np.sqrt(max(0.0, 1.0 - a * a))
        return float(np.pi / w) if w > 1e-12 else float("inf")
    return float("inf")


def model_diameter(M: ManifoldSpec) -> Optional[float]:
    if M.name == "s6_nk":
        return float(np.pi)
    if M.name == "cpn_fs":
        return float(np.pi / np.sqrt(2.0 * M.params["K"]))
    return None


def _unit(M: ManifoldSpec, p: PointRef, v) -> np.ndarray:
    v = np.asarray(v, float)
    nrm = float(np.sqrt(v @ M.g(p) @ v))
    if not np.isfinite(nrm) or nrm == 0.0:
        raise DomainError("direction must be a nonzero tangent vector")
    return v / nrm


def sample_directions(M: ManifoldSpec, o: PointRef, count: int = DEFAULT_DIRECTIONS, seed: int = 0) -> np.ndarray:
    """Seeded unit directions at o, uniform on the g-unit sphere."""
    rng = np.random.default_rng(seed)
    g = M.g(o)
    L = np.linalg.cholesky(g)
    Z = rng.standard_normal((count, M.real_dim))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    # g-unit vectors are L^{-T} z for Euclidean unit z
    return np.linalg.solve(L.T, Z.T).T


@dataclass
class GeodesicPath:
    origin: PointRef
    direction: np.ndarray
    rhos: np.ndarray
    points: list
    velocities: list
    step: float
    speed_residual: float
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> list:
        return list(zip(self.rhos.tolist(), self.points))

    def index(self, rho: float) -> int:
        i = int(np.argmin(np.abs(self.rhos - rho)))
        if abs(self.rhos[i] - rho) > 1e-9:
            raise KeyError(f"rho={rho} is not a sample of this geodesic")
        return i


@dataclass
class ParallelFrame:
    path: GeodesicPath
    frames: list  # full (m, 2n) frames, one per sample
    unitarity: np.ndarray
    e1_drift: np.ndarray
    radial_expected: bool


def _march(M: ManifoldSpec, o: PointRef, v: np.ndarray, grid: np.ndarray, step: float, conn=None, E0=None):
    lc = levi_civita(M)
    chart = o.chart_id
    x = o.coords.astype(float).copy()
    vel = v.astype(float).copy()
    E = None if E0 is None else np.asarray(E0, complex).copy()
    switch = M.params.get("switch_radius")

    def rhs(x, vel, E):
        X = x[None]
        Glc = lc.christoffel(chart, X)[0]
        acc = -np.einsum("abc,b,c->a", Glc, vel, vel)
        if E is None:
            return vel, acc, None
        Gc = Glc if conn.kind == "levi_civita" else conn.christoffel(chart, X)[0]
        return vel, acc, -np.einsum("abc,b,ck->ak", Gc, vel, E)

    pts, vels, frames = [], [], []
    r = 0.0
    for target in grid:
        if target > r:
            k = max(1, int(np.ceil((target - r) / step - 1e-9)))
            h = (target - r) / k
            for _ in range(k):
                k1 = rhs(x, vel, E)
                k2 = rhs(x + h / 2 * k1[0], vel + h / 2 * k1[1], None if E is None else E + h / 2 * k1[2])
                k3 = rhs(x + h / 2 * k2[0], vel + h / 2 * k2[1], None if E is None else E + h / 2 * k2[2])
                k4 = rhs(x + h * k3[0], vel + h * k3[1], None if E is None else E + h * k3[2])
                x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                vel = vel + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                if E is not None:
                    E = E + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
                if switch is not None and np.linalg.norm(x) > switch:
                    q = M.best_chart(PointRef(chart, x))
                    if q.chart_id != chart:
                        vecs = vel[:, None] if E is None else np.column_stack([vel, E])
                        x, vecs = M.transition(chart, q.chart_id, x, vecs)
                        vel = vecs[:, 0].real.copy()
                        if E is not None:
                            E = vecs[:, 1:]
                        chart = q.chart_id
            r = target
        p = PointRef(chart, x.copy())
        M.validate(p)
        pts.append(p)
        vels.append(vel.copy())
        frames.append(None if E is None else E.copy())
    return pts, vels, frames


def _grid(rho_max: float, step: float, rho_grid=None) -> np.ndarray:
    base = np.linspace(0.0, rho_max, int(np.ceil(rho_max / step - 1e-9)) + 1)
    if rho_grid is not None:
        base = np.union1d(base, np.asarray(rho_grid, float))
    return base


def integrate_geodesic(
    M: ManifoldSpec,
    o: PointRef,
    v,
    rho_max: float,
    step: float = DEFAULT_STEP,
    rho_grid=None,
) -> GeodesicPath:
    """RK4 on the Levi-Civita geodesic equation, switching charts where the atlas provides overlaps."""
    M.validate(o)
    v = _unit(M, o, v)
    if rho_max <= 0:
        raise DomainError("rho_max must be positive")
    cut = cut_distance(M, o, v)
    if rho_max >= cut:
        raise CutLocusError(f"rho_max={rho_max} reaches the cut distance {cut:.6g}")
    grid = _grid(rho_max, step, rho_grid)
    pts, vels, _ = _march(M, o, v, grid, step)
    speed = np.array([np.sqrt(u @ M.g(p) @ u) for p, u in zip(pts, vels)])
    return GeodesicPath(o, v, grid, pts, vels, step, float(np.max(np.abs(speed - 1.0))), {"cut_distance": cut})


def radial_frame(M: ManifoldSpec, p: PointRef, v) -> np.ndarray:
    """Full unitary frame at p with e_1 = (v - iJv)/sqrt(2)."""
    return unitary_frame_at(M, p, seed=np.asarray(v, float)).full


def parallel_frame_along(M: ManifoldSpec, path: GeodesicPath, conn: Optional[Connection] = None, E0=None) -> ParallelFrame:
    """Transport a unitary frame along ``path``; e_1 starts radial unless E0 is given."""
    conn = canonical(M) if conn is None else conn
    n = M.complex_dim
    if E0 is None:
        E0 = radial_frame(M, path.origin, path.direction)
    e0 = np.asarray(E0)[:, :n]
    pts, vels, fr = _march(M, path.origin, path.direction, path.rhos, path.step, conn, e0)
    frames, unit, drift = [], [], []
    for p, u, e in zip(pts, vels, fr):
        g, J = M.g(p), M.J(p)
        full = np.concatenate([e, e.conj()], axis=1)
        frames.append(full)
        gram = e.T @ g @ e.conj()
        unit.append(float(np.max(np.abs(gram - np.eye(n)))))
        radial = (u - 1j * (J @ u)) / np.sqrt(2.0)
        drift.append(float(np.sqrt(abs((e[:, 0] - radial) @ g @ (e[:, 0] - radial).conj()))))
    return ParallelFrame(path, frames, np.array(unit), np.array(drift), M.kind in NK_CLASSES)


# ---------------------------------------------------------------- distance Hessian


@dataclass
class HessianSample:
    rho: float
    H: np.ndarray  # rho_{i jbar}
    gradient: np.ndarray  # rho_i
    full: np.ndarray  # all frame components rho_{ab}
    frame: np.ndarray
    first_order_residual: float
    point: PointRef

    @property
    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.H - self.H.conj().T)))


def _jets(M: ManifoldSpec, o: PointRef, q: PointRef, order: int):
    f = M.distance_field(o, q.chart_id)
    return function_jets(f, q, order)


def distance_hessian_at(
    M: ManifoldSpec,
    o: PointRef,
    q: PointRef,
    E: Optional[np.ndarray] = None,
    conn: Optional[Connection] = None,
    rho: Optional[float] = None,
) -> HessianSample:
    """Canonical complex Hessian of the analytic distance from o at q, in frame E (radial by default)."""
    if M.distance_field is None:
        raise DomainError(f"{M.name} has no analytic distance")
    conn = canonical(M) if conn is None else conn
    M.validate(q)
    f0, df, d2f = _jets(M, o, q, 2)
    if E is None:
        E = radial_frame(M, q, np.linalg.solve(M.g(q), df))
    G = conn.christoffel(q.chart_id, q.coords[None])[0]
    n = M.complex_dim
    full = E.T @ hessian_coords(df, d2f, G) @ E
    grad = E.T @ df
    first = np.einsum("ia,i->a", full[:n], grad[n:]) + np.einsum("i,ia->a", grad[:n], full[n:])
    return HessianSample(
        float(f0) if rho is None else rho,
        full[:n, n:],
        grad[:n],
        full,
        E,
        float(np.max(np.abs(first))),
        q,
    )


def distance_hessian(
    M: ManifoldSpec,
    o: PointRef,
    path: GeodesicPath,
    rho: float,
    transport: Optional[ParallelFrame] = None,
    conn: Optional[Connection] = None,
) -> HessianSample:
    """Hessian sample at arclength rho of ``path`` (transported frame if given, else radial)."""
    if rho >= path.meta.get("cut_distance", np.inf):
        raise CutLocusError(f"rho={rho} is beyond the cut locus")
    i = path.index(rho)
    E = None if transport is None else transport.frames[i]
    return distance_hessian_at(M, o, path.points[i], E, conn, rho=float(path.rhos[i]))


# ---------------------------------------------------------------- reports


@dataclass
class ComparisonReport:
    check: str
    model: str
    passed: bool
    tolerance: float
    min_margin: float
    rows: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "model": self.model,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
            "min_margin": self.min_margin,
            "rows": self.rows,
            "details": self.details,
        }


def _psd_row(bound: np.ndarray, measured: np.ndarray, tol: float) -> tuple:
    margin = hermitian_min_eig(bound - measured)
    allowed = tol * (1.0 + float(np.linalg.norm(bound, 2)))
    return margin, allowed, margin >= -allowed


def _directions(M, o, directions, seed):
    if directions is None:
        return sample_directions(M, o, DEFAULT_DIRECTIONS, seed)
    if np.isscalar(directions):
        return sample_directions(M, o, int(directions), seed)
    return np.atleast_2d(np.asarray(directions, float))


def _check_grid(M, o, v, rho_grid):
    grid = np.sort(np.asarray(rho_grid, float))
    if grid[0] <= 0:
        raise DomainError("rho grid must be positive")
    cut = cut_distance(M, o, _unit(M, o, v))
    if grid[-1] >= cut:
        raise CutLocusError(f"rho={grid[-1]} is not inside the cut locus (cut at {cut:.6g})")
    return grid


def _torsion_frame(M, conn, q: PointRef, E: np.ndarray) -> np.ndarray:
    G = conn.christoffel(q.chart_id, q.coords[None])[0]
    T = G - G.transpose(0, 2, 1)
    return to_frame(T, "ull", E, np.linalg.inv(E))


def general_bound_constant(n: int, K_lower: float, A1: float, A2: float) -> float:
    K = max(0.0, -K_lower)
    return float(np.sqrt((4.0 * np.sqrt(n) + 3.0) * A1**2 + 2.0 * A2 + K))


def riccati_bound_rhs(n: int, K_lower: float, A1: float, A2: float) -> float:
    K = max(0.0, -K_lower)
    return float((2.0 * np.sqrt(n) + 0.5) * A1**2 + A2 + 0.5 * K)


def check_hessian_comparison_general(
    M: ManifoldSpec,
    o: PointRef,
    directions=None,
    rho_grid=(0.1, 0.25, 0.5, 0.75, 1.0),
    bounds=None,
    tol: float = PSD_TOL,
    samples: int = 48,
    seed: int = 0,
    riccati: bool = True,
    step: float = 0.02,
) -> ComparisonReport:
    """rho_{i jbar} <= [1/rho + sqrt((4 sqrt(n)+3) A1^2 + 2 A2 + K)] g along sampled geodesics."""
    n = M.complex_dim
    conn = canonical(M)
    dirs = _directions(M, o, directions, seed)
    paths = []
    for v in dirs:
        grid = _check_grid(M, o, v, rho_grid)
        paths.append(integrate_geodesic(M, o, v, grid[-1], step, grid))
    if bounds is None:
        region = [o] + [p.points[p.index(r)] for p in paths for r in grid[:: max(1, len(grid) // 3)]]
        region = region[:: max(1, len(region) // 24)]
        bounds = estimate_bounds(M, region, samples, seed)
    c = general_bound_constant(n, bounds.K_lower, bounds.A1, bounds.A2)
    s_bound = riccati_bound_rhs(n, bounds.K_lower, bounds.A1, bounds.A2)
    rows, ok, worst = [], True, np.inf
    aa_worst = np.inf
    for di, path in enumerate(paths):
        tr = parallel_frame_along(M, path, conn) if riccati else None
        Xs = {}
        for r in grid:
            hs = distance_hessian(M, o, path, float(r), tr, conn)
            B = (1.0 / r + c) * np.eye(n)
            margin, allowed, good = _psd_row(B, hs.H, tol)
            ok &= bool(good)
            worst = min(worst, margin)
            Xs[float(r)] = hs.H
            rows.append(
                {
                    "direction": di,
                    "rho": float(r),
                    "bound": float(B[0, 0]),
                    "max_eig": float(np.linalg.eigvalsh(0.5 * (hs.H + hs.H.conj().T))[-1]),
                    "margin": margin,
                    "passed": bool(good),
                }
            )
        if not riccati:
            continue
        # A(rho) = (rho_{lambdabar} tau^l_{lambda k}) on every transported sample
        Avals = []
        for p, E in zip(path.points, tr.frames):
            if p is path.points[0]:
                Avals.append(None)
                continue
            _, df = _jets(M, o, p, 1)
            gr = E.T @ df
            tau = _torsion_frame(M, conn, p, E)
            Avals.append(np.einsum("lak,a->kl", tau[:n, :n, :n], gr[n:]))
        rr = path.rhos[1:]
        Aarr = np.array(Avals[1:])
        for A in Aarr:
            aa_worst = min(aa_worst, hermitian_min_eig(A + A.conj().T) + np.sqrt(2.0) * bounds.A1)
        spl_re = CubicSpline(rr, Aarr.real, axis=0)
        spl_im = CubicSpline(rr, Aarr.imag, axis=0)
        r0 = float(grid[0])
        prob = RiccatiProblem(
            S=lambda r: s_bound * np.eye(n),
            rho1=float(grid[-1]),
            n=n,
            A=lambda r: spl_re(r) + 1j * spl_im(r),
            rho0=r0,
            init=Xs[r0],
        )
        sol = riccati_solve(prob, grid)
        for r in grid:
            Z = sol.at(float(r))
            Y = (1.0 / r + c) * np.eye(n)
            m1, a1, g1 = _psd_row(Z, Xs[float(r)], tol)
            m2, a2, g2 = _psd_row(Y, Z, tol)
            ok &= bool(g1 and g2) and sol.blowup_at is None
            rows.append({"direction": di, "rho": float(r), "riccati_X_le_Z": m1, "riccati_Z_le_Y": m2, "passed": bool(g1 and g2)})
    details = {
        "bounds": bounds.to_json(),
        "bound_constant": c,
        "riccati_rhs": s_bound,
        "directions": len(dirs),
        "K_truncated": bool(bounds.K_lower > 1e-8),
    }
    if riccati:
        details["A_plus_Astar_margin"] = float(aa_worst)
        ok &= aa_worst >= -tol * (1.0 + bounds.A1)
    return ComparisonReport("hessian_comparison_general", M.name, bool(ok), tol, float(worst), rows, details)


def nk_bound(rho: float, K: float, grad: np.ndarray) -> np.ndarray:
    """Three-branch comparison matrix a(rho)(g - 2 rho rhobar) + b(rho) rho rhobar."""
    n = grad.size
    P = np.outer(grad, grad.conj())
    if K > 0:
        s, t = np.sqrt(K / 2.0), np.sqrt(2.0 * K)
        a, b = s / np.tan(s * rho), t / np.tan(t * rho)
    elif K < 0:
        s, t = np.sqrt(-K / 2.0), np.sqrt(-2.0 * K)
        a, b = s / np.tanh(s * rho), t / np.tanh(t * rho)
    else:
        a, b = 1.0 / rho, 1.0 / rho
    return a * (np.eye(n) - 2.0 * P) + b * P


def laplacian_bound(rho: float, K: float, n: int) -> float:
    if K > 0:
        t, s = np.sqrt(2.0 * K), np.sqrt(K / 2.0)
        return float(t * (1.0 / np.tan(t * rho) + (n - 1) / np.tan(s * rho)))
    if K < 0:
        t, s = np.sqrt(-2.0 * K), np.sqrt(-K / 2.0)
        return float(t * (1.0 / np.tanh(t * rho) + (n - 1) / np.tanh(s * rho)))
    return float((2 * n - 1) / rho)


def default_quasi_bisectional(M: ManifoldSpec, o: PointRef, samples: int = 64, seed: int = 0) -> float:
    if M.params.get("K") is not None:
        return float(M.params["K"])
    region = [o] + random_points(M, 3, seed)
    return estimate_quasi_bisectional_min(M, region, samples, seed)


def check_hessian_comparison_nk(
    M: ManifoldSpec,
    o: PointRef,
    directions=None,
    rho_grid=(0.2, 0.5, 1.0),
    K: Optional[float] = None,
    tol: float = PSD_TOL,
    seed: int = 0,
    step: float = DEFAULT_STEP,
) -> ComparisonReport:
    """Nearly Kaehler Hessian comparison and the Laplacian trace bound."""
    if M.kind not in NK_CLASSES:
        raise ClassificationError(f"{M.name} is {M.kind}, not nearly Kaehler")
    n = M.complex_dim
    K = default_quasi_bisectional(M, o, seed=seed) if K is None else float(K)
    space_form = M.name in ("flat_cn", "cpn_fs", "chn_ball")
    dirs = _directions(M, o, directions, seed)
    rows, ok, worst, eq_worst = [], True, np.inf, 0.0
    for di, v in enumerate(dirs):
        grid = _check_grid(M, o, v, rho_grid)
        if K > 0 and grid[-1] >= np.pi / np.sqrt(2.0 * K):
            raise CutLocusError("rho grid passes the conjugate radius of the comparison model")
        path = integrate_geodesic(M, o, v, grid[-1], step, grid)
        for r in grid:
            hs = distance_hessian(M, o, path, float(r))
            bound = nk_bound(float(r), K, hs.gradient)
            margin, allowed, good = _psd_row(bound, hs.H, tol)
            lap = 2.0 * float(np.trace(hs.H).real)
            lb = laplacian_bound(float(r), K, n)
            lap_ok = lap <= lb + tol * (1.0 + abs(lb))
            row = {
                "direction": di,
                "rho": float(r),
                "margin": margin,
                "laplacian": lap,
                "laplacian_bound": lb,
                "passed": bool(good and lap_ok),
            }
            if space_form:
                gap = float(np.max(np.abs(bound - hs.H)))
                row["equality_gap"] = gap
                row["laplacian_equality_gap"] = abs(lap - lb)
                gap = max(gap, abs(lap - lb) / (1.0 + abs(lb)))
                eq_worst = max(eq_worst, gap)
                row["passed"] = row["passed"] and gap <= PSD_TOL
            ok &= row["passed"]
            worst = min(worst, margin)
            rows.append(row)
    details = {"K": K, "branch": "positive" if K > 0 else ("negative" if K < 0 else "zero"), "directions": len(dirs)}
    if space_form:
        details["equality_gap"] = eq_worst
    return ComparisonReport("hessian_comparison_nk", M.name, bool(ok), tol, float(worst), rows, details)


def min_qh(M: ManifoldSpec, points: Sequence[PointRef], per_point: int = 8, seed: int = 0) -> float:
    """Smallest sampled quasi holomorphic sectional curvature."""
    rng = np.random.default_rng(seed)
    best = np.inf
    for p in points:
        geom = LocalGeometry(M, p, canonical(M))
        for _ in range(per_point):
            best = min(best, qh_sectional(M, p, rng.standard_normal(M.real_dim), geom))
    return float(best)


def check_diameter(
    M: ManifoldSpec,
    o: PointRef,
    directions=None,
    K: Optional[float] = None,
    rho_grid=None,
    tol: float = PSD_TOL,
    seed: int = 0,
    step: float = DEFAULT_STEP,
) -> ComparisonReport:
    """f = rho_{k lbar} rho_kbar rho_l <= (sqrt(K)/4) cot(sqrt(K) rho) and diameter <= pi/sqrt(K)."""
    if K is None:
        K = min_qh(M, [o] + random_points(M, 3, seed), seed=seed)
    K = float(K)
    if K <= 0:
        raise DomainError(f"the diameter bound needs K > 0, got {K}")
    n = M.complex_dim
    limit = np.pi / np.sqrt(K)
    dirs = _directions(M, o, directions, seed)
    rows, ok, worst = [], True, np.inf
    for di, v in enumerate(dirs):
        reach = min(limit, cut_distance(M, o, _unit(M, o, v)))
        grid = np.asarray(rho_grid, float) if rho_grid is not None else reach * np.array([0.1, 0.3, 0.5, 0.7, 0.9])
        grid = _check_grid(M, o, v, grid)
        path = integrate_geodesic(M, o, v, grid[-1], step, grid)
        for r in grid:
            hs = distance_hessian(M, o, path, float(r))
            gr = hs.gradient
            fval = float(np.einsum("kl,k,l->", hs.H, gr.conj(), gr).real)
            bound = np.sqrt(K) / 4.0 / np.tan(np.sqrt(K) * r)
            margin = float(bound - fval)
            good = margin >= -tol * (1.0 + abs(bound))
            ok &= bool(good)
            worst = min(worst, margin)
            rows.append({"direction": di, "rho": float(r), "f": fval, "bound": float(bound), "margin": margin, "passed": bool(good)})
    diam = model_diameter(M)
    details = {"K": K, "diameter_bound": float(limit), "model_diameter": diam}
    if diam is not None:
        details["diameter_ok"] = bool(diam <= limit + tol)
        details["sharp"] = bool(abs(diam - limit) <= 1e-6)
        ok &= details["diameter_ok"]
    return ComparisonReport("diameter", M.name, bool(ok), tol, float(worst), rows, details)


# ---------------------------------------------------------------- second-order evolution identity


def evolution_sides(grad: np.ndarray, H: np.ndarray, T3: np.ndarray, tau: np.ndarray, R: np.ndarray) -> tuple:
    """Both sides of the evolution identity for rho_{k lbar} along grad rho; all arrays in one frame."""
    n = grad.size // 2
    u, ub = slice(0, n), slice(n, 2 * n)
    g, gb = grad[u], grad[ub]
    lhs = np.einsum("kli,i->kl", T3[u, ub, u], gb) + np.einsum("kli,i->kl", T3[u, ub, ub], g)
    t_u_uu = tau[u, u, u]  # tau^lambda_{ik}
    t_b_uu = tau[ub, u, u]  # tau^{lambdabar}_{ik}
    t_u_bb = tau[u, ub, ub]  # tau^lambda_{ibar lbar}
    t_b_bb = tau[ub, ub, ub]  # tau^{lambdabar}_{ibar lbar}
    rhs = -np.einsum("il,ik->kl", H[u, ub], H[ub, u])
    rhs -= np.einsum("i,aik,al->kl", gb, t_u_uu, H[u, ub])
    rhs -= np.einsum("ka,ail,i->kl", H[u, ub], t_b_bb, g)
    rhs -= np.einsum("ik,il->kl", H[u, u], H[ub, ub])
    rhs -= np.einsum("ak,ail,i->kl", H[u, u], t_u_bb, g)
    rhs -= np.einsum("i,aik,al->kl", gb, t_b_uu, H[ub, ub])
    C7 = np.einsum("laik->klai", R[ub, u, u, u]) + np.einsum("mik,alm->klai", t_b_uu, t_b_bb)
    rhs -= np.einsum("klai,a,i->kl", C7, gb, gb)
    C8 = np.einsum("kail->klai", R[u, ub, ub, ub]) + np.einsum("akm,mil->klai", t_u_uu, t_u_bb)
    rhs -= np.einsum("klai,a,i->kl", C8, g, g)
    C9 = (
        np.einsum("iakl->klai", R[u, ub, u, ub])
        + np.einsum("ikm,mal->klai", tau[ub, u, u], t_u_bb)
        + np.einsum("mik,alm->klai", t_b_uu, tau[u, ub, ub])
    )
    rhs -= np.einsum("klai,a,i->kl", C9, g, gb)
    return lhs, rhs


def check_evolution_identity(
    M: ManifoldSpec,
    o: PointRef,
    path: GeodesicPath,
    rho_grid=None,
    tol: float = 1e-4,
) -> ResidualReport:
    """Max absolute residual of the second-order evolution identity over index pairs and grid."""
    conn = canonical(M)
    grid = path.rhos[1:] if rho_grid is None else np.asarray(rho_grid, float)
    worst, where, rel_worst = 0.0, None, 0.0
    for r in grid:
        q = path.points[path.index(float(r))]
        _, df, d2f, d3f = _jets(M, o, q, 3)
        geom = LocalGeometry(M, q, conn)
        E = radial_frame(M, q, np.linalg.solve(geom.g, df))
        T = FrameTensors(geom, E)
        F = T.F
        H = E.T @ hessian_coords(df, d2f, geom.G) @ E
        T3 = to_frame(third_coords(df, d2f, d3f, geom.G, geom.dG), "lll", E, F)
        lhs, rhs = evolution_sides(E.T @ df, H, T3, T.tau, T.R)
        res = float(np.max(np.abs(lhs - rhs)))
        rel_worst = max(rel_worst, res / (1.0 + float(np.max(np.abs(lhs)))))
        if res >= worst:
            worst, where = res, q
    return ResidualReport(
        "evolution_second_order",
        worst,
        where,
        tol,
        {"model": M.name, "grid": [float(r) for r in grid], "relative_residual": rel_worst},
    )
