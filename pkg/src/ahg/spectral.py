"""Laplacians, eigenfunction residuals and Monte Carlo Rayleigh quotients on round models."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .comparison import ComparisonReport
from .connection import Connection, canonical, function_jets, hessian_coords, levi_civita
from .curvature import ricci_at
from .frames import unitary_frame_at
from .manifold import DomainError, ManifoldSpec, PointRef
from .models import random_points
from .verify import ResidualReport

BATCHES = 32
CHUNK = 8192


def _connection(M: ManifoldSpec, conn) -> Connection:
    if isinstance(conn, Connection):
        return conn
    if conn == "canonical":
        return canonical(M)
    if conn == "levi_civita":
        return levi_civita(M)
    raise ValueError(f"unknown connection {conn!r}")


def laplacian_at(M: ManifoldSpec, p: PointRef, f: Callable, conn: Union[str, Connection] = "canonical") -> float:
    """2 sum_i f_{i ibar} for the canonical connection, the metric trace of the Hessian for Levi-Civita."""
    conn = _connection(M, conn)
    _, df, d2f = function_jets(f, p, 2)
    G = conn.christoffel(p.chart_id, p.coords[None])[0]
    Hc = hessian_coords(df, d2f, G)
    if conn.kind == "levi_civita":
        return float(np.trace(np.linalg.solve(M.g(p), Hc)))
    n = M.complex_dim
    E = unitary_frame_at(M, p).full
    H = E.T @ Hc @ E
    return float(2.0 * np.trace(H[:n, n:]).real)


def check_eigenfunction(
    M: ManifoldSpec,
    f: Callable,
    lam: float,
    sample: Sequence[PointRef],
    conn: Union[str, Connection] = "canonical",
    tol: float = 1e-5,
) -> ResidualReport:
    conn = _connection(M, conn)
    worst, where = 0.0, None
    for p in sample:
        val = float(np.asarray(f(p.coords[None]))[0])
        r = abs(laplacian_at(M, p, f, conn) + lam * val)
        if r >= worst:
            worst, where = r, p
    return ResidualReport(
        "eigenfunction",
        worst,
        None if where is None else where.to_json(),
        tol,
        {"model": M.name, "lambda": lam, "points": len(sample)},
    )


# ---------------------------------------------------------------- ambient polynomials


def monomials(dim: int, degree: int, min_degree: int = 1) -> np.ndarray:
    """Exponent rows of all monomials in ``dim`` variables with min_degree <= degree."""
    rows = []
    for d in range(min_degree, degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), d):
            e = np.zeros(dim, int)
            for c in combo:
                e[c] += 1
            rows.append(e)
    return np.array(rows, int)


@dataclass
class TestFunction:
    """Polynomial in ambient coordinates: sum_t coeffs[t] * prod_k x_k ** exponents[t, k]."""

    __test__ = False  # not a pytest class

    coeffs: np.ndarray
    exponents: np.ndarray
    label: str = ""
    mean_estimate: Optional[float] = None
    sample_size: int = 0

    @classmethod
    def coordinate(cls, dim: int, k: int) -> "TestFunction":
        e = np.zeros((1, dim), int)
        e[0, k] = 1
        return cls(np.ones(1), e, f"x{k + 1}")

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, degree: int = 3, label: str = "") -> "TestFunction":
        E = monomials(dim, degree)
        return cls(rng.standard_normal(len(E)), E, label)

    @property
    def dim(self) -> int:
        return self.exponents.shape[1]

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(c * self.coeffs, self.exponents, self.label)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _basis(x, self.exponents) @ self.coeffs

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("ntk,t->nk", _basis_grad(x, self.exponents), self.coeffs)

    def chart_function(self, M: ManifoldSpec, chart: str) -> Callable:
        """Batched chart function X -> f(embedding(X))."""
        if M.embedding is None:
            raise DomainError(f"{M.name} has no ambient embedding")
        return lambda X: self(M.embedding(chart, X))

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "terms": len(self.coeffs),
            "mean_estimate": self.mean_estimate,
            "sample_size": self.sample_size,
        }


def _powers(x: np.ndarray, top: int) -> np.ndarray:
    P = np.ones(x.shape + (top + 1,))
    for e in range(1, top + 1):
        P[..., e] = P[..., e - 1] * x
    return P


def _basis(x: np.ndarray, E: np.ndarray, P: Optional[np.ndarray] = None) -> np.ndarray:
    P = _powers(x, int(E.max(initial=0))) if P is None else P
    return np.prod(P[:, np.arange(E.shape[1])[None, :], E], axis=-1)


def _basis_grad(x: np.ndarray, E: np.ndarray) -> np.ndarray:
    N, d = x.shape
    P = _powers(x, int(E.max(initial=0)))
    out = np.empty((N, E.shape[0], d))
    for k in range(d):
        Ek = E.copy()
        Ek[:, k] = np.maximum(Ek[:, k] - 1, 0)
        out[:, :, k] = E[None, :, k] * _basis(x, Ek, P)
    return out


# ---------------------------------------------------------------- Monte Carlo on round spheres


def _sphere(M: ManifoldSpec) -> tuple:
    if not M.compact or M.embedding is None or "sphere_radius" not in M.params:
        raise DomainError(f"{M.name} is not a compact model with a uniform sampler")
    return float(M.params["sphere_radius"]), int(M.params["ambient_dim"])


def sphere_samples(M: ManifoldSpec, count: int, seed: int) -> np.ndarray:
    """Uniform points on the round model sphere via normalized Gaussians."""
    R, d = _sphere(M)
    Z = np.random.default_rng(seed).standard_normal((count, d))
    return R * Z / np.linalg.norm(Z, axis=1, keepdims=True)


@dataclass
class RayleighEstimate:
    value: float
    sigma: float
    mean: float
    batch_values: np.ndarray = field(repr=False)
    samples: int = 0

    @property
    def interval(self) -> tuple:
        return self.value - 3.0 * self.sigma, self.value + 3.0 * self.sigma

    def to_json(self) -> dict:
        return {"value": self.value, "sigma": self.sigma, "mean": self.mean, "samples": self.samples}


def _rayleigh_many(M: ManifoldSpec, fns: Sequence[TestFunction], mc_samples: int, seed: int) -> list:
    R, d = _sphere(M)
    if mc_samples < BATCHES:
        raise DomainError(f"need at least {BATCHES} samples")
    for f in fns:
        if f.dim != d:
            raise DomainError(f"test function has {f.dim} variables, ambient dimension is {d}")
    # shared monomial basis: one evaluation per chunk for all functions
    U, inv = np.unique(np.concatenate([f.exponents for f in fns]), axis=0, return_inverse=True)
    inv = np.ravel(inv)
    C = np.zeros((len(U), len(fns)))
    pos = 0
    for t, f in enumerate(fns):
        np.add.at(C[:, t], inv[pos: pos + len(f.coeffs)], f.coeffs)
        pos += len(f.coeffs)
    x = sphere_samples(M, mc_samples, seed)
    batch = np.arange(mc_samples) * BATCHES // mc_samples
    T = len(fns)
    s1 = np.zeros((BATCHES, T))
    s2 = np.zeros((BATCHES, T))
    sg = np.zeros((BATCHES, T))
    counts = np.bincount(batch, minlength=BATCHES).astype(float)
    for start in range(0, mc_samples, CHUNK):
        xs = x[start: start + CHUNK]
        b = batch[start: start + CHUNK]
        F = _basis(xs, U) @ C
        Gr = np.matmul(_basis_grad(xs, U).transpose(0, 2, 1), C)  # (N, d, T)
        xh = xs / R
        Gt = Gr - xh[:, :, None] * np.einsum("nk,nkt->nt", xh, Gr)[:, None, :]
        g2 = np.sum(Gt**2, axis=1)
        for bi in np.unique(b):
            sel = b == bi
            s1[bi] += F[sel].sum(0)
            s2[bi] += (F[sel] ** 2).sum(0)
            sg[bi] += g2[sel].sum(0)
    N = float(mc_samples)
    mean = s1.sum(0) / N
    var = s2.sum(0) / N - mean**2
    num = sg.sum(0) / N
    out = []
    for t, f in enumerate(fns):
        scale = s2[:, t].sum() / N
        if not var[t] > 1e-12 * max(scale, 1e-300):
            raise DomainError(f"test function {f.label or t} is numerically constant")
        bvar = s2[:, t] / counts - mean[t] ** 2
        bvals = (sg[:, t] / counts) / bvar
        sigma = float(np.std(bvals, ddof=1) / np.sqrt(BATCHES))
        f.mean_estimate, f.sample_size = float(mean[t]), mc_samples
        out.append(RayleighEstimate(float(num[t] / var[t]), sigma, float(mean[t]), bvals, mc_samples))
    return out


def rayleigh_quotient(M: ManifoldSpec, f: TestFunction, mc_samples: int = 100_000, seed: int = 0) -> RayleighEstimate:
    """int |grad f|^2 / int (f - mean f)^2 with a batch-means error bar."""
    return _rayleigh_many(M, [f], mc_samples, seed)[0]


def quasi_ricci_lower(M: ManifoldSpec, points: Sequence[PointRef]) -> float:
    return float(min(np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[0] for Q in (ricci_at(M, p, "quasi") for p in points)))


def verify_eigenvalue_bound(
    M: ManifoldSpec,
    mc_samples: int = 100_000,
    trial_functions: int = 50,
    seed: int = 0,
    K: Optional[float] = None,
    tol: float = 1e-6,
    points: int = 4,
) -> ComparisonReport:
    """Every mean-adjusted trial has Rayleigh quotient >= 2K - 3 sigma; x_1 is checked for sharpness."""
    R, d = _sphere(M)
    if K is None:
        K = quasi_ricci_lower(M, random_points(M, points, seed))
    rng = np.random.default_rng([seed, 1])
    x1 = TestFunction.coordinate(d, 0)
    trials = [TestFunction.random(d, rng, 3, f"poly{t}") for t in range(trial_functions)]
    ests = _rayleigh_many(M, [x1] + trials, mc_samples, seed)
    target = 2.0 * K
    rows, ok, worst = [], True, np.inf
    for f, est in zip([x1] + trials, ests):
        margin = est.value + 3.0 * est.sigma - target
        good = margin >= -tol
        ok &= bool(good)
        worst = min(worst, margin)
        rows.append({"trial": f.label, **est.to_json(), "margin": float(margin), "passed": bool(good)})
    sharp = ests[0].value - 3.0 * ests[0].sigma <= target + tol
    ok &= bool(sharp)
    details = {
        "K": float(K),
        "bound": float(target),
        "sharp": bool(sharp),
        "x1_quotient": ests[0].to_json(),
        "mc_samples": mc_samples,
        "trials": trial_functions,
    }
    return ComparisonReport("eigenvalue_bound", M.name, bool(ok), tol, float(worst), rows, details)
