"""Chart-based almost Hermitian manifolds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import fd

CLASS_TAGS = ("kaehler", "nearly_kaehler", "quasi_kaehler", "hermitian", "general")

# Field over a chart: (chart_id, X of shape (N, 2n)) -> (N, 2n, 2n)
ChartField = Callable[[str, np.ndarray], np.ndarray]


class GeometryError(Exception):
    """Base class for all errors raised by the engine."""


class OutOfChartError(GeometryError):
    pass


class ChartTransitionError(GeometryError):
    pass


class ClassificationError(GeometryError):
    pass


class CutLocusError(GeometryError):
    pass


class DomainError(GeometryError, ValueError):
    pass


def chart_margin(h: float | None = None) -> float:
    # 10 * h * (max stencil radius), with the radius counted over three nesting levels.
    h = fd.STEP if h is None else h
    return 10.0 * h * 3 * fd.MAX_RADIUS


@dataclass(frozen=True)
class Chart:
    """An open box in R^{2n}, optionally cut down to a shell ``r_min < |x| < r_max``."""

    id: str
    lower: tuple
    upper: tuple
    r_min: float = 0.0
    r_max: float = np.inf

    def depth(self, coords: np.ndarray) -> float:
        """Distance from ``coords`` to the chart boundary (negative when outside)."""
        x = np.asarray(coords, dtype=float)
        d = min(np.min(x - np.asarray(self.lower)), np.min(np.asarray(self.upper) - x))
        r = float(np.linalg.norm(x))
        if self.r_min > 0.0:
            d = min(d, r - self.r_min)
        if np.isfinite(self.r_max):
            d = min(d, self.r_max - r)
        return float(d)

    def contains(self, coords: np.ndarray, margin: float = 0.0) -> bool:
        return self.depth(coords) > margin


@dataclass(frozen=True)
class PointRef:
    chart_id: str
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def to_json(self) -> dict:
        return {"chart": self.chart_id, "coords": [float(v) for v in self.coords]}


@dataclass(frozen=True)
class ManifoldSpec:
    """An almost Hermitian manifold (M, J, g) described chart by chart.

    ``metric`` and ``acs`` are batched: they map ``(chart_id, X)`` with ``X`` of
    shape ``(N, 2n)`` to arrays of shape ``(N, 2n, 2n)``.  ``acs`` returns the
    matrix of J acting on coordinate components of tangent vectors.
    """

    name: str
    complex_dim: int
    charts: tuple
    metric: ChartField
    acs: ChartField
    kind: str = "general"
    params: dict = field(default_factory=dict)
    # analytic extras
    distance: Optional[Callable[["PointRef", "PointRef"], float]] = None
    distance_field: Optional[Callable[["PointRef", str], Callable]] = None
    geodesic: Optional[Callable] = None
    transition: Optional[Callable] = None
    embedding: Optional[Callable] = None
    compact: bool = False

    def __post_init__(self):
        if self.complex_dim < 1:
            raise DomainError("complex_dim must be positive")
        if self.kind not in CLASS_TAGS:
            raise DomainError(f"unknown class tag {self.kind!r}")

    @property
    def real_dim(self) -> int:
        return 2 * self.complex_dim

    def chart(self, chart_id: str) -> Chart:
        for c in self.charts:
            if c.id == chart_id:
                return c
        raise OutOfChartError(f"{self.name}: no chart {chart_id!r}")

    def point(self, coords, chart_id: str | None = None, margin: float | None = None) -> PointRef:
        chart_id = self.charts[0].id if chart_id is None else chart_id
        p = PointRef(chart_id, np.asarray(coords, dtype=float))
        self.validate(p, margin)
        return p

    def validate(self, p: PointRef, margin: float | None = None) -> None:
        margin = chart_margin() if margin is None else margin
        if p.coords.shape != (self.real_dim,):
            raise DomainError(f"{self.name}: expected {self.real_dim} coordinates, got {p.coords.shape}")
        if not self.chart(p.chart_id).contains(p.coords, margin):
            raise OutOfChartError(
                f"{self.name}: point {np.round(p.coords, 6).tolist()} is not inside chart "
                f"{p.chart_id!r} with margin {margin:g}"
            )

    def g(self, p: PointRef) -> np.ndarray:
        return self.metric(p.chart_id, p.coords[None, :])[0]

    def J(self, p: PointRef) -> np.ndarray:
        return self.acs(p.chart_id, p.coords[None, :])[0]

    def structure_residuals(self, p: PointRef) -> dict:
        """Residuals of J^2 = -I, J^T g J = g, and the smallest eigenvalue of g."""
        g, J = self.g(p), self.J(p)
        m = self.real_dim
        return {
            "J2": float(np.max(np.abs(J @ J + np.eye(m)))),
            "JgJ": float(np.max(np.abs(J.T @ g @ J - g))),
            "g_min_eig": float(np.linalg.eigvalsh(0.5 * (g + g.T))[0]),
        }

    def best_chart(self, p: PointRef) -> PointRef:
        """Re-express ``p`` in the chart where it lies deepest (identity without transitions)."""
        if self.transition is None or len(self.charts) == 1:
            return p
        best, depth = p, self.chart(p.chart_id).depth(p.coords)
        for c in self.charts:
            if c.id == p.chart_id:
                continue
            q, _ = self.transition(p.chart_id, c.id, p.coords, None)
            d = c.depth(q)
            if d > depth + 1e-12:
                best, depth = PointRef(c.id, q), d
        return best

    def sample_points(self, count: int, seed: int, radius: float | None = None) -> list:
        """Deterministic sample of interior points of the first chart."""
        rng = np.random.default_rng(seed)
        chart = self.charts[0]
        lo, hi = np.asarray(chart.lower, float), np.asarray(chart.upper, float)
        out = []
        margin = max(chart_margin(), 0.05)
        while len(out) < count:
            x = rng.uniform(np.maximum(lo, -3.0), np.minimum(hi, 3.0))
            if radius is not None:
                x = x * min(1.0, radius / max(np.linalg.norm(x), 1e-300))
            if chart.contains(x, margin):
                out.append(PointRef(chart.id, x))
        return out
