"""Batch runner writing JSON verification reports over the model catalog.

Exit codes: 0 all checks pass, 1 some check fails, 2 configuration or numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import comparison as cmp
from . import spectral as sp
from . import verify as vf
from .curvature import estimate_bounds, levi_civita_ricci, ricci_at, tau_square, FrameTensors
from .connection import canonical
from .manifold import GeometryError, ManifoldSpec
from .models import MODEL_NAMES, ModelId, build_model, default_origin, random_points

SCHEMA_VERSION = "1.0"
SUITES = ("verify", "compare", "spectral", "bounds", "all")
TIMING_KEYS = ("wall_time", "total_wall_time")

ANCHORS = {
    "J_squared": "J^2 = -I",
    "J_compatible": "g(JX, JY) = g(X, Y)",
    "frame_unitarity": "<e_i, conj e_j> = delta_ij",
    "nabla_g": "nabla g = 0",
    "nabla_J": "nabla J = 0",
    "mixed_torsion": "tau^c_{i jbar} = 0",
    "bianchi_1": "R_{i jbar k lbar} - R_{k jbar i lbar} = torsion terms",
    "bianchi_2": "R_{i j k lbar} cyclic sum = torsion terms",
    "bianchi_3": "R_{i j k l} cyclic sum = torsion terms",
    "bianchi_4": "R_{i jbar k l} = torsion terms",
    "ricci_identity_f11": "f_{i jbar} = f_{jbar i}",
    "ricci_identity_f20": "f_{ij} - f_{ji} = tau^c_{ij} f_c",
    "ricci_identity_f_all": "f_{ab} - f_{ba} = tau^c_{ab} f_c",
    "ricci_identity_section": "s_{;kl} - s_{;lk} = -R s + tau s_{;}",
    "comparison_hessian_11": "f_{i jbar} - f^L_{i jbar} = torsion * df",
    "comparison_hessian_20": "f_{ij} - f^L_{ij} = torsion * df",
    "comparison_laplacian": "Delta f - Delta^L f = tau^i_{i lambda} f_lambdabar + conj",
    "comparison_divergence": "div X - div^L X = torsion trace * X",
    "comparison_connection_difference": "nabla - D = torsion contraction",
    "quasi_kaehler_hessian_11_equal": "f_{i jbar} = f^L_{i jbar} (tau^k_{ij} = 0)",
    "quasi_kaehler_laplacian_equal": "Delta f = Delta^L f (tau^k_{ij} = 0)",
    "quasi_kaehler_divergence_equal": "div X = div^L X (tau^k_{ij} = 0)",
    "kirichenko_parallel_torsion": "nabla tau = 0 on nearly Kaehler manifolds",
    "classification": "class tag from tau^k_{ij}, tau^{kbar}_{ij}",
    "hessian_comparison_general": "rho_{i jbar} <= [1/rho + sqrt((4 sqrt n + 3) A1^2 + 2 A2 + K)] g",
    "hessian_comparison_nk": "rho_{a bbar} <= a(rho)(g - 2 rho_a rho_bbar) + b(rho) rho_a rho_bbar",
    "diameter": "f <= (sqrt K / 4) cot(sqrt K rho), d(M) <= pi / sqrt K",
    "evolution_second_order": "rho_{k lbar i} rho_ibar + rho_{k lbar ibar} rho_i = -X^2 - AX - XA^* + ...",
    "riccati_scalar": "y' + y^2 = -K, y ~ 1/rho",
    "eigenfunction": "Delta x_k = -lambda_1 x_k",
    "laplacian_equal": "Delta f = Delta^L f",
    "eigenvalue_bound": "lambda_1 >= 2K with quasi Ricci >= K",
    "curvature_bounds": "K_lower, A1 = sup|tau|, A2 = sup|R^{2,0}|",
    "curvature_constants": "first, second, quasi and Levi-Civita Ricci forms",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    suite: str
    model: ModelId
    points: int = 20
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: Optional[str] = None

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if self.model.name not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model.name!r}; expected one of {MODEL_NAMES}")
        if self.points < 1:
            raise ConfigError("points must be >= 1")
        try:
            self.model.resolved()
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None

    def tol(self, identity: str, default: float) -> float:
        return float(self.tolerances.get(identity, default))

    def to_json(self) -> dict:
        mid = self.model.resolved()
        return {
            "suite": self.suite,
            "model": {"name": mid.name, "n": mid.n, "K": mid.K},
            "points": self.points,
            "seed": self.seed,
            "tolerances": dict(sorted(self.tolerances.items())),
        }


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, complex to [re, im], inf/nan to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _residual_entry(r: vf.ResidualReport, tol: float) -> dict:
    return {
        "identity_id": r.identity_id,
        "anchor": ANCHORS.get(r.identity_id, r.identity_id),
        "kind": "residual",
        "value": r.max_residual,
        "tolerance": tol,
        "pass": bool(r.max_residual <= tol),
        "worst_point": None if r.location is None else (r.location if isinstance(r.location, dict) else r.location.to_json()),
        "details": r.details,
    }


def _comparison_entry(r: cmp.ComparisonReport) -> dict:
    return {
        "identity_id": r.check,
        "anchor": ANCHORS.get(r.check, r.check),
        "kind": "margin",
        "value": r.min_margin,
        "tolerance": r.tolerance,
        "pass": bool(r.passed),
        "worst_point": None,
        "details": {**r.details, "rows": r.rows},
    }


def _info_entry(identity: str, value, details: dict) -> dict:
    return {
        "identity_id": identity,
        "anchor": ANCHORS.get(identity, identity),
        "kind": "info",
        "value": value,
        "tolerance": None,
        "pass": True,
        "worst_point": None,
        "details": details,
    }


def _test_function(seed: int) -> Callable:
    rng = np.random.default_rng([seed, 99])
    a, b = rng.standard_normal(8), rng.standard_normal(8)

    def f(X):
        m = X.shape[1]
        return np.sin(X @ a[:m]) + 0.5 * (X @ b[:m]) ** 2 + 0.1 * np.sum(X**3, axis=1)

    return f


# ---------------------------------------------------------------- suites


def suite_verify(M: ManifoldSpec, cfg: RunConfig) -> list:
    pts = random_points(M, cfg.points, cfg.seed)
    f = _test_function(cfg.seed)
    tasks = []

    def structure():
        tol_a = cfg.tol("J_squared", 1e-10)
        reps = vf.check_structure(M, pts, tol_a, vf.TOL_FIRST)
        return [_residual_entry(r, cfg.tol(r.identity_id, r.tolerance)) for r in reps]

    def bianchi():
        per = {}
        for p in pts:
            for r in vf.check_bianchi(M, p):
                per.setdefault(r.identity_id, []).append(r)
        return [_residual_entry(vf.merge(rs), cfg.tol(k, vf.TOL_CURVATURE)) for k, rs in sorted(per.items())]

    def identities():
        per = {}
        for p in pts[: max(1, min(len(pts), 10))]:
            T = FrameTensors.at(M, p, canonical(M))
            for r in vf.check_ricci_identity(M, p, f, tensors=T) + vf.check_connection_comparisons(M, p, f, tensors=T):
                per.setdefault(r.identity_id, []).append(r)
        return [_residual_entry(vf.merge(rs), cfg.tol(k, rs[0].tolerance)) for k, rs in sorted(per.items())]

    def classification():
        c = vf.classify(M, pts[: min(len(pts), 5)])
        e = _info_entry("classification", c.tag, {"declared": c.declared, "evidence": c.evidence})
        e["kind"] = "equality"
        e["pass"] = bool(c.matches_declared)
        return [e]

    def kirichenko():
        r = vf.check_kirichenko(M, pts[: min(len(pts), 5)])
        return [_residual_entry(r, cfg.tol(r.identity_id, r.tolerance))]

    tasks += [structure, bianchi, identities, classification]
    if M.kind in ("nearly_kaehler", "kaehler"):
        tasks.append(kirichenko)
    return tasks


def suite_compare(M: ManifoldSpec, cfg: RunConfig) -> list:
    o = default_origin(M)
    dirs = cmp.sample_directions(M, o, 4, cfg.seed)
    tasks = []

    def riccati():
        from .riccati import RiccatiProblem, riccati_solve, scalar_oracle

        grid = np.linspace(0.01, 3.0, 60)
        worst = 0.0
        for K in (1.0, 0.0, -1.0):
            sol = riccati_solve(RiccatiProblem(S=lambda r, K=K: np.array([[-K]]), rho1=3.0, n=1), grid)
            worst = max(worst, float(np.max(np.abs(sol.X[:, 0, 0] - scalar_oracle(K, grid)))))
        tol = cfg.tol("riccati_scalar", 1e-6)
        return [_residual_entry(vf.ResidualReport("riccati_scalar", worst, None, tol, {"grid": [0.01, 3.0]}), tol)]

    tasks.append(riccati)
    if M.kind in cmp.NK_CLASSES:
        tasks.append(lambda: [_comparison_entry(cmp.check_hessian_comparison_nk(M, o, dirs, tol=cfg.tol("hessian_comparison_nk", cmp.PSD_TOL), seed=cfg.seed))])
    general_grid = (0.1, 0.25, 0.5, 0.75, 1.0)
    tasks.append(
        lambda: [
            _comparison_entry(
                cmp.check_hessian_comparison_general(
                    M, o, dirs, general_grid, tol=cfg.tol("hessian_comparison_general", cmp.PSD_TOL), seed=cfg.seed
                )
            )
        ]
    )
    if M.name in ("cpn_fs", "s6_nk"):
        tasks.append(lambda: [_comparison_entry(cmp.check_diameter(M, o, dirs, tol=cfg.tol("diameter", cmp.PSD_TOL), seed=cfg.seed))])

    def evolution():
        reps = []
        for v in dirs:
            path = cmp.integrate_geodesic(M, o, v, 1.0, rho_grid=(0.2, 0.4, 0.6, 0.8, 1.0))
            reps.append(cmp.check_evolution_identity(M, o, path, (0.2, 0.4, 0.6, 0.8, 1.0), tol=cfg.tol("evolution_second_order", 1e-4)))
        r = vf.merge(reps)
        return [_residual_entry(r, r.tolerance)]

    tasks.append(evolution)
    return tasks


def _sphere_eigen(M: ManifoldSpec) -> tuple:
    R, d = float(M.params["sphere_radius"]), int(M.params["ambient_dim"])
    return (d - 1) / R**2, d


def suite_spectral(M: ManifoldSpec, cfg: RunConfig) -> list:
    pts = random_points(M, min(cfg.points, 20), cfg.seed)
    f = _test_function(cfg.seed)
    tasks = []

    def laplacians():
        worst, where = 0.0, None
        for p in pts:
            r = abs(sp.laplacian_at(M, p, f) - sp.laplacian_at(M, p, f, "levi_civita"))
            if r >= worst:
                worst, where = r, p
        tol = cfg.tol("laplacian_equal", 1e-6)
        if M.kind in ("kaehler", "quasi_kaehler", "nearly_kaehler"):
            return [_residual_entry(vf.ResidualReport("laplacian_equal", worst, where, tol), tol)]
        return [_info_entry("laplacian_equal", worst, {"note": "canonical and Levi-Civita Laplacians differ off the quasi Kaehler class"})]

    tasks.append(laplacians)
    if M.compact and M.embedding is not None:
        lam, d = _sphere_eigen(M)

        def eigen():
            out = []
            for k in range(min(d, 3)):
                tf = sp.TestFunction.coordinate(d, k)
                rs = [sp.check_eigenfunction(M, tf.chart_function(M, p.chart_id), lam, [p]) for p in pts]
                r = vf.merge(rs)
                r.details.update({"function": tf.label, "lambda": lam})
                out.append(_residual_entry(r, cfg.tol("eigenfunction", 1e-5)))
            return out

        tasks.append(eigen)
        tasks.append(
            lambda: [
                _comparison_entry(
                    sp.verify_eigenvalue_bound(M, 100_000, 50, seed=cfg.seed, tol=cfg.tol("eigenvalue_bound", 1e-6))
                )
            ]
        )
    return tasks


def suite_bounds(M: ManifoldSpec, cfg: RunConfig) -> list:
    pts = random_points(M, min(cfg.points, 8), cfg.seed)

    def bounds():
        b = estimate_bounds(M, pts, 64, cfg.seed)
        return [_info_entry("curvature_bounds", {"K_lower": b.K_lower, "A1": b.A1, "A2": b.A2}, b.to_json())]

    def constants():
        rows = []
        for p in pts[:3]:
            T = FrameTensors.at(M, p, canonical(M))
            row = {"point": p.to_json()}
            kinds = ["first", "second"] + (["quasi"] if M.kind in ("kaehler", "quasi_kaehler", "nearly_kaehler") else [])
            for kind in kinds:
                Q = ricci_at(M, p, kind, tensors=T)
                row[kind] = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
            L = levi_civita_ricci(M, p)
            row["levi_civita"] = np.linalg.eigvalsh(0.5 * (L + L.conj().T))
            row["tau_square"] = np.linalg.eigvalsh(0.5 * (tau_square(T) + tau_square(T).conj().T))
            rows.append(row)
        return [_info_entry("curvature_constants", None, {"rows": rows})]

    return [bounds, constants]


SUITE_FUNCS = {"verify": suite_verify, "compare": suite_compare, "spectral": suite_spectral, "bounds": suite_bounds}


def _threads() -> int:
    raw = os.environ.get("AHG_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"AHG_THREADS must be an integer, got {raw!r}")
    if k < 1:
        raise ConfigError("AHG_THREADS must be >= 1")
    return k


def _timed(task: Callable) -> list:
    t0 = time.perf_counter()
    entries = task()
    dt = time.perf_counter() - t0
    for e in entries:
        e["wall_time"] = dt / max(1, len(entries))
    return entries


def run(cfg: RunConfig) -> tuple:
    """Execute the configured suite; returns (exit_code, report dict)."""
    t0 = time.perf_counter()
    report = {"schema_version": SCHEMA_VERSION, "config": cfg.to_json(), "entries": []}
    try:
        M = build_model(cfg.model)
        suites = [s for s in SUITES if s != "all"] if cfg.suite == "all" else [cfg.suite]
        tasks = []
        for s in suites:
            tasks += [(s, t) for t in SUITE_FUNCS[s](M, cfg)]
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(lambda st: _timed(st[1]), tasks))
        for (s, _), entries in zip(tasks, results):
            for e in entries:
                e["suite"] = s
                report["entries"].append(e)
        code = 0 if all(e["pass"] for e in report["entries"]) else 1
    except (GeometryError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 2
    report["summary"] = {
        "checks": len(report["entries"]),
        "failed": sum(1 for e in report["entries"] if not e["pass"]),
        "exit_code": code,
    }
    report["total_wall_time"] = time.perf_counter() - t0
    return code, _clean(report)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def strip_timing(report):
    """Copy of a report without wall-clock fields (for reproducibility comparisons)."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k not in TIMING_KEYS}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report


def _parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tol expects id=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"--tol value for {key!r} is not a number")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ahg", description="Verification reports for almost Hermitian model manifolds.")
    ap.add_argument("--suite", default="verify", help=f"one of {', '.join(SUITES)}")
    ap.add_argument("--model", default="flat_cn", help=f"one of {', '.join(MODEL_NAMES)}")
    ap.add_argument("--n", type=int, default=None, help="complex dimension (flat_cn, cpn_fs, chn_ball)")
    ap.add_argument("--K", type=float, default=None, help="curvature parameter (cpn_fs, chn_ball)")
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", action="append", metavar="ID=VAL", help="override a check tolerance; repeatable")
    ap.add_argument("--out", default=None, help="report path (default: stdout)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = RunConfig(args.suite, ModelId(args.model, args.n, args.K), args.points, args.seed, _parse_tol(args.tol), args.out)
    except ConfigError as exc:
        print(f"ahg: {exc}", file=sys.stderr)
        return 2
    code, report = run(cfg)
    text = dumps(report)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if "error" in report:
        print(f"ahg: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
