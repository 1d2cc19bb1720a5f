"""Experiment driver: full model, dynamical RBM and global RBM, plus CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cayley import random_gauge
from .config import ExperimentConfig
from .global_rbm import collect_snapshots, global_basis, global_reduced_solve
from .integrators import SchemeConfig, full_order_solve, integrate
from .models import (
    HamiltonianModel,
    LinearOscillatorModel,
    OscillatorConfig,
    ParameterGrid,
    SWEConfig,
    SWEModel,
)
from .symplectic import ReducedState, orthosymplectic_from_complex_svd

log = logging.getLogger(__name__)

STEP_FIELDS = (
    "step", "time", "dt", "orth_defect", "sympl_defect",
    "gram_smin", "gram_smax", "fixed_point_iters", "accepted", "retried",
)


def build_model(cfg: ExperimentConfig) -> HamiltonianModel:
    mdl = cfg.model
    if mdl.name == "swe":
        return SWEModel(SWEConfig(L=mdl.L, grid_points=mdl.grid_points, T=cfg.time.T, dt=cfg.time.dt))
    return LinearOscillatorModel(
        OscillatorConfig(mdl.m, mdl.frequencies, mdl.momentum_weights, seed=cfg.seed),
        n_params=len(cfg.grid.ranges),
    )


def build_gauge(cfg: ExperimentConfig, k: int, rng: np.random.Generator):
    if cfg.reduction.gauge == "zero":
        return None
    scale = float(cfg.reduction.gauge.split(":", 1)[1])
    return random_gauge(k, rng, scale)


def scheme_for(cfg: ExperimentConfig, method: str, S) -> SchemeConfig:
    tol = cfg.tolerances
    return SchemeConfig(
        method=method,
        tableau=cfg.reduction.tableau,
        S=S,
        q_bch=cfg.reduction.q_bch,
        rank_tol=tol.rank_tol,
        midpoint_tol=tol.midpoint_tol,
        midpoint_maxiter=tol.midpoint_maxiter,
    )


@dataclass
class MethodRun:
    method: str
    n2k: int
    runtime_seconds: float
    error: float
    times: np.ndarray
    hamiltonians: np.ndarray      # (n_saves, p)
    steps: list = field(default_factory=list)
    max_defect: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list
    dx: float | None

    def errors_rows(self):
        for r in self.runs:
            row = {
                "method": r.method,
                "2k": r.n2k,
                "runtime_seconds": f"{r.runtime_seconds:.6f}",
                "frobenius_error_at_T": f"{r.error:.17g}",
            }
            row["frobenius_error_dx_weighted"] = (
                f"{r.error * np.sqrt(self.dx):.17g}" if self.dx is not None else ""
            )
            yield row

    def drift_rows(self):
        for r in self.runs:
            dH = r.hamiltonians - r.hamiltonians[0]
            for t, row in zip(r.times, dH):
                yield {
                    "method": r.method,
                    "2k": r.n2k,
                    "time": f"{t:.10g}",
                    "sum_abs_drift": f"{np.abs(row).sum():.17g}",
                    "abs_sum_drift": f"{abs(row.sum()):.17g}",
                }

    def step_rows(self):
        for r in self.runs:
            for rep in r.steps:
                d = asdict(rep)
                row = {"method": r.method, "2k": r.n2k}
                for k in STEP_FIELDS:
                    v = d[k]
                    row[k] = f"{v:.17g}" if isinstance(v, float) else str(v)
                yield row

    def max_defect(self) -> float:
        return max((r.max_defect for r in self.runs), default=0.0)


def _run_full(cfg, model, params):
    tm = cfg.time
    t0 = time.perf_counter()
    traj = full_order_solve(
        model, params, tm.dt, tm.T, save_stride=tm.save_stride,
        tol=cfg.tolerances.midpoint_tol, max_iter=cfg.tolerances.midpoint_maxiter,
    )
    runtime = time.perf_counter() - t0
    H = np.array([model.hamiltonian(R, params) for R in traj.states])
    return traj, MethodRun("full", model.dim, runtime, 0.0, traj.times, H)


def _run_dynamical(cfg, model, params, R0, RT, n2k, method, rng):
    k = n2k // 2
    S = build_gauge(cfg, k, rng)
    t0 = time.perf_counter()
    U0, Z0 = orthosymplectic_from_complex_svd(R0, k, rank_tol=cfg.tolerances.rank_tol)
    traj = integrate(
        ReducedState(U0, Z0, 0.0), model, params, cfg.time.dt, cfg.time.T,
        scheme_for(cfg, method, S), save_stride=cfg.time.save_stride, keep_states=False,
    )
    runtime = time.perf_counter() - t0
    err = float(np.linalg.norm(traj.final.reconstruct() - RT))
    return MethodRun(
        method, n2k, runtime, err, traj.times, traj.hamiltonians, traj.reports,
        traj.max_defect(),
    )


def _run_global(cfg, model, params, RT, n2k, snapshots_cache):
    red, tm = cfg.reduction, cfg.time
    if "snap" not in snapshots_cache:
        train = ParameterGrid(cfg.grid.ranges, red.global_train_samples).points()
        t0 = time.perf_counter()
        snapshots_cache["snap"] = collect_snapshots(model, train, tm.dt, tm.T, red.global_stride)
        snapshots_cache["offline_seconds"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    basis = global_basis(snapshots_cache["snap"], n2k // 2)
    traj = global_reduced_solve(basis, model, params, tm.dt, tm.T, save_stride=tm.save_stride)
    # snapshots are shared across sizes but charged to each run as if standalone
    runtime = time.perf_counter() - t0 + snapshots_cache["offline_seconds"]
    err = float(np.linalg.norm(traj.reconstruct() - RT))
    defects = basis.defects()
    return MethodRun(
        "global", n2k, runtime, err, traj.times, traj.hamiltonians, [],
        defects.worst, {"initial_projection_defect": traj.initial_projection_defect},
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    model = build_model(cfg)
    params = ParameterGrid(cfg.grid.ranges, cfg.grid.samples).points()
    rng = np.random.default_rng(cfg.seed)
    R0 = model.initial(params)
    log.info("full-order reference: dim %d, p %d", model.dim, len(params))
    full_traj, full_run = _run_full(cfg, model, params)
    RT = full_traj.final
    runs = [full_run]
    cache: dict = {}
    for n2k in cfg.reduction.sizes:
        for method in cfg.reduction.methods:
            log.info("dynamical %s, 2k=%d", method, n2k)
            runs.append(_run_dynamical(cfg, model, params, R0, RT, n2k, method, rng))
        if cfg.reduction.run_global:
            log.info("global, 2k=%d", n2k)
            runs.append(_run_global(cfg, model, params, RT, n2k, cache))
    dx = model.dx if isinstance(model, SWEModel) else None
    return ExperimentResult(cfg, runs, dx)


# ---------------------------------------------------------------------- output


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(fieldnames, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_artifacts(result: ExperimentResult, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    cfg = result.config
    _atomic_write(out / "errors.csv", _csv_text(
        ["method", "2k", "runtime_seconds", "frobenius_error_at_T", "frobenius_error_dx_weighted"],
        result.errors_rows(),
    ))
    _atomic_write(out / "hamiltonian_drift.csv", _csv_text(
        ["method", "2k", "time", "sum_abs_drift", "abs_sum_drift"], result.drift_rows(),
    ))
    _atomic_write(out / "steps.csv", _csv_text(["method", "2k", *STEP_FIELDS], result.step_rows()))
    gate = cfg.tolerances.manifold_gate
    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": {
            "sympdrb": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "conventions": {
            "frobenius_error": "unweighted over all 2m x p entries; dx-weighted copy in its own column",
            "hamiltonian": "discrete SWE Hamiltonian without dx weighting",
            "sum_abs_drift": "sum_j |H_j(t) - H_j(0)|",
            "abs_sum_drift": "|sum_j H_j(t) - sum_j H_j(0)|",
            "global_runtime": "includes offline snapshot collection",
            "deterministic_columns": "all except runtime_seconds",
            "gauge": cfg.reduction.gauge,
        },
        "manifold_defects": {
            f"{r.method}:{r.n2k}": r.max_defect for r in result.runs if r.method != "full"
        },
        "max_manifold_defect": result.max_defect(),
        "manifold_gate": gate,
        "gate_passed": bool(result.max_defect() <= gate),
        "global_initial_projection_defect": {
            str(r.n2k): r.extra["initial_projection_defect"]
            for r in result.runs if r.method == "global"
        },
    }
    _atomic_write(out / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta
