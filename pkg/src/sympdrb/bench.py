"""Per-step timing of the basis integrators as a function of the full dimension."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .integrators import basis_step, frozen_field, get_tableau
from .models import ParameterGrid, SWEConfig, SWEModel
from .symplectic import orthosymplectic_from_complex_svd


@dataclass(frozen=True)
class ScalingConfig:
    m_values: tuple = (512, 1024, 2048, 4096)
    methods: tuple = ("rkmk-cay", "tangent")
    tableau: str = "rk4"
    k: int = 8
    samples: tuple = (4, 8)
    dt: float = 1e-3
    steps: int = 60
    warmup: int = 5


@dataclass(frozen=True)
class ScalingRow:
    m: int
    method: str
    median_ns: float
    iqr_ns: float
    steps: int


def _setup(m: int, cfg: ScalingConfig):
    model = SWEModel(SWEConfig(grid_points=m))
    params = ParameterGrid(samples=cfg.samples).points()
    R0 = model.initial(params)
    # a slightly evolved phase so the basis velocity is not degenerate
    R0[m:] = 0.05 * np.sin(2 * np.pi * np.arange(m) / m)[:, None] * (1 + params[:, 1])[None, :]
    U, Z = orthosymplectic_from_complex_svd(R0, cfg.k, check_fullrank=False)
    return model, params, U, Z


def time_basis_steps(m: int, method: str, cfg: ScalingConfig) -> ScalingRow:
    model, params, U, Z = _setup(m, cfg)
    tableau = get_tableau(cfg.tableau)
    field = frozen_field(Z, model, params, rank_tol=0.0)
    samples = []
    for i in range(cfg.warmup + cfg.steps):
        t0 = time.perf_counter_ns()
        U = basis_step(method, U, field, cfg.dt, tableau)
        t1 = time.perf_counter_ns()
        if i >= cfg.warmup:
            samples.append(t1 - t0)
    q25, q50, q75 = np.percentile(samples, [25, 50, 75])
    return ScalingRow(m, method, float(q50), float(q75 - q25), len(samples))


def run_scaling(cfg: ScalingConfig) -> list[ScalingRow]:
    return [time_basis_steps(m, meth, cfg) for m in cfg.m_values for meth in cfg.methods]


def loglog_slope(rows: list[ScalingRow], method: str) -> float:
    pts = sorted((r.m, r.median_ns) for r in rows if r.method == method)
    if len(pts) < 2:
        return float("nan")
    x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])
