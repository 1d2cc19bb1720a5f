"""Global symplectic reduced basis baseline.

Offline: full-order snapshots on a training grid, one orthosymplectic basis from
their complex SVD. Online: Galerkin-symplectic reduced system
``dz/dt = J_2k U^T grad H(U z; eta)`` integrated with the implicit midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepError
from .integrators import _n_steps, full_order_solve, midpoint_fixed_point
from .models import HamiltonianModel
from .symplectic import OrthosymplecticBasis, apply_J, orthosymplectic_from_complex_svd


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Columns ordered parameter-major, time-minor, starting at ``t0``."""

    matrix: np.ndarray
    n_params: int
    n_times: int
    stride: int
    train_params: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[1] != self.n_params * self.n_times:
            raise ValueError("snapshot column count does not match the sampling metadata")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("snapshot matrix has non-finite entries")


def collect_snapshots(model: HamiltonianModel, train_params: np.ndarray, dt: float, T: float,
                      stride: int) -> SnapshotSet:
    train_params = np.atleast_2d(np.asarray(train_params, dtype=float))
    blocks = []
    for i, eta in enumerate(train_params):
        try:
            traj = full_order_solve(model, eta[None, :], dt, T, save_stride=stride, save_final=False)
        except StepError as exc:
            raise StepError(f"training parameter {i}: {exc}", step=exc.step) from exc
        blocks.append(np.hstack(traj.states))
    n_times = blocks[0].shape[1]
    return SnapshotSet(np.hstack(blocks), len(train_params), n_times, stride, train_params)


def global_basis(snapshots: SnapshotSet, k: int) -> OrthosymplecticBasis:
    basis, _ = orthosymplectic_from_complex_svd(snapshots.matrix, k, check_fullrank=False)
    return basis


@dataclass
class GlobalTrajectory:
    times: np.ndarray
    coefficients: list      # each p x 2k
    basis: OrthosymplecticBasis
    initial_projection_defect: float
    hamiltonians: np.ndarray

    def reconstruct(self, i: int = -1) -> np.ndarray:
        return self.basis.full @ self.coefficients[i].T


def global_reduced_solve(basis: OrthosymplecticBasis, model: HamiltonianModel,
                         params: np.ndarray, dt: float, T: float,
                         save_stride: int = 1) -> GlobalTrajectory:
    """Online phase for all test parameters at once; ``z0 = U^T u0(eta)``."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    Uf = basis.full
    R0 = model.initial(params)
    Z = (Uf.T @ R0).T
    proj_defect = float(np.linalg.norm(R0 - Uf @ Z.T))

    def phi(Zc):
        return apply_J(Uf.T @ model.gradient(Uf @ Zc.T, params)).T

    n = _n_steps(T, dt)
    times, coeffs = [0.0], [Z]
    H = [model.hamiltonian(Uf @ Z.T, params)]
    for m in range(1, n + 1):
        try:
            Z, _ = midpoint_fixed_point(phi, Z, dt)
        except StepError as exc:
            raise StepError(f"global reduced solve failed at step {m}: {exc}", step=m) from exc
        if m % save_stride == 0 or m == n:
            times.append(m * dt)
            coeffs.append(Z)
            H.append(model.hamiltonian(Uf @ Z.T, params))
    return GlobalTrajectory(np.array(times), coeffs, basis, proj_defect, np.array(H))
