"""Reduced dynamics on the manifold of pairs ``(U, Z)``.

The basis obeys ``dU/dt = F(U)`` with ``F`` horizontal at ``U`` and the coefficients
obey ``dZ_j/dt = J_2k U^T grad H(U Z_j^T; eta_j)``. Projectors ``I - U U^T`` are
applied as two thin products, so everything is linear in ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cayley import LowRankFactors, horizontal_defects
from .errors import ModelError, OverapproximationError, TangentError
from .models import HamiltonianModel
from .symplectic import (
    RANK_TOL,
    OrthosymplecticBasis,
    ReducedState,
    apply_J,
    apply_J_right,
    gram_matrix,
)


@dataclass(frozen=True, eq=False)
class GramS:
    """Eigen-factored ``S = Z^T Z + J^T Z^T Z J``."""

    S: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray

    @classmethod
    def from_Z(cls, Z: np.ndarray) -> "GramS":
        S = gram_matrix(Z)
        ev, W = np.linalg.eigh(S)
        return cls(S, ev, W)

    @property
    def smin(self) -> float:
        return float(max(self.evals[0], 0.0))

    @property
    def smax(self) -> float:
        return float(self.evals[-1])

    @property
    def cond_estimate(self) -> float:
        return self.smax / self.smin if self.smin > 0 else np.inf

    def ok(self, rank_tol: float = RANK_TOL) -> bool:
        return self.smax > 0 and self.smin >= rank_tol * self.smax

    def solve_right(self, B: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
        """``B S^{-1}``; raises when the full-rank condition fails."""
        if not self.ok(rank_tol):
            raise OverapproximationError(
                f"Z^T Z + J^T Z^T Z J is singular (smin/smax = "
                f"{self.smin / self.smax if self.smax > 0 else 0.0:.3e}); "
                "reduce 2k or add parameter samples"
            )
        return ((B @ self.evecs) / self.evals) @ self.evecs.T


@dataclass(frozen=True)
class FullRankReport:
    smin: float
    smax: float
    ok: bool


def fullrank_monitor(Z: np.ndarray, rank_tol: float = RANK_TOL) -> FullRankReport:
    g = GramS.from_Z(Z)
    return FullRankReport(g.smin, g.smax, g.ok(rank_tol))


def gradient_block(U: OrthosymplecticBasis, Z: np.ndarray, model: HamiltonianModel,
                   params: np.ndarray) -> np.ndarray:
    """``Y[:, j] = grad H(U Z_j^T; eta_j)``."""
    Y = model.gradient(U.full @ Z.T, params)
    if not np.all(np.isfinite(Y)):
        raise ModelError("model gradient returned non-finite values")
    return Y


def velocity_from_gradient(U: OrthosymplecticBasis, Z: np.ndarray, Y: np.ndarray,
                           gram: GramS | None = None,
                           rank_tol: float = RANK_TOL) -> np.ndarray:
    """``(I - U U^T)(J Y Z - Y Z J_2k^T) S^{-1}``."""
    Uf = U.full
    YZ = Y @ Z
    B = apply_J(YZ) - apply_J_right(YZ, transpose=True)
    B = B - Uf @ (Uf.T @ B)
    if gram is None:
        gram = GramS.from_Z(Z)
    return gram.solve_right(B, rank_tol)


def basis_velocity(U: OrthosymplecticBasis, Z: np.ndarray, model: HamiltonianModel,
                   params: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    return velocity_from_gradient(U, Z, gradient_block(U, Z, model, params), rank_tol=rank_tol)


def coefficient_rhs_from_gradient(U: OrthosymplecticBasis, Y: np.ndarray) -> np.ndarray:
    return apply_J(U.full.T @ Y).T


def coefficient_rhs(U: OrthosymplecticBasis, Z: np.ndarray, model: HamiltonianModel,
                    params: np.ndarray) -> np.ndarray:
    """Rows ``(J_2k U^T grad H(U Z_j^T; eta_j))^T``, shape ``p x 2k``."""
    return coefficient_rhs_from_gradient(U, gradient_block(U, Z, model, params))


def lie_algebra_field(U: OrthosymplecticBasis, F: np.ndarray, check: bool = False,
                      tol: float = 1e-8) -> LowRankFactors:
    """Factors ``[F | -U]``, ``[U | F]`` of ``F U^T - U F^T``."""
    Uf = U.full
    if check:
        d = max(horizontal_defects(Uf, F))
        if d > tol * max(1.0, np.linalg.norm(F)):
            raise TangentError(f"F is not horizontal at U (defect {d:.2e})")
    return LowRankFactors(np.hstack([F, -Uf]), np.hstack([Uf, F]))


def tangent_projection(U: OrthosymplecticBasis, Z: np.ndarray, w: np.ndarray,
                       rank_tol: float = RANK_TOL) -> np.ndarray:
    """Symplectic projection of ``w`` (``2m x p``) onto the tangent space at ``U Z^T``."""
    Uf = U.full
    wZ = w @ Z
    B = wZ + apply_J(apply_J_right(wZ, transpose=True))
    B = B - Uf @ (Uf.T @ B)
    gram = GramS.from_Z(Z)
    return gram.solve_right(B, rank_tol) @ Z.T + Uf @ (Uf.T @ w)


def hamiltonians(state: ReducedState, model: HamiltonianModel, params: np.ndarray) -> np.ndarray:
    return np.atleast_1d(model.hamiltonian(state.reconstruct(), params))


def hamiltonian_sum(state: ReducedState, model: HamiltonianModel, params: np.ndarray) -> float:
    return float(np.sum(hamiltonians(state, model, params)))


def energy_rate(U: OrthosymplecticBasis, Z: np.ndarray, model: HamiltonianModel,
                params: np.ndarray) -> float:
    """``sum_j <grad H_j, dR_j/dt>`` for the coupled reduced field (zero in exact arithmetic)."""
    Y = gradient_block(U, Z, model, params)
    F = velocity_from_gradient(U, Z, Y)
    Zdot = coefficient_rhs_from_gradient(U, Y)
    Rdot = F @ Z.T + U.full @ Zdot.T
    return float(np.sum(Y * Rdot))
