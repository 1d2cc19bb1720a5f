"""Time integrators for the reduced basis and coefficients.

Basis methods (all explicit, all exactly on the orthosymplectic manifold up to
roundoff):

* ``rkmk-cay``: Runge-Kutta-Munthe-Kaas with the Cayley coordinate map,
* ``rkmk-exp``: the same with the exponential and a truncated ``dexp^{-1}``,
* ``tangent``:  Runge-Kutta in the tangent space at ``U_m`` through the Cayley
  retraction and its inverse tangent map.

The coefficients use the implicit midpoint rule, and :func:`partitioned_step`
couples the two into a second-order scheme.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cayley as cy
from .errors import (
    CoordinateBreakdownError,
    DegenerateFactorError,
    OverapproximationError,
    StepError,
)
from .flow import (
    GramS,
    coefficient_rhs,
    gradient_block,
    lie_algebra_field,
    velocity_from_gradient,
)
from .models import HamiltonianModel
from .symplectic import RANK_TOL, OrthosymplecticBasis, ReducedState, check_orthosymplectic

log = logging.getLogger(__name__)

# field(U, c) -> horizontal velocity at U for stage abscissa c in [0, 1]
BasisField = Callable[[OrthosymplecticBasis, float], np.ndarray]

BASIS_METHODS = ("rkmk-cay", "rkmk-exp", "tangent")


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: np.ndarray
    b: np.ndarray
    order: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        s = len(b)
        if a.shape != (s, s):
            raise ValueError(f"tableau {self.name}: a must be {s} x {s}")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError(f"tableau {self.name}: weights do not sum to one")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)

    @property
    def explicit(self) -> bool:
        return bool(np.all(np.triu(self.a) == 0.0))


TABLEAUS = {
    "euler": ButcherTableau("euler", [[0.0]], [1.0], 1),
    "explicit_midpoint": ButcherTableau(
        "explicit_midpoint", [[0.0, 0.0], [0.5, 0.0]], [0.0, 1.0], 2
    ),
    "heun": ButcherTableau("heun", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5], 2),
    "rk3": ButcherTableau(
        "rk3",
        [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-1.0, 2.0, 0.0]],
        [1 / 6, 2 / 3, 1 / 6],
        3,
    ),
    "rk4": ButcherTableau(
        "rk4",
        [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1.0, 0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
        4,
    ),
}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name]
    except KeyError:
        raise KeyError(f"unknown tableau {name!r}; choose from {sorted(TABLEAUS)}") from None


@dataclass
class StepReport:
    step: int
    time: float
    dt: float
    orth_defect: float
    sympl_defect: float
    gram_smin: float
    gram_smax: float
    fixed_point_iters: int
    accepted: bool
    retried: bool = False


# ------------------------------------------------------------------ basis steps


def _check_explicit(tableau: ButcherTableau):
    if not tableau.explicit:
        raise ValueError(f"tableau {tableau.name} is not explicit")


def _maybe_recompress(F: cy.LowRankFactors, k: int) -> cy.LowRankFactors:
    return cy.recompress(F) if F.rank > 8 * k else F


def _lie_stages(U: OrthosymplecticBasis, field: BasisField, dt: float,
                tableau: ButcherTableau, inv_diff, apply_map) -> OrthosymplecticBasis:
    """Shared RK-MK stage loop; ``inv_diff(Omega, L)`` and ``apply_map(Omega, Y)``
    select the coordinate map."""
    _check_explicit(tableau)
    k = U.half_reduced_dim
    a, b, c = tableau.a, tableau.b, tableau.c
    lams = []
    for i in range(tableau.stages):
        terms = [(dt * a[i, j], lams[j]) for j in range(i) if a[i, j] != 0.0]
        if terms:
            Om = _maybe_recompress(cy.lowrank_sum(terms), k)
            Ui = OrthosymplecticBasis(apply_map(Om, U.A))
        else:
            Om = cy.LowRankFactors.zero(U.shape[0])
            Ui = U
        L = lie_algebra_field(Ui, field(Ui, c[i]))
        lams.append(inv_diff(Om, L))
    # The final update is applied once, so recompressing it (O(m r^2)) would cost
    # more than the O(m r k) application it shortens.
    Om = cy.lowrank_sum([(dt * b[i], lams[i]) for i in range(tableau.stages) if b[i] != 0.0])
    return OrthosymplecticBasis(apply_map(Om, U.A))


def rkmk_cayley_core(U: OrthosymplecticBasis, field: BasisField, dt: float,
                     tableau: ButcherTableau) -> OrthosymplecticBasis:
    try:
        return _lie_stages(U, field, dt, tableau, cy.dcay_inverse, cy.cayley_apply)
    except DegenerateFactorError as exc:
        raise CoordinateBreakdownError(f"Cayley stage solve failed: {exc}") from exc


def rkmk_exp_core(U: OrthosymplecticBasis, field: BasisField, dt: float,
                  tableau: ButcherTableau, q_bch: int | None = None) -> OrthosymplecticBasis:
    q = tableau.order - 1 if q_bch is None else q_bch

    def inv_diff(Om, L):
        return cy.dexp_inverse_truncated(Om, L, q)

    return _lie_stages(U, field, dt, tableau, inv_diff, cy.exp_apply)


def tangent_core(U: OrthosymplecticBasis, field: BasisField, dt: float,
                 tableau: ButcherTableau, S: np.ndarray | None = None) -> OrthosymplecticBasis:
    _check_explicit(tableau)
    a, b, c = tableau.a, tableau.b, tableau.c
    A = []
    for i in range(tableau.stages):
        if i == 0:
            A.append(field(U, c[0]))
            continue
        V = dt * sum(a[i, j] * A[j] for j in range(i) if a[i, j] != 0.0)
        if np.isscalar(V):
            V = np.zeros(U.shape)
        P = cy.retract(U, V, S, flavor="general", check=False)
        W = field(P, c[i])
        A.append(cy.inverse_tangent_map(U, V, W, S, P=P, flavor="general", check=False))
    V = dt * sum(b[i] * A[i] for i in range(tableau.stages) if b[i] != 0.0)
    return cy.retract(U, V, S, flavor="general", check=False)


def basis_step(method: str, U: OrthosymplecticBasis, field: BasisField, dt: float,
               tableau: ButcherTableau, S: np.ndarray | None = None,
               q_bch: int | None = None) -> OrthosymplecticBasis:
    if method == "rkmk-cay":
        return rkmk_cayley_core(U, field, dt, tableau)
    if method == "rkmk-exp":
        return rkmk_exp_core(U, field, dt, tableau, q_bch)
    if method == "tangent":
        return tangent_core(U, field, dt, tableau, S)
    raise ValueError(f"unknown basis method {method!r}; choose from {BASIS_METHODS}")


def frozen_field(Z: np.ndarray, model: HamiltonianModel, params: np.ndarray,
                 rank_tol: float = RANK_TOL) -> BasisField:
    def field(Ui, c):
        return velocity_from_gradient(Ui, Z, gradient_block(Ui, Z, model, params), rank_tol=rank_tol)

    return field


def rkmk_cayley_step(U, Z, model, params, dt, tableau):
    """One basis step with ``Z`` frozen, Cayley RK-MK."""
    return rkmk_cayley_core(U, frozen_field(Z, model, params), dt, tableau)


def rkmk_exp_step(U, Z, model, params, dt, tableau, q_bch=None):
    return rkmk_exp_core(U, frozen_field(Z, model, params), dt, tableau, q_bch)


def tangent_rk_step(U, Z, model, params, dt, tableau, S=None):
    return tangent_core(U, frozen_field(Z, model, params), dt, tableau, S)


# ------------------------------------------------------------- implicit midpoint

MIDPOINT_TOL = 1e-12
MIDPOINT_MAXITER = 50


def midpoint_fixed_point(phi: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, dt: float,
                         tol: float = MIDPOINT_TOL, max_iter: int = MIDPOINT_MAXITER):
    """Implicit midpoint ``x1 = x0 + dt phi((x0 + x1)/2)`` by fixed-point iteration on
    the midpoint value. Returns ``(x1, iterations)``."""
    mid = x0
    for it in range(1, max_iter + 1):
        new = x0 + 0.5 * dt * phi(mid)
        diff = np.linalg.norm(new - mid)
        mid = new
        if not np.isfinite(diff):
            raise StepError(f"implicit midpoint iteration diverged after {it} iterations; reduce dt")
        if diff <= tol * max(np.linalg.norm(new), 1e-300) or diff == 0.0:
            return 2.0 * mid - x0, it
    raise StepError(
        f"implicit midpoint did not converge in {max_iter} iterations "
        f"(last increment {diff:.3e}); reduce dt"
    )


def implicit_midpoint_Z(U: OrthosymplecticBasis, Z: np.ndarray, model: HamiltonianModel,
                        params: np.ndarray, dt: float, tol: float = MIDPOINT_TOL,
                        max_iter: int = MIDPOINT_MAXITER):
    """Midpoint step of the coefficient system with ``U`` frozen; returns ``(Z1, iters)``."""
    return midpoint_fixed_point(
        lambda Zm: coefficient_rhs(U, Zm, model, params), Z, dt, tol, max_iter
    )


# ---------------------------------------------------------------- coupled scheme


@dataclass(frozen=True)
class SchemeConfig:
    method: str = "tangent"
    tableau: str = "explicit_midpoint"
    S: np.ndarray | None = None
    q_bch: int | None = None
    rank_tol: float = RANK_TOL
    midpoint_tol: float = MIDPOINT_TOL
    midpoint_maxiter: int = MIDPOINT_MAXITER

    def __post_init__(self):
        if self.method not in BASIS_METHODS:
            raise ValueError(f"unknown basis method {self.method!r}")
        get_tableau(self.tableau)


def _euler_basis(method: str, U: OrthosymplecticBasis, F: np.ndarray, h: float,
                 S: np.ndarray | None) -> OrthosymplecticBasis:
    """Explicit Euler basis step reusing an already evaluated velocity ``F``."""
    if method == "tangent":
        return cy.retract(U, h * F, S, flavor="general", check=False)
    L = lie_algebra_field(U, F)
    Om = cy.lowrank_sum([(h, L)])
    apply_map = cy.exp_apply if method == "rkmk-exp" else cy.cayley_apply
    try:
        return OrthosymplecticBasis(apply_map(Om, U.A))
    except DegenerateFactorError as exc:
        raise CoordinateBreakdownError(str(exc)) from exc


def partitioned_step(state: ReducedState, model: HamiltonianModel, params: np.ndarray,
                     dt: float, scheme: SchemeConfig, step: int = 0):
    """One coupled step; returns ``(new_state, report)``.

    1. ``F1 = F(U_m; Z_m)``,
    2. ``U_half``: explicit Euler basis step of size ``dt/2`` reusing ``F1``,
    3. ``Z_{m+1}`` by implicit midpoint with ``U_half`` frozen,
    4. full basis step from ``U_m`` with stage ``i`` using ``Z_m + c_i (Z_{m+1} - Z_m)``.
    """
    tableau = get_tableau(scheme.tableau)
    U, Z0 = state.basis, state.Z
    rt = scheme.rank_tol
    Y1 = gradient_block(U, Z0, model, params)
    F1 = velocity_from_gradient(U, Z0, Y1, rank_tol=rt)
    U_half = _euler_basis(scheme.method, U, F1, 0.5 * dt, scheme.S)
    Z1, iters = midpoint_fixed_point(
        lambda Zm: coefficient_rhs(U_half, Zm, model, params),
        Z0, dt, scheme.midpoint_tol, scheme.midpoint_maxiter,
    )
    dZ = Z1 - Z0

    def field(Ui, c):
        if c == 0.0 and Ui is U:
            return F1
        Zc = Z0 + c * dZ
        return velocity_from_gradient(Ui, Zc, gradient_block(Ui, Zc, model, params), rank_tol=rt)

    U1 = basis_step(scheme.method, U, field, dt, tableau, scheme.S, scheme.q_bch)
    defects = check_orthosymplectic(U1.full)
    gram = GramS.from_Z(Z1)
    report = StepReport(
        step=step,
        time=state.time + dt,
        dt=dt,
        orth_defect=defects.orth_defect,
        sympl_defect=defects.sympl_defect,
        gram_smin=gram.smin,
        gram_smax=gram.smax,
        fixed_point_iters=iters,
        accepted=True,
    )
    return ReducedState(U1, Z1, state.time + dt), report


@dataclass
class ReducedTrajectory:
    times: np.ndarray
    states: list
    hamiltonians: np.ndarray        # (n_saves, p)
    reports: list = field(default_factory=list)

    @property
    def final(self) -> ReducedState:
        return self.states[-1]

    def max_defect(self) -> float:
        if not self.reports:
            return 0.0
        return max(max(r.orth_defect, r.sympl_defect) for r in self.reports)


def _n_steps(T: float, dt: float) -> int:
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def integrate(state: ReducedState, model: HamiltonianModel, params: np.ndarray, dt: float,
              T: float, scheme: SchemeConfig, save_stride: int = 1,
              keep_states: bool = True) -> ReducedTrajectory:
    """Fixed-step time loop.

    A step failing with a coordinate breakdown, a midpoint failure or a lost
    full-rank condition is retried once as two half steps; a second failure raises
    :class:`StepError` carrying the step index.
    """
    n = _n_steps(T, dt)
    t0 = state.time
    times = [t0]
    states = [state]
    H = [np.atleast_1d(model.hamiltonian(state.reconstruct(), params))]
    reports = []
    retry_errors = (CoordinateBreakdownError, StepError, OverapproximationError)
    for m in range(1, n + 1):
        try:
            new, rep = partitioned_step(state, model, params, dt, scheme, step=m)
        except retry_errors as exc:
            log.warning("step %d failed (%s); retrying with two half steps", m, exc)
            try:
                half, r1 = partitioned_step(state, model, params, dt / 2, scheme, step=m)
                new, rep = partitioned_step(half, model, params, dt / 2, scheme, step=m)
                rep.fixed_point_iters += r1.fixed_point_iters
                rep.retried = True
            except retry_errors as exc2:
                raise StepError(f"step {m} failed after retry: {exc2}", step=m) from exc2
        # keep the nominal grid exact
        state = ReducedState(new.basis, new.Z, t0 + m * dt)
        reports.append(rep)
        if m % save_stride == 0 or m == n:
            times.append(state.time)
            H.append(np.atleast_1d(model.hamiltonian(state.reconstruct(), params)))
            if keep_states or m == n:
                states.append(state)
    return ReducedTrajectory(np.array(times), states, np.array(H), reports)


# ------------------------------------------------------------- full-order model


@dataclass
class FullTrajectory:
    times: np.ndarray
    states: list        # each 2m x p

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def full_order_solve(model: HamiltonianModel, params: np.ndarray, dt: float, T: float,
                     R0: np.ndarray | None = None, save_stride: int = 1,
                     save_final: bool = True, tol: float = MIDPOINT_TOL,
                     max_iter: int = MIDPOINT_MAXITER) -> FullTrajectory:
    """Implicit midpoint on ``du/dt = J grad H(u; eta)`` for all parameter columns at once.

    States are saved at ``t0`` and every ``save_stride`` steps, plus the final time
    when ``save_final`` is set.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    R = model.initial(params) if R0 is None else np.array(R0, dtype=float)
    n = _n_steps(T, dt)
    times, states = [0.0], [R]

    def phi(X):
        return model.field(X, params)

    for m in range(1, n + 1):
        try:
            R, _ = midpoint_fixed_point(phi, R, dt, tol, max_iter)
        except StepError as exc:
            raise StepError(f"full-order solve failed at step {m}: {exc}", step=m) from exc
        if m % save_stride == 0 or (save_final and m == n):
            times.append(m * dt)
            states.append(R)
    return FullTrajectory(np.array(times), states)
