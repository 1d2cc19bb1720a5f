"""Cayley coordinate map, retraction and their low-rank evaluation.

Elements of the Lie algebra ``so(2m) ∩ sp(2m)`` that show up in the integrators are
always low rank and are handled as factor pairs ``Omega = alpha @ beta.T``
(:class:`LowRankFactors`). Every routine here costs ``O(m r^2)`` at most and never
forms a ``2m x 2m`` matrix, except the ``*_dense`` helpers used as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .errors import (
    CoordinateBreakdownError,
    DegenerateFactorError,
    DimensionError,
    TangentError,
)
from .symplectic import OrthosymplecticBasis, apply_J, apply_J_right

SOLVE_RCOND = 1e-13
RECOMPRESS_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class LowRankFactors:
    """``Omega = alpha @ beta.T`` with ``alpha, beta`` of shape ``2m x r``."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if self.alpha.shape != self.beta.shape:
            raise DimensionError(
                f"factor shapes differ: {self.alpha.shape} vs {self.beta.shape}"
            )

    @property
    def rank(self) -> int:
        return self.alpha.shape[1]

    @property
    def dim(self) -> int:
        return self.alpha.shape[0]

    def dense(self) -> np.ndarray:
        return self.alpha @ self.beta.T

    def matvec(self, Y: np.ndarray) -> np.ndarray:
        return self.alpha @ (self.beta.T @ Y)

    @classmethod
    def zero(cls, n: int) -> "LowRankFactors":
        return cls(np.zeros((n, 0)), np.zeros((n, 0)))


def _pivoted_solve(K: np.ndarray, B: np.ndarray, rcond: float = SOLVE_RCOND):
    """Solve ``K X = B`` by column-pivoted QR; returns ``None`` if ``K`` is singular."""
    fac = sla.qr(K, pivoting=True)
    d = np.abs(np.diag(fac[1]))
    if d.size and (d[0] == 0 or d[-1] < rcond * d[0]):
        return None
    return _qr_solve(fac, B)


def _qr_solve(fac, B: np.ndarray) -> np.ndarray:
    Qk, Rk, piv = fac
    Y = sla.solve_triangular(Rk, Qk.T @ B)
    X = np.empty_like(Y)
    X[piv] = Y
    return X


# --------------------------------------------------------------------------- Cayley


def cayley_dense(Omega: np.ndarray) -> np.ndarray:
    """``(I - Omega/2)^{-1} (I + Omega/2)`` for a square matrix."""
    n = Omega.shape[0]
    eye = np.eye(n)
    try:
        return np.linalg.solve(eye - Omega / 2, eye + Omega / 2)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFactorError("I - Omega/2 is singular") from exc


def cayley_apply(Omega: LowRankFactors, Y: np.ndarray) -> np.ndarray:
    """``cay(alpha beta^T) @ Y`` via ``Y - alpha (beta^T alpha / 2 - I)^{-1} beta^T Y``."""
    if Omega.rank == 0:
        return np.array(Y, dtype=float, copy=True)
    alpha, beta = Omega.alpha, Omega.beta
    K = 0.5 * (beta.T @ alpha) - np.eye(Omega.rank)
    X = _pivoted_solve(K, beta.T @ Y)
    if X is None:
        raise DegenerateFactorError(
            "beta^T alpha / 2 - I is singular; recompress the factors"
        )
    return Y - alpha @ X


def cayley_apply_analytic(Omega: LowRankFactors, Y: np.ndarray) -> np.ndarray:
    """Cross-check route ``Y + alpha f(beta^T alpha) beta^T Y`` with
    ``f(A) = A^{-1}(cay(A) - I)``. Needs ``beta^T alpha`` invertible."""
    if Omega.rank == 0:
        return np.array(Y, dtype=float, copy=True)
    A = Omega.beta.T @ Omega.alpha
    fA = _pivoted_solve(A, cayley_dense(A) - np.eye(Omega.rank))
    if fA is None:
        raise DegenerateFactorError("beta^T alpha is singular")
    return Y + Omega.alpha @ (fA @ (Omega.beta.T @ Y))


def dcay_inverse(Omega: LowRankFactors, L: LowRankFactors) -> LowRankFactors:
    """Factors of ``(I - Omega/2) gamma delta^T (I + Omega/2)`` for ``L = gamma delta^T``."""
    if L.dim != Omega.dim:
        raise DimensionError("Omega and L act on different spaces")
    if Omega.rank == 0:
        return L
    a, b = Omega.alpha, Omega.beta
    e = L.alpha - 0.5 * (a @ (b.T @ L.alpha))
    f = L.beta + 0.5 * (b @ (a.T @ L.beta))
    return LowRankFactors(e, f)


def lowrank_sum(terms) -> LowRankFactors:
    """``sum_i c_i alpha_i beta_i^T`` by column concatenation.

    The weight is split as ``sign(c) sqrt|c|`` on alpha and ``sqrt|c|`` on beta.
    """
    terms = [(float(c), F) for c, F in terms]
    if not terms:
        raise DimensionError("empty sum")
    n = terms[0][1].dim
    alphas, betas = [], []
    for c, F in terms:
        if F.dim != n:
            raise DimensionError("terms act on different spaces")
        if c == 0.0 or F.rank == 0:
            continue
        s = math.sqrt(abs(c))
        alphas.append(F.alpha * (s if c > 0 else -s))
        betas.append(F.beta * s)
    if not alphas:
        return LowRankFactors.zero(n)
    return LowRankFactors(np.hstack(alphas), np.hstack(betas))


def thin_qr(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of a tall matrix.

    Tall inputs go through shifted Cholesky-QR with two re-orthogonalization
    passes (Gram products and triangular solves only, so BLAS-3 speed); if a
    Cholesky factorization breaks down, as it does for numerically rank-deficient
    ``A``, Householder QR is used instead.
    """
    n, r = A.shape
    if n <= 4 * r:
        return np.linalg.qr(A)
    eps = np.finfo(float).eps
    G = A.T @ A
    shift = 11.0 * (n * r + r * (r + 1)) * eps * np.trace(G)
    try:
        R = sla.cholesky(G + shift * np.eye(r))
        Q = sla.solve_triangular(R, A.T, trans="T").T
        for _ in range(2):
            R2 = sla.cholesky(Q.T @ Q)
            Q = sla.solve_triangular(R2, Q.T, trans="T").T
            R = R2 @ R
    except np.linalg.LinAlgError:
        return np.linalg.qr(A)
    if not np.all(np.isfinite(Q)):
        return np.linalg.qr(A)
    return Q, R


def recompress(F: LowRankFactors, tol: float = RECOMPRESS_TOL) -> LowRankFactors:
    """Re-factor ``alpha beta^T`` with thin QRs and an SVD of the core, dropping
    singular values below ``tol`` relative to the largest."""
    if F.rank == 0:
        return F
    Qa, Ra = thin_qr(F.alpha)
    Qb, Rb = thin_qr(F.beta)
    Uc, s, Vct = np.linalg.svd(Ra @ Rb.T)
    if s[0] == 0.0:
        return LowRankFactors.zero(F.dim)
    keep = int(np.count_nonzero(s > tol * s[0]))
    return LowRankFactors(Qa @ (Uc[:, :keep] * s[:keep]), Qb @ Vct[:keep].T)


# ----------------------------------------------------------------- gauge & tangent


def gauge_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``[[A, B], [B, -A]]`` for symmetric ``A, B``: an element of ``sym ∩ sp``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionError("gauge blocks must be square and of equal size")
    if not (np.allclose(A, A.T, atol=1e-14) and np.allclose(B, B.T, atol=1e-14)):
        raise TangentError("gauge blocks must be symmetric")
    return np.block([[A, B], [B, -A]])


def random_gauge(k: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((k, k))
    B = rng.standard_normal((k, k))
    return scale * gauge_matrix((A + A.T) / 2, (B + B.T) / 2)


def horizontal_defects(Q: np.ndarray, V: np.ndarray) -> tuple[float, float]:
    """``(||Q^T V||, ||V J_2k - J V||)``; both vanish iff ``V`` is horizontal at ``Q``."""
    return (
        float(np.linalg.norm(Q.T @ V)),
        float(np.linalg.norm(apply_J_right(V) - apply_J(V))),
    )


def tangent_defects(Q: np.ndarray, V: np.ndarray) -> tuple[float, float]:
    """``(||Q^T V + V^T Q||, ||V J_2k - J V||)``; both vanish iff ``V`` is tangent at ``Q``."""
    X = Q.T @ V
    return (
        float(np.linalg.norm(X + X.T)),
        float(np.linalg.norm(apply_J_right(V) - apply_J(V))),
    )


def _as_full(Q) -> np.ndarray:
    return Q.full if isinstance(Q, OrthosymplecticBasis) else np.asarray(Q, dtype=float)


def _check_flavor(Q: np.ndarray, V: np.ndarray, flavor: str, tol: float):
    scale = max(1.0, float(np.linalg.norm(V)))
    if flavor == "horizontal":
        d1, d2 = horizontal_defects(Q, V)
    elif flavor == "general":
        d1, d2 = tangent_defects(Q, V)
    else:
        raise ValueError(f"unknown tangent flavor {flavor!r}")
    if max(d1, d2) > tol * scale:
        raise TangentError(
            f"V is not a {flavor} tangent vector at Q (defects {d1:.2e}, {d2:.2e})"
        )


def theta_map(Q, V: np.ndarray, S: np.ndarray | None = None, flavor: str = "horizontal",
              check: bool = True, tol: float = 1e-8) -> np.ndarray:
    """``V + Q (S - Q^T V / 2)``; reduces to ``V + Q S`` for horizontal ``V``.

    ``flavor="general"`` admits any tangent ``V`` (``Q^T V`` in ``so ∩ sp``), which
    the stage points of the tangent RK scheme need.
    """
    Qf = _as_full(Q)
    if V.shape != Qf.shape:
        raise DimensionError(f"V has shape {V.shape}, expected {Qf.shape}")
    if check:
        _check_flavor(Qf, V, flavor, tol)
    inner = -0.5 * (Qf.T @ V)
    if S is not None:
        inner = inner + S
    return V + Qf @ inner


def retraction_factors(Q, V: np.ndarray, S: np.ndarray | None = None,
                       flavor: str = "horizontal", check: bool = True) -> LowRankFactors:
    """Factors ``alpha = [Theta | -Q]``, ``beta = [Q | Theta]`` of ``Upsilon_Q(V)``."""
    Qf = _as_full(Q)
    Theta = theta_map(Qf, V, S, flavor=flavor, check=check)
    return LowRankFactors(np.hstack([Theta, -Qf]), np.hstack([Qf, Theta]))


def retract(Q: OrthosymplecticBasis, V: np.ndarray, S: np.ndarray | None = None,
            flavor: str = "horizontal", check: bool = True) -> OrthosymplecticBasis:
    """``cay(Theta Q^T - Q Theta^T) Q``, evaluated on the ``A`` block only."""
    F = retraction_factors(Q, V, S, flavor=flavor, check=check)
    try:
        A = cayley_apply(F, Q.A)
    except DegenerateFactorError as exc:
        raise CoordinateBreakdownError(
            "retraction solve is singular; the step is too large"
        ) from exc
    return OrthosymplecticBasis(A)


def inverse_tangent_map(Q: OrthosymplecticBasis, V: np.ndarray, W: np.ndarray,
                        S: np.ndarray | None = None, P: OrthosymplecticBasis | None = None,
                        flavor: str = "horizontal", check: bool = True) -> np.ndarray:
    """Solve ``dR_Q|_V (Vt) = W`` for ``Vt`` tangent at ``Q``.

    ``W`` must be tangent at ``P = R_Q(V)`` (pass ``P`` to skip recomputing it).
    """
    Qf = Q.full
    F = retraction_factors(Qf, V, S, flavor=flavor, check=check)
    if P is None:
        try:
            P = OrthosymplecticBasis(cayley_apply(F, Q.A))
        except DegenerateFactorError as exc:
            raise CoordinateBreakdownError("retraction solve is singular") from exc
    Pf = P.full
    n2k = Qf.shape[1]
    eye = np.eye(n2k)
    PQ = Pf + Qf
    M = Qf.T @ Pf + eye
    # T2 = (2I - Upsilon) W M^{-1}
    rhs = 2.0 * W - F.matvec(W)
    Mt_fac = sla.qr(M.T, pivoting=True)
    d = np.abs(np.diag(Mt_fac[1]))
    if d[0] == 0 or d[-1] < SOLVE_RCOND * d[0]:
        raise CoordinateBreakdownError(
            "Q^T R_Q(V) + I is singular (spectrum near -1); reduce the time step"
        )
    T2 = _qr_solve(Mt_fac, rhs.T).T
    # skew part of T1 is -(P^T Q + I)^{-1} (P + Q)^T T2
    skw = _qr_solve(Mt_fac, PQ.T @ T2)
    QtT2 = Qf.T @ T2
    sym = -(QtT2 + QtT2.T)
    if S is not None:
        sym = sym + 2.0 * S
    T1 = 0.5 * (sym - skw)
    Theta = Qf @ T1 + T2
    return Theta - Qf @ (Theta.T @ Qf)


# --------------------------------------------------------------------- exponential


@dataclass(frozen=True)
class BCHTable:
    """``c[k, h]`` with ``ad_A^k(B) = sum_h c[k, h] A^h B A^(k-h)`` and Bernoulli
    numbers ``B_0..B_q`` (``B_1 = -1/2``)."""

    c: np.ndarray
    bernoulli: np.ndarray
    bernoulli_exact: tuple

    @property
    def q(self) -> int:
        return len(self.bernoulli) - 1


def bernoulli_numbers(q: int) -> list[Fraction]:
    B = [Fraction(1)]
    for n in range(1, q + 1):
        acc = sum(Fraction(math.comb(n + 1, j)) * B[j] for j in range(n))
        B.append(-acc / (n + 1))
    return B


def bch_coefficients(q: int) -> BCHTable:
    if q < 0:
        raise ValueError("q must be non-negative")
    c = np.zeros((q + 1, q + 1), dtype=np.int64)
    c[0, 0] = 1
    for k in range(1, q + 1):
        c[k, 0] = -c[k - 1, 0]
        c[k, k] = c[k - 1, k - 1]
        for h in range(1, k):
            c[k, h] = c[k - 1, h - 1] - c[k - 1, h]
    B = bernoulli_numbers(q)
    return BCHTable(c, np.array([float(b) for b in B]), tuple(B))


def dexp_inverse_truncated(Omega: LowRankFactors, L: LowRankFactors, q: int) -> LowRankFactors:
    """Low-rank factors of ``sum_{k<=q} B_k/k! ad_Omega^k(L)``.

    Output rank is ``rank(L) + rank(Omega)`` whatever ``q`` is.
    """
    if L.dim != Omega.dim:
        raise DimensionError("Omega and L act on different spaces")
    if q == 0 or Omega.rank == 0:
        return L
    table = bch_coefficients(q)
    chat = table.c * (table.bernoulli / np.array([math.factorial(k) for k in range(q + 1)]))[:, None]
    a, b = Omega.alpha, Omega.beta
    g, d = L.alpha, L.beta
    BtA = b.T @ a            # r x r
    AtB = BtA.T
    BtG = b.T @ g            # r x rL
    AtD = a.T @ d            # r x rL

    # powers (alpha^T beta)^j (alpha^T delta), j = 0..q-1
    right_pows = [AtD]
    for _ in range(q - 1):
        right_pows.append(AtB @ right_pows[-1])
    # G_h = (beta^T alpha)^(h-1) beta^T gamma, h = 1..q
    G = [BtG]
    for _ in range(q - 1):
        G.append(BtA @ G[-1])

    # h = 0 block: gamma @ D0^T
    E0 = sum(chat[k, 0] * right_pows[k - 1] for k in range(1, q + 1))
    D0 = chat[0, 0] * d + b @ E0

    r = Omega.rank
    Ka = np.zeros((r, L.rank))
    Kb = np.zeros((r, r))
    for h in range(1, q + 1):
        Gh = G[h - 1]
        Ka += chat[h, h] * Gh
        if h < q:
            Eh = sum(chat[k, h] * right_pows[k - h - 1] for k in range(h + 1, q + 1))
            Kb += Gh @ Eh.T
    right_alpha = d @ Ka.T + b @ Kb.T
    return LowRankFactors(np.hstack([g, a]), np.hstack([D0, right_alpha]))


def _phi1(A: np.ndarray) -> np.ndarray:
    """``(exp(A) - I) A^{-1}`` through the augmented block exponential."""
    r = A.shape[0]
    aug = np.zeros((2 * r, 2 * r))
    aug[:r, :r] = A
    aug[:r, r:] = np.eye(r)
    return sla.expm(aug)[:r, r:]


def exp_apply(Omega: LowRankFactors, Y: np.ndarray) -> np.ndarray:
    """``exp(alpha beta^T) @ Y = Y + alpha phi1(beta^T alpha) beta^T Y``."""
    if Omega.rank == 0:
        return np.array(Y, dtype=float, copy=True)
    A = Omega.beta.T @ Omega.alpha
    return Y + Omega.alpha @ (_phi1(A) @ (Omega.beta.T @ Y))
