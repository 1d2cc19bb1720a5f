"""Canonical symplectic structure, orthosymplectic bases and complex-SVD initialization.

Throughout, ``J`` denotes the canonical symplectic unit ``[[0, I_m], [-I_m, 0]]`` of
size ``2m``. It is never formed densely outside of test oracles; :func:`apply_J`
permutes and negates row blocks instead.

An orthosymplectic basis ``U`` (``2m x 2k``) satisfies ``U^T U = I`` and
``U^T J U = J_2k``. Every such matrix has the block form ``U = [A | J^T A]``, so
:class:`OrthosymplecticBasis` stores only ``A`` and rebuilds the rest on demand.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, InitializationError, SymplecticityError

log = logging.getLogger(__name__)

TOL_MANIFOLD = 1e-10
RANK_TOL = 1e-10


def _half(n: int) -> int:
    if n % 2:
        raise DimensionError(f"expected an even leading dimension, got {n}")
    return n // 2


def apply_J(x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Return ``J @ x`` (or ``J.T @ x``) without forming ``J``.

    Works on vectors and on matrices (acting on rows).
    """
    x = np.asarray(x)
    m = _half(x.shape[0])
    top, bot = x[:m], x[m:]
    if transpose:
        return np.concatenate([-bot, top], axis=0)
    return np.concatenate([bot, -top], axis=0)


def apply_J_right(x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Return ``x @ J`` (or ``x @ J.T``) acting on columns."""
    x = np.asarray(x)
    k = _half(x.shape[1])
    left, right = x[:, :k], x[:, k:]
    if transpose:
        return np.concatenate([right, -left], axis=1)
    return np.concatenate([-right, left], axis=1)


def canonical_J(m: int) -> np.ndarray:
    """Dense ``J_{2m}``; for oracles and small-dimension checks only."""
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class ManifoldDefects:
    orth_defect: float
    sympl_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.orth_defect <= self.tol and self.sympl_defect <= self.tol

    @property
    def worst(self) -> float:
        return max(self.orth_defect, self.sympl_defect)


def check_orthosymplectic(U: np.ndarray, tol: float = TOL_MANIFOLD) -> ManifoldDefects:
    """Frobenius defects of ``U^T U - I`` and ``U^T J U - J_2k``. Never raises on
    non-membership; odd dimensions raise :class:`DimensionError`."""
    U = np.asarray(U, dtype=float)
    _half(U.shape[0])
    k = _half(U.shape[1])
    eye = np.eye(2 * k)
    orth = np.linalg.norm(U.T @ U - eye)
    sympl = np.linalg.norm(U.T @ apply_J(U) - canonical_J(k))
    return ManifoldDefects(float(orth), float(sympl), tol)


def symplectic_inverse(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symplectic left inverse ``M^+ = J_2k^T M^T J_2m`` of a symplectic ``M``."""
    M = np.asarray(M, dtype=float)
    _half(M.shape[0])
    k = _half(M.shape[1])
    defect = float(np.linalg.norm(M.T @ apply_J(M) - canonical_J(k)))
    if defect > tol:
        raise SymplecticityError(f"matrix is not symplectic (defect {defect:.3e})", defect)
    # (J_2k^T M^T J_2m) = (J_2m^T M J_2k)^T
    return apply_J_right(apply_J(M, transpose=True)).T


def complexify(R: np.ndarray) -> np.ndarray:
    """Map real ``[R_q; R_p]`` (``2m x p``) to complex ``R_q + i R_p`` (``m x p``)."""
    R = np.asarray(R, dtype=float)
    m = _half(R.shape[0])
    return R[:m] + 1j * R[m:]


def realify(C: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complexify`."""
    C = np.asarray(C)
    return np.concatenate([C.real, C.imag], axis=0)


@dataclass(frozen=True, eq=False)
class OrthosymplecticBasis:
    """Orthosymplectic ``2m x 2k`` matrix stored through its first block ``A``.

    ``A`` (``2m x k``) is authoritative; ``full`` materializes ``[A | J^T A]`` once
    and caches it. Instances are immutable.
    """

    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2:
            raise DimensionError("basis block must be a matrix")
        _half(A.shape[0])
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_full(cls, U: np.ndarray, tol: float = TOL_MANIFOLD) -> "OrthosymplecticBasis":
        """Build from a full ``[A | J^T A]`` matrix, checking the block convention."""
        U = np.asarray(U, dtype=float)
        k = _half(U.shape[1])
        A = U[:, :k]
        mismatch = np.linalg.norm(U[:, k:] - apply_J(A, transpose=True))
        if mismatch > tol * max(1.0, np.linalg.norm(U)):
            raise DimensionError(
                f"columns k+1..2k are not J^T times columns 1..k (mismatch {mismatch:.3e})"
            )
        return cls(A)

    @property
    def half_full_dim(self) -> int:
        return self.A.shape[0] // 2

    @property
    def half_reduced_dim(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.A.shape[0], 2 * self.A.shape[1])

    @cached_property
    def full(self) -> np.ndarray:
        U = np.concatenate([self.A, apply_J(self.A, transpose=True)], axis=1)
        U.setflags(write=False)
        return U

    def defects(self, tol: float = TOL_MANIFOLD) -> ManifoldDefects:
        return check_orthosymplectic(self.full, tol)


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Reduced solution ``R = U Z^T`` at ``time``; ``Z`` has shape ``p x 2k``."""

    basis: OrthosymplecticBasis
    Z: np.ndarray
    time: float = 0.0

    def reconstruct(self) -> np.ndarray:
        return self.basis.full @ self.Z.T


def random_orthosymplectic(m: int, k: int, rng: np.random.Generator) -> OrthosymplecticBasis:
    """Random basis from a complex Stiefel matrix (via the real/complex isomorphism)."""
    if k > m:
        raise DimensionError(f"k={k} exceeds m={m}")
    G = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
    W, _ = np.linalg.qr(G)
    return OrthosymplecticBasis(realify(W))


def gram_matrix(Z: np.ndarray) -> np.ndarray:
    """``Z^T Z + J_2k^T Z^T Z J_2k`` (symmetric, commutes with ``J_2k``)."""
    C = Z.T @ Z
    return C + apply_J(apply_J_right(C), transpose=True)


def _complex_svd_truncated(C: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``k`` left singular vectors and singular values of complex ``C``.

    Small column counts go through the Hermitian Gram matrix; otherwise a direct
    thin SVD is used. Ties are broken by index order of the sorted spectrum.
    """
    m, p = C.shape
    if p <= m:
        lam, V = np.linalg.eigh(C.conj().T @ C)
        order = np.argsort(-lam, kind="stable")
        lam = np.clip(lam[order], 0.0, None)
        V = V[:, order]
        sigma = np.sqrt(lam)
        W = np.zeros((m, k), dtype=complex)
        good = sigma[:k] > sigma[0] * 1e-14 if sigma[0] > 0 else np.zeros(k, bool)
        W[:, good] = (C @ V[:, :k][:, good]) / sigma[:k][good]
    else:
        Uc, sigma, _ = np.linalg.svd(C, full_matrices=False)
        W = Uc[:, :k].copy()
        good = sigma[:k] > sigma[0] * 1e-14 if sigma[0] > 0 else np.zeros(k, bool)
        W[:, ~good] = 0.0
    if not good.all():
        log.warning("complexified snapshot matrix has rank < %d; completing basis", k)
        W = _complete_columns(W, good)
    # The Gram route loses orthogonality like eps * cond^2; restore it without
    # changing the spanned subspace.
    W, Rfac = np.linalg.qr(W)
    d = np.diag(Rfac)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return W * phase, sigma


def _complete_columns(W: np.ndarray, good: np.ndarray) -> np.ndarray:
    m, k = W.shape
    basis = [W[:, j] for j in range(k) if good[j]]
    filled = W.copy()
    candidates = iter(range(m))
    for j in range(k):
        if good[j]:
            continue
        while True:
            e = np.zeros(m, dtype=complex)
            e[next(candidates)] = 1.0
            for b in basis:
                e -= b * np.vdot(b, e)
            if np.linalg.norm(e) > 1e-8:
                e /= np.linalg.norm(e)
                basis.append(e)
                filled[:, j] = e
                break
    return filled


def orthosymplectic_from_complex_svd(
    R0: np.ndarray,
    k: int,
    rank_tol: float = RANK_TOL,
    check_fullrank: bool = True,
) -> tuple[OrthosymplecticBasis, np.ndarray]:
    """Initial basis and coefficients from the truncated complex SVD of ``R0``.

    Returns ``(basis, Z)`` with ``Z = R0^T U``.
    """
    R0 = np.asarray(R0, dtype=float)
    m = _half(R0.shape[0])
    p = R0.shape[1]
    if k < 1 or k > min(m, p):
        raise DimensionError(f"k={k} must lie in [1, min(m, p)] = [1, {min(m, p)}]")
    W, sigma = _complex_svd_truncated(complexify(R0), k)
    if len(sigma) > k and sigma[0] > 0 and sigma[k - 1] - sigma[k] < 1e-12 * sigma[0]:
        log.warning(
            "degenerate singular values at truncation index %d (gap %.3e)",
            k,
            sigma[k - 1] - sigma[k],
        )
    basis = OrthosymplecticBasis(realify(W))
    Z = R0.T @ basis.full
    if check_fullrank:
        ev = np.linalg.eigvalsh(gram_matrix(Z))
        if ev[-1] <= 0 or ev[0] < rank_tol * ev[-1]:
            raise InitializationError(
                f"full-rank condition violated for k={k}: "
                f"smin/smax = {ev[0] / ev[-1] if ev[-1] > 0 else 0.0:.3e}"
            )
    return basis, Z
