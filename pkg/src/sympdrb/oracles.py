"""Dense brute-force references and random instance generators.

Everything here forms ``2m x 2m`` matrices and is meant for small dimensions only:
unit tests, the acceptance suite and ``sympdrb oracle``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cayley import (
    LowRankFactors,
    bch_coefficients,
    cayley_apply,
    cayley_dense,
    dcay_inverse,
    dexp_inverse_truncated,
    exp_apply,
    inverse_tangent_map,
    random_gauge,
    retract,
)
from .symplectic import OrthosymplecticBasis, apply_J, canonical_J, random_orthosymplectic


# ------------------------------------------------------------------ generators


def random_so_sp(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random element of ``so(n) ∩ sp(n)``: ``[[a, b], [-b, a]]``, ``a`` skew, ``b`` symmetric."""
    h = n // 2
    a = rng.standard_normal((h, h))
    b = rng.standard_normal((h, h))
    return scale * np.block([[a - a.T, b + b.T], [-(b + b.T), a - a.T]])


def random_so_sp_factors(m: int, r: int, rng: np.random.Generator,
                         scale: float = 1.0) -> LowRankFactors:
    """Factors ``[X | -Y], [Y | X]`` of ``X Y^T - Y X^T`` with ``X, Y`` J-compatible.

    ``X = [Xa | J^T Xa]`` commutes with ``J`` in the sense ``X J_2r = J X``, which
    makes the represented matrix Hamiltonian as well as skew. Rank is ``4r``.
    """
    def jcompat():
        Xa = rng.standard_normal((2 * m, r))
        return np.hstack([Xa, apply_J(Xa, transpose=True)])

    X = scale * jcompat()
    Y = jcompat()
    return LowRankFactors(np.hstack([X, -Y]), np.hstack([Y, X]))


def random_horizontal(Q: OrthosymplecticBasis, rng: np.random.Generator,
                      scale: float = 1.0) -> np.ndarray:
    Qf = Q.full
    k = Q.half_reduced_dim
    Xa = rng.standard_normal((Qf.shape[0], k))
    X = np.hstack([Xa, apply_J(Xa, transpose=True)])
    V = X - Qf @ (Qf.T @ X)
    return scale * V / max(np.linalg.norm(V), 1e-300)


def random_tangent(Q: OrthosymplecticBasis, rng: np.random.Generator,
                   scale: float = 1.0) -> np.ndarray:
    """General tangent vector: horizontal part plus ``Q Xi`` with ``Xi`` in ``so ∩ sp``."""
    Xi = random_so_sp(Q.shape[1], rng)
    V = random_horizontal(Q, rng) + Q.full @ (Xi / np.linalg.norm(Xi))
    return scale * V / np.linalg.norm(V)


# --------------------------------------------------------------------- oracles


def dense_cayley_apply(F: LowRankFactors, Y: np.ndarray) -> np.ndarray:
    return cayley_dense(F.dense()) @ Y


def dense_dcay_inverse(Omega: np.ndarray, L: np.ndarray) -> np.ndarray:
    eye = np.eye(Omega.shape[0])
    return (eye - Omega / 2) @ L @ (eye + Omega / 2)


def dense_dexp_inverse(Omega: np.ndarray, L: np.ndarray, q: int) -> np.ndarray:
    """``sum_{k<=q} B_k/k! ad_Omega^k(L)`` by explicit nested commutators."""
    B = bch_coefficients(q).bernoulli
    total = np.zeros_like(L)
    ad = L.copy()
    for k in range(q + 1):
        total += B[k] / math.factorial(k) * ad
        ad = Omega @ ad - ad @ Omega
    return total


def dense_expm(Omega: np.ndarray, terms: int = 25) -> np.ndarray:
    """Truncated Taylor series with scaling and squaring to ``||Omega|| <= 1``."""
    nrm = np.linalg.norm(Omega, 1)
    s = max(0, int(math.ceil(math.log2(nrm)))) if nrm > 1 else 0
    A = Omega / 2**s
    E = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for j in range(1, terms + 1):
        term = term @ A / j
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def upsilon_dense(Q: np.ndarray, V: np.ndarray, S: np.ndarray | None) -> np.ndarray:
    inner = -0.5 * Q.T @ V
    if S is not None:
        inner = inner + S
    Theta = V + Q @ inner
    return Theta @ Q.T - Q @ Theta.T


def dense_retract(Q: np.ndarray, V: np.ndarray, S: np.ndarray | None) -> np.ndarray:
    return cayley_dense(upsilon_dense(Q, V, S)) @ Q


def dense_tangent_map(Q: np.ndarray, V: np.ndarray, X: np.ndarray,
                      S: np.ndarray | None) -> np.ndarray:
    """Exact differential ``dR_Q|_V (X)`` from the dense Cayley derivative.

    ``d cay(Ups) = (I - Ups/2)^{-1} dUps (I - Ups/2)^{-1}`` and ``Ups`` is affine in
    ``V`` with linear part ``X -> Th(X) Q^T - Q Th(X)^T``, ``Th(X) = X - Q Q^T X / 2``.
    """
    n = Q.shape[0]
    eye = np.eye(n)
    Ups = upsilon_dense(Q, V, S)
    dUps = upsilon_dense(Q, X, None)
    left = np.linalg.solve(eye - Ups / 2, dUps)
    return left @ np.linalg.solve(eye - Ups / 2, Q)


def dense_orthosymplectic_defects(Omega: np.ndarray) -> tuple[float, float]:
    """Skew and Hamiltonian defects of a dense square matrix."""
    J = canonical_J(Omega.shape[0] // 2)
    return (
        float(np.linalg.norm(Omega + Omega.T)),
        float(np.linalg.norm(Omega @ J + J @ Omega.T)),
    )


@dataclass(frozen=True)
class OracleInstance:
    m: int
    k: int
    Q: OrthosymplecticBasis
    S: np.ndarray | None


def random_instance(rng: np.random.Generator, max_2m: int = 64, max_2k: int = 8,
                    gauge: bool = True) -> OracleInstance:
    k = int(rng.integers(1, max_2k // 2 + 1))
    m = int(rng.integers(k + 1, max_2m // 2 + 1))  # m > k keeps a horizontal space
    Q = random_orthosymplectic(m, k, rng)
    S = random_gauge(k, rng, scale=0.5) if gauge and rng.random() < 0.5 else None
    return OracleInstance(m, k, Q, S)


# ---------------------------------------------------------------------- suites


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    max_rel_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tol)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _lie_pair(rng, inst, scale):
    r = int(rng.integers(1, inst.k + 1))
    Om = random_so_sp_factors(inst.m, r, rng, scale=scale / (2 * inst.m))
    L = random_so_sp_factors(inst.m, r, rng, scale=1.0 / (2 * inst.m))
    return Om, L


def _case_cayley(rng, inst):
    Om, _ = _lie_pair(rng, inst, 1.0)
    return _rel(cayley_apply(Om, inst.Q.full), dense_cayley_apply(Om, inst.Q.full))


def _case_dcay(rng, inst):
    Om, L = _lie_pair(rng, inst, 1.0)
    return _rel(dcay_inverse(Om, L).dense(), dense_dcay_inverse(Om.dense(), L.dense()))


def _case_dexp(rng, inst):
    Om, L = _lie_pair(rng, inst, 1.0)
    q = int(rng.integers(0, 6))
    return _rel(dexp_inverse_truncated(Om, L, q).dense(),
                dense_dexp_inverse(Om.dense(), L.dense(), q))


def _case_exp(rng, inst):
    Om, _ = _lie_pair(rng, inst, 1.0)
    return _rel(exp_apply(Om, inst.Q.full), dense_expm(Om.dense()) @ inst.Q.full)


def _case_retract(rng, inst):
    V = random_horizontal(inst.Q, rng, scale=float(rng.uniform(0.05, 1.0)))
    Qf = inst.Q.full
    return _rel(retract(inst.Q, V, inst.S).full, dense_retract(Qf, V, inst.S))


def _case_inverse_tangent(rng, inst):
    Qf = inst.Q.full
    V = random_tangent(inst.Q, rng, scale=float(rng.uniform(0.05, 0.5)))
    X = random_tangent(inst.Q, rng)
    W = dense_tangent_map(Qf, V, X, inst.S)
    got = inverse_tangent_map(inst.Q, V, W, inst.S, flavor="general")
    return _rel(got, X)


SUITES = {
    "cayley": _case_cayley,
    "dcay": _case_dcay,
    "dexp": _case_dexp,
    "exp": _case_exp,
    "retract": _case_retract,
    "inverse-tangent": _case_inverse_tangent,
}


def run_suite(name: str, trials: int = 200, seed: int = 0, tol: float = 1e-10,
              max_2m: int = 64, max_2k: int = 8) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown oracle suite {name!r} (valid: {', '.join(SUITES)})")
    rng = np.random.default_rng(seed)
    case = SUITES[name]
    worst = 0.0
    for _ in range(trials):
        inst = random_instance(rng, max_2m=max_2m, max_2k=max_2k)
        worst = max(worst, case(rng, inst))
    return SuiteResult(name, trials, worst, tol)
