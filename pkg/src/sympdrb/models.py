"""Parameterized canonical Hamiltonian models ``du/dt = J grad H(u; eta)``.

Models are evaluated column-wise: a state block ``R`` has shape ``2m x p`` and
``params`` has shape ``p x d``; column ``j`` of ``R`` belongs to ``params[j]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .symplectic import apply_J


class HamiltonianModel:
    """Interface. Subclasses implement the block methods ``_hamiltonian`` and
    ``_gradient``; the public wrappers accept single vectors too."""

    dim: int
    descriptor: str = "model"

    def _hamiltonian(self, R: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, R: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def initial(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _block(self, R, params):
        R = np.asarray(R, dtype=float)
        single = R.ndim == 1
        if single:
            R = R[:, None]
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if R.shape[0] != self.dim:
            raise DimensionError(f"state has {R.shape[0]} rows, model dim is {self.dim}")
        if params.shape[0] != R.shape[1]:
            raise DimensionError(
                f"{R.shape[1]} state columns but {params.shape[0]} parameter rows"
            )
        return R, params, single

    def hamiltonian(self, R, params):
        R, params, single = self._block(R, params)
        H = self._hamiltonian(R, params)
        return float(H[0]) if single else H

    def gradient(self, R, params):
        R, params, single = self._block(R, params)
        G = self._gradient(R, params)
        return G[:, 0] if single else G

    def field(self, R, params):
        """Full-order vector field ``J grad H``."""
        return apply_J(self.gradient(R, params))


@dataclass(frozen=True)
class ParameterGrid:
    """Tensor grid with ``samples[d]`` uniform points on ``ranges[d]`` (endpoints
    included), flattened lexicographically with the first dimension slowest."""

    ranges: tuple = ((0.1, 0.15), (0.2, 1.5))
    samples: tuple = (4, 4)

    def __post_init__(self):
        if len(self.ranges) != len(self.samples):
            raise ConfigError("parameter grid: ranges and samples differ in length")
        for (lo, hi), n in zip(self.ranges, self.samples):
            if n < 1 or hi < lo:
                raise ConfigError(f"parameter grid: bad range ({lo}, {hi}) x {n}")

    @property
    def size(self) -> int:
        return int(np.prod(self.samples))

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, n) if n > 1 else np.array([0.5 * (lo + hi)])
            for (lo, hi), n in zip(self.ranges, self.samples)
        ]

    def points(self) -> np.ndarray:
        return np.array(list(itertools.product(*self.axes())), dtype=float)


# ------------------------------------------------------------------ shallow water


@dataclass(frozen=True)
class SWEConfig:
    L: float = 10.0
    grid_points: int = 256
    T: float = 2.0
    dt: float = 2e-3

    def __post_init__(self):
        if self.grid_points < 4:
            raise ConfigError("SWE grid needs at least 4 points")
        if self.L <= 0:
            raise ConfigError("SWE half-domain L must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.grid_points

    def grid(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.grid_points)


class SWEModel(HamiltonianModel):
    """1-D shallow water in (h, phi) variables on a periodic grid, centered differences.

    ``H = 1/2 sum_i (h_i (D phi)_i^2 + h_i^2)``, ``(D phi)_i = (phi_{i+1} - phi_{i-1}) / 2dx``.
    Parameters are ``eta = (alpha, beta)`` of the initial bump ``1 + alpha exp(-beta x^2)``.
    """

    descriptor = "swe-1d"

    def __init__(self, config: SWEConfig = SWEConfig()):
        self.config = config
        self.n = config.grid_points
        self.dim = 2 * self.n
        self.dx = config.dx
        self.x = config.grid()

    def _dphi(self, phi):
        return (np.roll(phi, -1, axis=0) - np.roll(phi, 1, axis=0)) / (2 * self.dx)

    def _hamiltonian(self, R, params):
        h, phi = R[: self.n], R[self.n:]
        return 0.5 * np.sum(h * self._dphi(phi) ** 2 + h**2, axis=0)

    def _gradient(self, R, params):
        h, phi = R[: self.n], R[self.n:]
        d = self._dphi(phi)
        flux = h * d
        g_h = 0.5 * d**2 + h
        g_phi = (np.roll(flux, 1, axis=0) - np.roll(flux, -1, axis=0)) / (2 * self.dx)
        return np.concatenate([g_h, g_phi], axis=0)

    def initial(self, params):
        params = np.atleast_2d(np.asarray(params, dtype=float))
        alpha, beta = params[:, 0], params[:, 1]
        h = 1.0 + alpha[None, :] * np.exp(-beta[None, :] * self.x[:, None] ** 2)
        return np.concatenate([h, np.zeros_like(h)], axis=0)


# -------------------------------------------------------------- linear oscillator


@dataclass(frozen=True)
class OscillatorConfig:
    """``H = 1/2 u^T K u`` with ``K = diag(kq, kp)``.

    ``frequencies`` are the per-mode stiffnesses; when ``kp`` is omitted it equals
    ``kq``, so mode ``i`` rotates with angular speed ``frequencies[i]``.
    """

    m: int = 8
    frequencies: tuple = ()
    momentum_weights: tuple = ()
    seed: int = 0

    def stiffness(self) -> tuple[np.ndarray, np.ndarray]:
        kq = np.asarray(self.frequencies, dtype=float) if self.frequencies else np.linspace(1.0, 2.0, self.m)
        kp = np.asarray(self.momentum_weights, dtype=float) if self.momentum_weights else kq
        if kq.shape != (self.m,) or kp.shape != (self.m,):
            raise ConfigError(f"oscillator: stiffness lists must have length m={self.m}")
        if np.any(kq <= 0) or np.any(kp <= 0) or not np.all(np.isfinite(kq + kp)):
            raise ConfigError("oscillator: stiffness matrix must be symmetric positive definite")
        return kq, kp


class LinearOscillatorModel(HamiltonianModel):
    """Quadratic Hamiltonian with diagonal SPD ``K``; exact flow in closed form.

    The initial condition is ``u0(eta) = c0 + eta_1 c1 + eta_2 c2 + ...`` with fixed
    random directions ``c_i`` drawn from ``seed`` (smooth in ``eta``).
    """

    descriptor = "linear-oscillator"

    def __init__(self, config: OscillatorConfig = OscillatorConfig(), n_params: int = 2):
        self.config = config
        self.m = config.m
        self.dim = 2 * config.m
        self.kq, self.kp = config.stiffness()
        rng = np.random.default_rng(config.seed)
        self.directions = rng.standard_normal((n_params + 1, self.dim)) / np.sqrt(self.dim)

    @classmethod
    def from_matrix(cls, K: np.ndarray, **kwargs) -> "LinearOscillatorModel":
        K = np.asarray(K, dtype=float)
        n = K.shape[0]
        if K.shape != (n, n) or n % 2:
            raise ConfigError("oscillator: K must be square with even size")
        if not np.allclose(K, np.diag(np.diag(K))):
            raise ConfigError("oscillator: only diagonal K is supported")
        m = n // 2
        d = np.diag(K)
        return cls(OscillatorConfig(m, tuple(d[:m]), tuple(d[m:]), **kwargs))

    @property
    def K_diag(self) -> np.ndarray:
        return np.concatenate([self.kq, self.kp])

    def _hamiltonian(self, R, params):
        return 0.5 * np.sum(self.K_diag[:, None] * R**2, axis=0)

    def _gradient(self, R, params):
        return self.K_diag[:, None] * R

    def initial(self, params):
        params = np.atleast_2d(np.asarray(params, dtype=float))
        n = params.shape[1]
        if n + 1 > self.directions.shape[0]:
            raise DimensionError(f"model was built for {self.directions.shape[0] - 1} parameters")
        coeffs = np.hstack([np.ones((params.shape[0], 1)), params])
        return (coeffs @ self.directions[: n + 1]).T

    def exact(self, R0: np.ndarray, t: float) -> np.ndarray:
        """Exact flow of ``q' = kp p``, ``p' = -kq q``."""
        R0 = np.asarray(R0, dtype=float)
        if R0.ndim == 1:
            return self.exact(R0[:, None], t)[:, 0]
        q, p = R0[: self.m], R0[self.m:]
        w = np.sqrt(self.kq * self.kp)[:, None]
        r = np.sqrt(self.kp / self.kq)[:, None]
        c, s = np.cos(w * t), np.sin(w * t)
        return np.concatenate([c * q + r * s * p, -s * q / r + c * p], axis=0)
