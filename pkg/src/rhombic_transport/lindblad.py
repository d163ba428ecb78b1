"""Exact single-particle density matrix (SPDM) dynamics for U = 0.

The SPDM is stored in density-matrix orientation, rho[l, m] = <a_m^dag a_l>,
so that the Hamiltonian part of the equation of motion reads -i[H, rho] with
H from :func:`rhombic_transport.lattice.build_hamiltonian`.  The transpose
<a_l^dag a_m> is its complex conjugate; populations and every real observable
are the same in both orientations.

Particles enter at site 1 (rate gamma_L, reservoir density n_L) and leave at
site L (gamma_R, n_R):

    d rho/dt = -i[H, rho] - {Gamma/2, rho} + P,
    Gamma = diag(gamma_L, 0, ..., 0, gamma_R),
    P     = diag(gamma_L n_L, 0, ..., 0, gamma_R n_R).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import LatticeSpec, SiteIndex, build_hamiltonian, hub_indices

log = logging.getLogger(__name__)

EXACT = "exact"
TWA = "twa"


class SteadyStateError(RuntimeError):
    """The stationary problem on the bright subspace is singular or ill-conditioned."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ReservoirParams:
    gamma_L: float = 0.4
    gamma_R: float = 0.4
    n_L: float = 1.0
    n_R: float = 0.5

    def __post_init__(self):
        for name in ("gamma_L", "gamma_R"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("n_L", "n_R"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")

    def rates(self, L: int) -> np.ndarray:
        g = np.zeros(L)
        g[0] += self.gamma_L
        g[-1] += self.gamma_R
        return g

    def pump(self, L: int) -> np.ndarray:
        p = np.zeros(L)
        p[0] += self.gamma_L * self.n_L
        p[-1] += self.gamma_R * self.n_R
        return p


@dataclass(frozen=True)
class CurrentRecord:
    """Stationary current.

    ``normalized`` is value / n_L; ``per_bias`` is value / (n_L - n_R), NaN at
    zero bias.  ``stderr`` refers to ``value``.
    """

    value: float
    normalized: float
    stderr: float = 0.0
    method: str = EXACT
    per_bias: float = float("nan")

    def __post_init__(self):
        if self.method not in (EXACT, TWA):
            raise ValueError(f"unknown method {self.method!r}")
        if (self.method == EXACT) != (self.stderr == 0.0):
            raise ValueError("stderr must be zero exactly when method is 'exact'")
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")

    @classmethod
    def from_value(cls, value: float, r: ReservoirParams, stderr: float = 0.0, method: str = EXACT):
        if r.n_L == 0:
            raise ValueError("cannot normalize the current: n_L = 0")
        bias = r.n_L - r.n_R
        per_bias = value / bias if bias != 0 else float("nan")
        return cls(float(value), float(value / r.n_L), float(stderr), method, float(per_bias))


def _check_square(rho: np.ndarray, H: np.ndarray):
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"H must be square, got shape {H.shape}")
    if rho.shape != H.shape:
        raise ValueError(f"SPDM shape {rho.shape} does not match H shape {H.shape}")


def spdm_rhs(rho: np.ndarray, H: np.ndarray, r: ReservoirParams) -> np.ndarray:
    """Time derivative of the SPDM."""
    rho = np.asarray(rho)
    _check_square(rho, H)
    L = H.shape[0]
    g = r.rates(L)
    out = -1j * (H @ rho - rho @ H)
    out -= 0.5 * (g[:, None] + g[None, :]) * rho
    out[np.diag_indices(L)] += r.pump(L)
    return out


def propagate(
    rho0: np.ndarray,
    H: np.ndarray,
    r: ReservoirParams,
    t_final: float,
    dt: float,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 integration of :func:`spdm_rhs`, re-symmetrized after every step.

    Returns ``(times, rhos)`` sampled every ``stride`` steps, t = 0 included.
    The last sample is always t_final (rounded to a whole number of steps).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_final >= dt:
        raise ValueError("t_final must be at least dt")
    n_steps = int(round(t_final / dt))
    rho = np.array(rho0, dtype=complex)
    _check_square(rho, H)

    def f(x):
        return spdm_rhs(x, H, r)

    times, out = [0.0], [rho.copy()]
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f(rho)
            k2 = f(rho + 0.5 * dt * k1)
            k3 = f(rho + 0.5 * dt * k2)
            k4 = f(rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
        if not np.all(np.isfinite(rho)):
            raise DivergenceError(f"SPDM became non-finite at t = {k * dt:g}; reduce dt")
        if k % stride == 0 or k == n_steps:
            times.append(k * dt)
            out.append(rho.copy())
    return np.array(times), np.array(out)


def bright_subspace(H: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of the subspace reachable from sites 1 and L.

    Eigenvectors of H with no weight on either boundary site never exchange
    particles with the reservoirs (the antisymmetric A-B combinations, and the
    caged interior states at phi = pi).  They form undamped modes that make
    the stationary equation singular.  Starting from an empty lattice these
    modes stay empty, so the stationary SPDM lives on the complement.
    """
    w, V = np.linalg.eigh(H)
    cols = []
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[i] < tol:
            j += 1
        block = V[:, i:j]
        coupling = np.stack([block[0].conj(), block[-1].conj()], axis=1)
        u, s, _ = np.linalg.svd(coupling, full_matrices=False)
        rank = int(np.sum(s > tol))
        if rank:
            cols.append(block @ u[:, :rank])
        i = j
    return np.hstack(cols)


def steady_state(H: np.ndarray, r: ReservoirParams, max_condition: float = 1e12) -> np.ndarray:
    """Stationary SPDM reached from the empty lattice.

    Solves (iH + Gamma/2) rho + rho (-iH + Gamma/2) = P on the bright subspace
    by dense vectorization (Kronecker form).
    """
    L = H.shape[0]
    Q = bright_subspace(H)
    A = Q.conj().T @ (1j * H + np.diag(0.5 * r.rates(L))) @ Q
    P = Q.conj().T @ np.diag(r.pump(L)).astype(complex) @ Q
    k = A.shape[0]
    eye = np.eye(k)
    # row-major vec: vec(A X) = (A kron I) vec X, vec(X A^dag) = (I kron conj(A)) vec X
    K = np.kron(A, eye) + np.kron(eye, A.conj())
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > max_condition:
        raise SteadyStateError("stationary SPDM equation is ill-conditioned", cond)
    x = np.linalg.solve(K, P.reshape(-1)).reshape(k, k)
    rho = Q @ x @ Q.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    log.debug("steady state: bright dimension %d of %d, condition %.3e", k, L, cond)
    return rho


def reservoir_current(rho: np.ndarray, r: ReservoirParams) -> CurrentRecord:
    """Net inflow from the left reservoir, gamma_L (n_L - rho_11)."""
    return CurrentRecord.from_value(r.gamma_L * (r.n_L - rho[0, 0].real), r)


def drain_current(rho: np.ndarray, r: ReservoirParams) -> float:
    """Outflow into the right reservoir, gamma_R (rho_LL - n_R)."""
    return float(r.gamma_R * (rho[-1, -1].real - r.n_R))


def _offset(site) -> int:
    return site.index if isinstance(site, SiteIndex) else int(site)


def bond_current(rho: np.ndarray, H: np.ndarray, l, m) -> float:
    """Particle flow along the bond l -> m, 2 Im(H[m, l] rho[l, m]).

    ``l`` and ``m`` are :class:`SiteIndex` objects or zero-based offsets.
    """
    i, j = _offset(l), _offset(m)
    if i == j or H[j, i] == 0:
        raise ValueError(f"sites {i} and {j} are not connected by a bond")
    return float(2.0 * (H[j, i] * rho[i, j]).imag)


def rhomb_cut_current(rho: np.ndarray, H: np.ndarray, k: int, side: str = "in") -> float:
    """Current through both arms of rhomb ``k`` (1-based).

    ``side='in'`` sums C_k -> A_k and C_k -> B_k; ``side='out'`` sums
    A_k -> C_{k+1} and B_k -> C_{k+1}.
    """
    c = 3 * (k - 1)
    a, b, c_next = c + 1, c + 2, c + 3
    if side == "in":
        return bond_current(rho, H, c, a) + bond_current(rho, H, c, b)
    if side == "out":
        return bond_current(rho, H, a, c_next) + bond_current(rho, H, b, c_next)
    raise ValueError(f"side must be 'in' or 'out', got {side!r}")


def hub_populations(rho: np.ndarray, M: int) -> np.ndarray:
    return rho[hub_indices(M), hub_indices(M)].real


def phi_sweep(
    M: int,
    r: ReservoirParams,
    phi_grid: Sequence[float],
    J: float = 1.0,
) -> list[CurrentRecord]:
    """Exact stationary current for each flux value in ``phi_grid``."""
    if len(phi_grid) == 0:
        raise ValueError("phi_grid is empty")
    out = []
    for phi in phi_grid:
        H = build_hamiltonian(LatticeSpec(M=M, J=J, phi=float(phi)))
        out.append(reservoir_current(steady_state(H, r), r))
    return out
