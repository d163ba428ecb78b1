"""Pseudo-classical Langevin simulation of the interacting lattice.

Each trajectory is a classical field a in C^L obeying

    da_l = [-i (sum_m H_lm a_m + U |a_l|^2 a_l) - (gamma_l / 2) a_l] dt + sigma_l dW_l,

with friction and noise on the two boundary sites only.  dW_l is a complex
Wiener increment with E[dW dW*] = dt (independent real and imaginary parts,
each of variance dt/2).  With sigma_l^2 = gamma_l n_l a decoupled boundary
site relaxes to <|a|^2> = n_l, and the ensemble average of a_l a_m^* is the
SPDM rho[l, m] in the orientation used by :mod:`rhombic_transport.lindblad`.
For U = 0 the second moments obey exactly the same linear equation as the
SPDM.

Two phase-space orderings are available.  ``ordering="P"`` (default) uses
sigma^2 = gamma n, empty initial fields and no correction of the estimator.
``ordering="wigner"`` uses sigma^2 = gamma (n + 1/2), vacuum-noise initial
fields with <|a_l|^2> = 1/2, and subtracts 1/2 from the diagonal estimate.

Time stepping: the on-site phase rotation is integrated exactly and wrapped
around a stochastic Heun step for the hopping, friction and noise (Strang
splitting, ``scheme="split"``).  ``scheme="heun"`` applies stochastic Heun
to the full drift; it is only unconditionally usable at U = 0.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from . import _kernel
from .lattice import LatticeSpec, bonds, build_hamiltonian
from .lindblad import TWA, CurrentRecord, DivergenceError, ReservoirParams

log = logging.getLogger(__name__)

ORDERINGS = ("P", "wigner")
SCHEMES = ("split", "heun")


@dataclass(frozen=True)
class TwaParams:
    """Settings of a Langevin ensemble run.

    When ``g`` is given the on-site interaction is U = g / n_L and
    ``spec.U`` is ignored.  Times are in units of 1/J.
    """

    spec: LatticeSpec
    reservoirs: ReservoirParams = field(default_factory=ReservoirParams)
    g: float | None = None
    dt: float = 0.01
    n_traj: int = 400
    burn_in: float = 200.0
    avg_window: float = 300.0
    seed: int = 0
    sample_every: int = 10
    ordering: str = "P"
    scheme: str = "split"
    batch_size: int = 64
    chunk_steps: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.g is not None:
            if self.g < 0:
                raise ValueError("g must be non-negative")
            if self.g > 0 and self.reservoirs.n_L <= 0:
                raise ValueError("g > 0 needs n_L > 0 to define U = g / n_L")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be positive")
        if self.burn_in < 0 or not self.avg_window > 0:
            raise ValueError("need burn_in >= 0 and avg_window > 0")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.sample_every < 1 or self.batch_size < 1 or self.chunk_steps < 1 or self.workers < 1:
            raise ValueError("sample_every, batch_size, chunk_steps and workers must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def U(self) -> float:
        if self.g is None:
            return self.spec.U
        return self.g / self.reservoirs.n_L if self.g > 0 else 0.0

    @property
    def burn_in_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def window_steps(self) -> int:
        return int(round(self.avg_window / self.dt))


@dataclass
class EnsembleEstimate:
    """Monte-Carlo SPDM.

    ``spdm_mean`` averages a a^dag over the window and over trajectories;
    ``spdm_stderr`` is the standard error across trajectory-level window
    averages.  The ``snapshot_*`` fields use the fields at the end of the
    window only (ensemble average without time averaging).
    """

    spdm_mean: np.ndarray
    spdm_stderr: np.ndarray
    n_traj_used: int
    snapshot_mean: np.ndarray
    snapshot_stderr: np.ndarray
    n_samples: int


@dataclass
class TransientPopulations:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


def classical_hamiltonian(a: np.ndarray, spec: LatticeSpec) -> float:
    """H_cl = -(1/2) sum_bonds (J_lm a_m^* a_l + c.c.) + (U/2) sum_l |a_l|^4."""
    a = np.asarray(a, dtype=complex)
    kinetic = 0.0
    for i, j, h in bonds(spec):
        kinetic += 2.0 * (np.conj(a[i]) * h * a[j]).real
    n = np.abs(a) ** 2
    return float(kinetic + 0.5 * spec.U * np.sum(n * n))


def noise_amplitudes(p: TwaParams) -> tuple[float, float]:
    """sigma for the first and last site (per sqrt(time))."""
    r = p.reservoirs
    shift = 0.5 if p.ordering == "wigner" else 0.0
    return float(np.sqrt(r.gamma_L * (r.n_L + shift))), float(np.sqrt(r.gamma_R * (r.n_R + shift)))


def _friction(p: TwaParams) -> np.ndarray:
    return 0.5 * p.reservoirs.rates(p.spec.L)


def drift(a: np.ndarray, p: TwaParams, H: np.ndarray | None = None) -> np.ndarray:
    """Deterministic part of da/dt."""
    a = np.asarray(a, dtype=complex)
    if H is None:
        H = build_hamiltonian(p.spec)
    return _hop_and_damp(a, p, H) - 1j * p.U * np.abs(a) ** 2 * a


def _hop_and_damp(a, p, H):
    return -1j * (a @ H.T) - _friction(p) * a


def _draw_noise(rng: np.random.Generator, n_steps: int) -> np.ndarray:
    z = rng.standard_normal((n_steps, 2, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def _initial_field(rng: np.random.Generator, p: TwaParams) -> np.ndarray:
    if p.ordering == "wigner":
        z = rng.standard_normal((p.spec.L, 2))
        return 0.5 * (z[:, 0] + 1j * z[:, 1])
    return np.zeros(p.spec.L, dtype=complex)


def langevin_step(
    a: np.ndarray,
    p: TwaParams,
    rng: np.random.Generator | None = None,
    xi: np.ndarray | None = None,
    H: np.ndarray | None = None,
) -> np.ndarray:
    """One time step of length ``p.dt`` (reference implementation).

    Noise is ``xi`` (two unit complex Gaussians for the first and last
    site) or is drawn from ``rng`` exactly as the ensemble runner draws it.
    """
    if xi is None:
        if rng is None:
            raise ValueError("need rng or xi")
        xi = _draw_noise(rng, 1)[0]
    if H is None:
        H = build_hamiltonian(p.spec)
    dt = p.dt
    s0, sL = noise_amplitudes(p)
    dW = np.zeros(p.spec.L, dtype=complex)
    dW[0] += s0 * np.sqrt(dt) * xi[0]
    dW[-1] += sL * np.sqrt(dt) * xi[1]

    x = np.array(a, dtype=complex)
    if p.scheme == "split":
        x = x * np.exp(-0.5j * dt * p.U * np.abs(x) ** 2)
        f0 = _hop_and_damp(x, p, H)
        xp = x + dt * f0 + dW
        x = x + 0.5 * dt * (f0 + _hop_and_damp(xp, p, H)) + dW
        x = x * np.exp(-0.5j * dt * p.U * np.abs(x) ** 2)
    else:
        f0 = drift(x, p, H)
        xp = x + dt * f0 + dW
        x = x + 0.5 * dt * (f0 + drift(xp, p, H)) + dW
    if not np.all(np.isfinite(x)):
        raise DivergenceError("Langevin step produced non-finite amplitudes; reduce dt")
    return x


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Noise stream of trajectory ``index``; independent of batching and scheduling."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


class _Runner:
    """Integrates trajectories in fixed batches of consecutive indices."""

    def __init__(self, p, total_steps, avg_start, avg_every, pop_every, H=None):
        self.p = p
        self.total_steps = total_steps
        self.avg_start = avg_start
        self.avg_every = avg_every
        self.pop_every = pop_every
        S = csr_matrix(build_hamiltonian(p.spec) if H is None else np.asarray(H, dtype=complex))
        self.indptr = S.indptr.astype(np.int64)
        self.indices = S.indices.astype(np.int64)
        self.data = S.data.astype(np.complex128)
        self.fric = _friction(p)
        s0, sL = noise_amplitudes(p)
        self.sig0 = s0 * np.sqrt(p.dt)
        self.sigL = sL * np.sqrt(p.dt)

    def batch(self, ids: range):
        p = self.p
        L = p.spec.L
        n = len(ids)
        rngs = [trajectory_rng(p.seed, i) for i in ids]
        a = np.stack([_initial_field(rng, p) for rng in rngs]) if n else np.zeros((0, L), complex)
        acc = np.zeros((n, L, L), dtype=complex)
        n_pop = self.total_steps // self.pop_every if self.pop_every else 0
        pops = np.zeros((n, n_pop, L))
        if self.pop_every:
            pops0 = (np.abs(a) ** 2)[:, None, :]
        step = 0
        while step < self.total_steps:
            c = min(self.p.chunk_steps, self.total_steps - step)
            xi = np.stack([_draw_noise(rng, c) for rng in rngs])
            _kernel.advance(
                a, self.indptr, self.indices, self.data, self.fric, p.U, p.scheme == "split",
                self.sig0, self.sigL, p.dt, xi, step, self.avg_start, self.avg_every,
                acc, self.pop_every, pops,
            )
            step += c
            bad = ~np.all(np.isfinite(a), axis=1)
            if bad.any():
                idx = ids[int(np.argmax(bad))]
                raise DivergenceError(
                    f"trajectory {idx} (seed {p.seed}) diverged before t = {step * p.dt:g}; reduce dt"
                )
        if self.pop_every:
            pops = np.concatenate([pops0, pops], axis=1)
        return acc, a, pops

    def run(self):
        p = self.p
        bs = p.batch_size
        batches = [range(k, min(k + bs, p.n_traj)) for k in range(0, p.n_traj, bs)]
        if p.workers > 1:
            with ThreadPoolExecutor(max_workers=p.workers) as pool:
                results = list(pool.map(self.batch, batches))
        else:
            results = [self.batch(b) for b in batches]
        acc = np.concatenate([r[0] for r in results])
        final = np.concatenate([r[1] for r in results])
        pops = np.concatenate([r[2] for r in results])
        return acc, final, pops


def _mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full(mean.shape, np.nan)
    dev = np.abs(samples - mean) ** 2
    return mean, np.sqrt(dev.sum(axis=0) / (n - 1) / n)


def estimate_spdm(p: TwaParams, H: np.ndarray | None = None) -> EnsembleEstimate:
    """Run ``p.n_traj`` trajectories and estimate the stationary SPDM.

    ``H`` replaces the lattice hopping matrix (e.g. zeros for decoupled sites).
    """
    if p.n_traj < 2:
        raise ValueError("estimate_spdm needs n_traj >= 2")
    start = p.burn_in_steps
    window = p.window_steps
    n_samples = window // p.sample_every
    if n_samples < 1:
        raise ValueError("avg_window shorter than one sampling interval")
    total = start + n_samples * p.sample_every
    acc, final, _ = _Runner(p, total, start, p.sample_every, 0, H).run()
    log.info("TWA ensemble: %d trajectories, %d steps, %d samples each", p.n_traj, total, n_samples)

    per_traj = acc / n_samples
    snap = final[:, :, None] * final[:, None, :].conj()
    mean, err = _mean_and_stderr(per_traj)
    snap_mean, snap_err = _mean_and_stderr(snap)
    if p.ordering == "wigner":
        mean = mean - 0.5 * np.eye(p.spec.L)
        snap_mean = snap_mean - 0.5 * np.eye(p.spec.L)
    return EnsembleEstimate(mean, err, p.n_traj, snap_mean, snap_err, n_samples)


def current_from_estimate(est: EnsembleEstimate, r: ReservoirParams, estimator: str = "time") -> CurrentRecord:
    if estimator == "time":
        rho, err = est.spdm_mean, est.spdm_stderr
    elif estimator == "snapshot":
        rho, err = est.snapshot_mean, est.snapshot_stderr
    else:
        raise ValueError(f"estimator must be 'time' or 'snapshot', got {estimator!r}")
    value = r.gamma_L * (r.n_L - rho[0, 0].real)
    return CurrentRecord.from_value(value, r, stderr=float(r.gamma_L * err[0, 0]), method=TWA)


def stationary_current_twa(p: TwaParams, estimator: str = "time") -> CurrentRecord:
    """gamma_L (n_L - <|a_1|^2>) with its Monte-Carlo error."""
    return current_from_estimate(estimate_spdm(p), p.reservoirs, estimator)


def transient_populations(
    p: TwaParams, t_final: float, stride: float, H: np.ndarray | None = None
) -> TransientPopulations:
    """Ensemble-averaged site populations from t = 0 to ``t_final``.

    ``burn_in`` and ``avg_window`` are not used.
    """
    every = int(round(stride / p.dt))
    if every < 1:
        raise ValueError("stride must be at least dt")
    n_rec = int(round(t_final / p.dt)) // every
    if n_rec < 1:
        raise ValueError("t_final must cover at least one stride")
    total = n_rec * every
    _, _, pops = _Runner(p, total, total, 1, every, H).run()
    if p.ordering == "wigner":
        pops = pops - 0.5
    mean, err = _mean_and_stderr(pops)
    times = np.arange(n_rec + 1) * every * p.dt
    return TransientPopulations(times, mean, err)
