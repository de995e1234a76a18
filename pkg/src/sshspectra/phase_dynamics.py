"""Pruefer phase chain at energy eps and the Birkhoff sums for IDOS and Lyapunov exponent."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as kern
from .disorder import DisorderSpec, ModelError, RandomStream, kappa_moments, sample_batch
from .ssh_model import TransferMatrix, ensemble_constants, reduced_R_batch

CHUNK = 1 << 16
BURN_IN = 1000
N_BATCHES = 100


class EpsMaxError(ModelError):
    """The energy is outside the window where the half-step lift is unambiguous."""


@lru_cache(maxsize=64)
def cached_constants(spec: DisorderSpec):
    return ensemble_constants(spec)


@lru_cache(maxsize=64)
def cached_moments(spec: DisorderSpec):
    return kappa_moments(spec)


@dataclass(frozen=True)
class PruferState:
    theta: float
    n: int = 0


@dataclass(frozen=True)
class BirkhoffAccumulator:
    """Sums of batch totals, kept as tuples of terms and read out with math.fsum.

    fsum is correctly rounded, so merging is exactly associative and commutative.
    """
    n_steps: int = 0
    phase_terms: tuple = ()
    log_terms: tuple = ()

    @property
    def sum_phase_shift(self):
        return math.fsum(self.phase_terms)

    @property
    def sum_log_norm(self):
        return math.fsum(self.log_terms)

    @property
    def sum_sq_phase_shift(self):
        return math.fsum(x * x for x in self.phase_terms)

    @property
    def sum_sq_log_norm(self):
        return math.fsum(x * x for x in self.log_terms)

    @classmethod
    def single(cls, n, phase, log_norm):
        return cls(int(n), (float(phase),), (float(log_norm),))


def merge_accumulators(a: BirkhoffAccumulator, b: BirkhoffAccumulator) -> BirkhoffAccumulator:
    return BirkhoffAccumulator(a.n_steps + b.n_steps, a.phase_terms + b.phase_terms,
                               a.log_terms + b.log_terms)


@dataclass(frozen=True)
class RotationEstimate:
    eps: float
    n_steps: int
    idos_delta: float
    lyapunov: float
    idos_stderr: float
    lyapunov_stderr: float
    accumulator: BirkhoffAccumulator | None = None
    batch_sizes: tuple = ()


def prufer_half_step_D(theta: float, kappa: float) -> float:
    """theta -> angle of D e_theta, D = diag(kappa, 1/kappa); increment in (-pi/2, pi/2)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    c, s = math.cos(theta), math.sin(theta)
    return theta + math.atan2(c * s * (1 / kappa - kappa), kappa * c * c + s * s / kappa)


def prufer_half_step_R(theta: float, T_R, eps: float) -> float:
    """theta -> angle of R e_theta for a near-identity R (the matrix at energy eps)."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    R = np.asarray(T_R.entries if isinstance(T_R, TransferMatrix) else T_R, dtype=float)
    if eps == 0:
        return theta
    e = np.array([math.cos(theta), math.sin(theta)])
    w = (R - np.eye(2)) @ e
    cross = e[0] * w[1] - e[1] * w[0]
    dot = 1 + e @ w
    if not dot > 0:
        raise EpsMaxError(f"R half-step increment leaves (-pi/2, pi/2) at eps = {eps}")
    return theta + math.atan2(cross, dot)


def step_arrays(spec, eps, t, M):
    """Per-sample inputs for the compiled kernels: kappa and the four entries of R - 1."""
    K, kap = reduced_R_batch(t, M, eps)
    return (np.ascontiguousarray(kap), np.ascontiguousarray(K[:, 0, 0]),
            np.ascontiguousarray(K[:, 0, 1]), np.ascontiguousarray(K[:, 1, 0]),
            np.ascontiguousarray(K[:, 1, 1]))


def check_eps(spec, eps):
    if eps < 0:
        raise EpsMaxError(f"eps = {eps} is negative")
    c = cached_constants(spec)
    if eps > c.eps_max:
        raise EpsMaxError(f"eps = {eps} exceeds eps_max = {c.eps_max}")


def default_theta0(spec):
    """Start on the fixed point of D that attracts at eps = 0."""
    return math.pi / 2 if cached_moments(spec).mean_log_kappa <= 0 else 0.0


def _state_from_theta(theta):
    q = int(math.floor(theta / (math.pi / 2) + 0.5))
    phi = theta - q * math.pi / 2
    return q, math.cos(phi), math.sin(phi)


def _raise_status(status, eps):
    if status == kern.BAD_R_STEP:
        raise EpsMaxError(f"R half-step increment left (-pi/2, pi/2) at eps = {eps}")
    if status == kern.BAD_ORDER:
        raise ModelError(f"floor(2 theta/pi) decreased at eps = {eps}")


def run_birkhoff(spec: DisorderSpec, eps: float, n_steps: int, seed: int, burn_in: int = BURN_IN,
                 batches: int = N_BATCHES, theta0: float | None = None,
                 check_order: bool = True) -> RotationEstimate:
    """Birkhoff sums along one trajectory with disorder from RandomStream(seed).

    The first ``burn_in`` samples drive the transient; the next n_steps are accumulated.
    """
    check_eps(spec, eps)
    if n_steps < batches:
        raise ValueError(f"n_steps = {n_steps} is smaller than the number of batches")
    stream = RandomStream(seed)
    q, u0, u1 = _state_from_theta(default_theta0(spec) if theta0 is None else theta0)
    total = burn_in + n_steps
    batch_log = np.zeros(batches)
    batch_q = np.zeros(batches + 1, dtype=np.int64)
    batch_phi = np.zeros(batches + 1)
    done = 0
    while done < total:
        n = min(CHUNK, total - done)
        t, M = sample_batch(spec, stream, n)
        arrs = step_arrays(spec, eps, t, M)
        q, u0, u1, status = kern.birkhoff_chunk(*arrs, q, u0, u1, done, burn_in, n_steps, batches,
                                                batch_log, batch_q, batch_phi, check_order and eps > 0)
        _raise_status(status, eps)
        done += n
    dq = np.diff(batch_q)
    batch_phase = dq * (math.pi / 2) + np.diff(batch_phi)
    edges = (np.arange(batches + 1) * n_steps + batches - 1) // batches
    sizes = np.diff(edges)
    acc = BirkhoffAccumulator(n_steps, tuple(float(x) for x in batch_phase),
                              tuple(float(x) for x in batch_log))
    norm = math.pi * 2 * spec.L
    ph_means = batch_phase / sizes
    lg_means = batch_log / sizes
    return RotationEstimate(
        eps=float(eps),
        n_steps=int(n_steps),
        idos_delta=acc.sum_phase_shift / (norm * n_steps),
        lyapunov=acc.sum_log_norm / n_steps,
        idos_stderr=float(np.std(ph_means, ddof=1) / math.sqrt(batches) / norm),
        lyapunov_stderr=float(np.std(lg_means, ddof=1) / math.sqrt(batches)),
        accumulator=acc,
        batch_sizes=tuple(int(s) for s in sizes),
    )


def evolve_phases(kap, K, thetas):
    """Reference numpy evolution of several phases under one realization.

    Returns an array (2*n + 1, len(thetas)) of lifted phases after every half-step.
    """
    thetas = np.array(thetas, dtype=float)
    out = [thetas.copy()]
    for k, Kn in zip(kap, K):
        c, s = np.cos(thetas), np.sin(thetas)
        thetas = thetas + np.arctan2(c * s * (1 / k - k), k * c * c + s * s / k)
        out.append(thetas.copy())
        e = np.stack([np.cos(thetas), np.sin(thetas)])
        w = Kn @ e
        thetas = thetas + np.arctan2(e[0] * w[1] - e[1] * w[0], 1 + (e * w).sum(axis=0))
        out.append(thetas.copy())
    return np.array(out)
