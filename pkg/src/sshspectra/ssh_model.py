"""Reduced 2x2 transfer matrices near the band center and their expansion constants.

Conventions (real parameters throughout).  A cell carries an upper and a lower sector of
L orbitals with on-site block [[0, M], [M^T, 0]].  Neighbouring cells couple through a
single bond between the last upper orbital of cell n and the first lower orbital of
cell n+1, with weight -t_{n+1}.  The four scalars entering the reduced transfer matrix
are the resolvent entries on the lower e_1 ("-") and upper e_L ("+") orbitals.  With this
choice g_pm(0) = -(M^{-1})_{1L} and kappa = 1/|(M^{-1})_{1L} t|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import (DisorderSpec, ModelError, SigmaSample, corner_inverse, kappa,
                       kappa_array, kappa_moments, support_points)

FD_STEP = 1e-5
DET_TOL = 1e-8
CONT_MARGIN = (0.9, 1.1)   # safety factors on C1 and on (C2, C3) for continuous laws
EPS_GRID = 41              # |eps| grid used to bound the second-order remainder


class HypothesisError(ModelError):
    """The law violates the positivity/finiteness requirements on C0..C3."""


J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class TransferMatrix:
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def det(self):
        a = self.entries
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]

    def symplectic_defect(self):
        T = self.entries
        return float(np.abs(T.T @ J @ T - J).max())


@dataclass(frozen=True)
class ResolventEntries:
    g_mm: float
    g_mp: float
    g_pm: float
    g_pp: float


@dataclass(frozen=True)
class ExpansionCoefficients:
    a: float
    b: float
    c: float
    second_order_bound: float


@dataclass(frozen=True)
class EnsembleConstants:
    C0: float
    C1: float
    C2: float
    C3: float
    eps_max: float
    degenerate: bool = False


def local_block(M):
    M = np.asarray(M, dtype=float)
    L = M.shape[-1]
    H = np.zeros(M.shape[:-2] + (2 * L, 2 * L))
    H[..., :L, L:] = M
    H[..., L:, :L] = np.swapaxes(M, -1, -2)
    return H


def _resolvent_batch(M, E):
    """Arrays (g_mm, g_mp, g_pm, g_pp) for a stack of blocks M at energy E."""
    M = np.asarray(M, dtype=float)
    L = M.shape[-1]
    A = E * np.eye(2 * L) - local_block(M)
    P = np.zeros((2 * L, 2))
    P[L, 0] = 1.0        # "-": first orbital of the lower sector
    P[L - 1, 1] = 1.0    # "+": last orbital of the upper sector
    X = np.linalg.solve(A, np.broadcast_to(P, A.shape[:-2] + P.shape))
    G = P.T @ X
    return G[..., 0, 0], G[..., 0, 1], G[..., 1, 0], G[..., 1, 1]


def resolvent_entries(M, E: float) -> ResolventEntries:
    try:
        g = _resolvent_batch(np.atleast_2d(M), E)
    except np.linalg.LinAlgError:
        raise ModelError(f"local block is singular at E = {E!r}") from None
    return ResolventEntries(*(float(x) for x in g))


def _transfer_batch(t, M, E):
    """Normalized transfer matrices for arrays of samples, shape (n, 2, 2)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    M = np.asarray(M, dtype=float).reshape(len(t), *np.shape(M)[-2:])
    if M.shape[-1] == 1:
        m = M[:, 0, 0]
        T = np.empty((len(t), 2, 2))
        T[:, 0, 0] = (m * m - E * E) / (m * t)
        T[:, 0, 1] = -E * t / m
        T[:, 1, 0] = E / (m * t)
        T[:, 1, 1] = t / m
        return T * np.sign(t / m)[:, None, None]
    gmm, gmp, gpm, gpp = _resolvent_batch(M, E)
    if np.any(gmp == 0):
        raise ModelError("transfer matrix undefined: g_mp = 0")
    T = np.empty((len(t), 2, 2))
    T[:, 0, 0] = -1.0 / (gmp * t)
    T[:, 0, 1] = -gmm / gmp * t
    T[:, 1, 0] = gpp / (gmp * t)
    T[:, 1, 1] = -(gpm - gpp * gmm / gmp) * t
    # sign making the E = 0 limit +diag(kappa, 1/kappa)
    T *= np.sign(corner_inverse(M) * t)[:, None, None]
    det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
    if np.any(np.abs(det - 1) >= DET_TOL):
        raise ModelError(f"transfer matrix determinant {det[np.argmax(np.abs(det - 1))]!r} is not 1")
    return T / np.sqrt(det)[:, None, None]


def transfer_matrix(sample: SigmaSample, E: float) -> TransferMatrix:
    try:
        T = _transfer_batch(sample.t, sample.M[None], E)[0]
    except np.linalg.LinAlgError:
        raise ModelError(f"local block is singular at E = {E!r}") from None
    return TransferMatrix(T)


def reduced_R_batch(t, M, eps):
    """R = T^eps D^{-1} minus identity, shape (n, 2, 2), plus kappa (n,).

    Computed without forming 1 + O(eps) where a closed form is available (L = 1).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    M = np.asarray(M, dtype=float)
    kap = kappa_array(t, M)
    n = len(t)
    if M.shape[-1] == 1:
        inv_m2 = 1.0 / M[:, 0, 0] ** 2
        K = np.zeros((n, 2, 2))
        K[:, 0, 0] = -eps * eps * inv_m2
        K[:, 0, 1] = -eps
        K[:, 1, 0] = eps * inv_m2
        return K, kap
    T = _transfer_batch(t, M, eps)
    R = T * np.stack([1.0 / kap, kap], axis=-1)[:, None, :]
    return R - np.eye(2), kap


def _R(sample, eps):
    K, _ = reduced_R_batch(sample.t, sample.M[None], eps)
    return np.eye(2) + K[0]


def expansion_coefficients(sample: SigmaSample) -> ExpansionCoefficients:
    if sample.L == 1:
        inv = 1.0 / sample.M[0, 0] ** 2
        return ExpansionCoefficients((1 + inv) / 2, (inv - 1) / 2, 0.0, inv)
    h = FD_STEP
    Rp, R0, Rm = _R(sample, h), _R(sample, 0.0), _R(sample, -h)
    d = (Rp - Rm) / (2 * h)
    a = (d[1, 0] - d[0, 1]) / 2
    b = (d[1, 0] + d[0, 1]) / 2
    c = (d[0, 0] - d[1, 1]) / 2
    if a < -1e-8 or a * a < b * b + c * c - 1e-8:
        raise ModelError(f"expansion coefficients a={a}, b={b}, c={c} violate a >= sqrt(b^2+c^2)")
    second = np.linalg.norm((Rp - 2 * R0 + Rm) / (h * h) / 2, 2)
    return ExpansionCoefficients(float(a), float(b), float(c), float(second))


def _window(M):
    """Energy window inside which the local resolvent stays analytic."""
    s = np.linalg.svd(np.asarray(M), compute_uv=False)
    return float(s[..., -1].min())


def _remainder_bound(t, M, a, b, eps_hi):
    """sup over 0 < |eps| <= eps_hi of ||R^eps - 1 - eps*(a*J' + b*sx)|| / eps^2."""
    grid = np.linspace(eps_hi / EPS_GRID, eps_hi, EPS_GRID)
    lin = np.zeros((len(t), 2, 2))
    lin[:, 0, 1] = b - a
    lin[:, 1, 0] = a + b
    best = np.zeros(len(t))
    for e in np.concatenate([grid, -grid]):
        K, _ = reduced_R_batch(t, M, e)
        rem = np.linalg.norm(K - e * lin, 2, axis=(-2, -1)) / (e * e)
        best = np.maximum(best, rem)
    return best


def ensemble_constants(spec: DisorderSpec) -> EnsembleConstants:
    ks = kappa_moments(spec)
    exact = ks.exact
    _, t, M = support_points(spec, grid=True)
    L = M.shape[-1]
    if L == 1:
        inv = 1.0 / M[:, 0, 0] ** 2
        a, b = (1 + inv) / 2, (inv - 1) / 2
        lo, hi = a - np.abs(b), a + np.abs(b)
        C1, C2, C3 = float(lo.min()), float(hi.max()), float(inv.max())
        window = 1.0
    else:
        co = [expansion_coefficients(SigmaSample(float(ti), Mi, float(ti), Mi)) for ti, Mi in zip(t, M)]
        a = np.array([c.a for c in co])
        b = np.array([c.b for c in co])
        C1 = float((a - np.abs(b)).min())
        C2 = float((a + np.abs(b)).max())
        window = min(1.0, 0.5 * _window(M))
        C3 = float(_remainder_bound(t, M, a, b, window).max())
    if not exact:
        C1, C2, C3 = C1 * CONT_MARGIN[0], C2 * CONT_MARGIN[1], C3 * CONT_MARGIN[1]
    if not C1 > 0:
        raise HypothesisError(f"C1 = {C1} is not positive")
    C3 = max(C3, 1e-300)
    root = (-C2 + math.sqrt(C2 * C2 + 4 * C3)) / (2 * C3)
    eps_max = min(0.99 * root, window)
    return EnsembleConstants(ks.C0, C1, C2, C3, eps_max, degenerate=ks.degenerate)


def hopping_factor(t_hat, E):
    """One-step factor of the random hopping chain; two of them give T^E up to an overall sign."""
    return np.array([[-E / t_hat, -t_hat], [1.0 / t_hat, 0.0]])


__all__ = [
    "TransferMatrix", "ResolventEntries", "ExpansionCoefficients", "EnsembleConstants",
    "HypothesisError", "resolvent_entries", "transfer_matrix", "expansion_coefficients",
    "ensemble_constants", "reduced_R_batch", "local_block", "kappa",
]
