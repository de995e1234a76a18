"""Finite-volume Hamiltonian and eigenvalue counting by matrix inertia.

Site ordering inside a cell is [lower e_1..e_L, upper e_1..e_L], so the on-site block is
[[0, M^T], [M, 0]] and the bond -t_{n+1} between upper e_L of cell n and lower e_1 of
cell n+1 sits on the first superdiagonal.  The matrix is banded with half-bandwidth 2L-1
(tridiagonal for L = 1).  Cell n uses the n-th sample drawn from RandomStream(seed), the
same realization that run_birkhoff consumes with burn_in=0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .disorder import DisorderSpec, ModelError, RandomStream, sample_batch

SHIFT_REL = 1e-12
PIVOT_REL = 1e-14
MAX_SHIFTS = 3
SAFE_MIN = np.finfo(float).tiny


@dataclass(frozen=True)
class FiniteHamiltonian:
    N: int
    L: int
    t: np.ndarray        # t[n] couples cell n-1 to cell n; t[0] is unused (open boundary)
    M: np.ndarray        # (N, L, L)

    @property
    def dim(self):
        return 2 * self.L * self.N

    @property
    def bandwidth(self):
        return 2 * self.L - 1

    def norm_bound(self):
        """Row-sum bound on the operator norm."""
        m = np.abs(self.M)
        rows = max(m.sum(axis=2).max(), m.sum(axis=1).max())
        return float(rows + np.abs(self.t[1:]).max(initial=0.0))

    def banded(self):
        """Upper banded storage ab[u + i - j, j] = H[i, j] with u = bandwidth."""
        u, L = self.bandwidth, self.L
        ab = np.zeros((u + 1, self.dim))
        for n in range(self.N):
            o = 2 * L * n
            for i in range(L):
                for j in range(L):
                    # H[o + i, o + L + j] = M^T[i, j] = M[j, i]
                    ab[u + i - (L + j), o + L + j] = self.M[n, j, i]
            if n > 0:
                ab[u - 1, o] = -self.t[n]
        return ab

    def to_dense(self):
        H = np.zeros((self.dim, self.dim))
        ab = self.banded()
        u = self.bandwidth
        for k in range(1, u + 1):
            d = ab[u - k, k:]
            H[np.arange(self.dim - k), np.arange(k, self.dim)] = d
        return H + H.T


@dataclass(frozen=True)
class InertiaCount:
    count_leq: int
    E: float
    shift_safe: bool = True


def assemble_hamiltonian(spec: DisorderSpec, N: int, seed: int) -> FiniteHamiltonian:
    if N < 1:
        raise ValueError("N must be positive")
    t, M = sample_batch(spec, RandomStream(seed), N)
    return FiniteHamiltonian(int(N), spec.L, np.ascontiguousarray(t), np.ascontiguousarray(M))


@njit(cache=True)
def _sturm_chain(mass, hop, E):
    """Negative pivots of T - E for the zero-diagonal tridiagonal matrix with
    off-diagonals mass[0], -hop[1], mass[1], -hop[2], ...

    Tiny pivots are replaced by -pivmin (the usual bisection convention), which counts
    an eigenvalue sitting exactly at E as <= E.
    """
    n = mass.shape[0]
    bmax = 0.0
    for k in range(n):
        bmax = max(bmax, mass[k] * mass[k])
        if k > 0:
            bmax = max(bmax, hop[k] * hop[k])
    pivmin = 2.2250738585072014e-308 * max(bmax, 1.0)
    count = 0
    d = 1.0
    first = True
    for k in range(n):
        for half in range(2):
            if first:
                d = -E
                first = False
            else:
                if half == 0:
                    b = hop[k]
                else:
                    b = mass[k]
                d = -E - b * b / d
            if abs(d) < pivmin:
                d = -pivmin
            if d < 0:
                count += 1
    return count


@njit(cache=True)
def _block_chain(M, t, E, tol):
    """Negative eigenvalues of the Schur complements S_n of H - E, cell by cell.

    Returns (count, min_abs_eig_over_tol_ok).
    """
    N = M.shape[0]
    L = M.shape[1]
    count = 0
    gamma = 0.0
    ok = True
    S = np.zeros((2 * L, 2 * L))
    for n in range(N):
        S[:, :] = 0.0
        for i in range(L):
            for j in range(L):
                S[L + i, j] = M[n, i, j]
                S[j, L + i] = M[n, i, j]
        for i in range(2 * L):
            S[i, i] = -E
        if n > 0:
            S[0, 0] -= gamma
        w, v = np.linalg.eigh(S)
        for k in range(2 * L):
            if abs(w[k]) < tol:
                ok = False
            if w[k] < 0:
                count += 1
        if n + 1 < N:
            # (S^{-1})_{last, last}, the entry feeding the next cell's lower e_1
            g = 0.0
            for k in range(2 * L):
                g += v[2 * L - 1, k] * v[2 * L - 1, k] / w[k]
            gamma = t[n + 1] * t[n + 1] * g
    return count, ok


def count_eigenvalues_leq(H: FiniteHamiltonian, E: float) -> InertiaCount:
    """#{eigenvalues <= E} by Sylvester inertia of H - E."""
    E = float(E)
    if H.L == 1:
        c = _sturm_chain(np.ascontiguousarray(H.M[:, 0, 0]), H.t, E)
        return InertiaCount(int(c), E, True)
    scale = max(H.norm_bound(), abs(E), 1.0)
    tol = PIVOT_REL * scale
    shift = SHIFT_REL * scale
    Es = E
    for k in range(MAX_SHIFTS + 1):
        c, ok = _block_chain(H.M, H.t, Es, tol)
        if ok:
            return InertiaCount(int(c), E, k == 0)
        # move just above E so an eigenvalue at E is counted
        Es = E + (k + 1) * shift
    raise ModelError(f"near-zero pivot persists after {MAX_SHIFTS} shifts at E = {E!r}")


def idos_oracle(spec: DisorderSpec, N: int, E: float, seed: int) -> float:
    H = assemble_hamiltonian(spec, N, seed)
    return count_eigenvalues_leq(H, E).count_leq / H.dim


def random_hopping_matrix(H: FiniteHamiltonian):
    """For L = 1, the dense tridiagonal matrix with alternating hoppings m_1, -t_2, m_2, ..."""
    if H.L != 1:
        raise ValueError("only defined for L = 1")
    off = np.empty(H.dim - 1)
    off[0::2] = H.M[:, 0, 0]
    off[1::2] = -H.t[1:]
    return np.diag(off, 1) + np.diag(off, -1)


__all__ = ["FiniteHamiltonian", "InertiaCount", "assemble_hamiltonian", "count_eigenvalues_leq",
           "idos_oracle", "random_hopping_matrix"]
