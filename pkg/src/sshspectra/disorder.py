"""Random model data for the generalized SSH chain.

A sample sigma = (omega, omega') determines the hopping t = 1 + lambda*omega and the
mass block M = (m*1 + mu*omega')/2.  Everything is real.  The L=1 random hopping model
can also be given directly through a pair of laws for (t, m).

Stream contract: every sample consumes a fixed number of uniform draws from the
caller's numpy Generator, ``1 + L*L`` for the general model (omega first, then the
entries of omega' in row-major order) and ``2`` for the L=1 fast path (t then m).
Batched sampling draws the same uniforms in the same order, so a batch of n samples
equals n sequential calls.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

BALANCE_TOL = 1e-12
QUAD_ORDER = 48          # Gauss-Legendre nodes per uniform coordinate
GRID_POINTS = 65         # support grid (endpoints included) for ess sup / ess inf
ENUM_LIMIT = 1 << 16     # exhaustive invertibility walk up to this many support points
PIVOT_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a model violates its structural assumptions."""


def RandomStream(seed) -> np.random.Generator:
    """The random stream used throughout: numpy's PCG64 generator."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ScalarDistribution:
    kind: str
    atoms: tuple = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind == "discrete":
            if not self.atoms:
                raise ModelError("discrete law needs at least one atom")
            probs = [p for _, p in self.atoms]
            if any(p < 0 or p > 1 for p in probs):
                raise ModelError("atom probabilities must lie in [0, 1]")
            if abs(math.fsum(probs) - 1.0) > 1e-12:
                raise ModelError(f"atom probabilities sum to {math.fsum(probs)!r}, not 1")
        elif self.kind == "uniform":
            if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
                raise ModelError(f"uniform law needs finite lo < hi, got {self.lo}, {self.hi}")
        else:
            raise ModelError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def point(cls, value):
        return cls("discrete", ((float(value), 1.0),))

    @classmethod
    def discrete(cls, values, probs):
        return cls("discrete", tuple((float(v), float(p)) for v, p in zip(values, probs)))

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def parse(cls, text: str) -> "ScalarDistribution":
        """Parse ``atoms: 2:0.25, 0.5:0.75`` or ``uniform: -0.5, 0.5``."""
        kind, sep, body = text.strip().strip('"').partition(":")
        kind = kind.strip().lower()
        if not sep:
            raise ModelError(f"cannot parse distribution {text!r}")
        try:
            if kind == "atoms":
                atoms = []
                for item in body.split(","):
                    v, p = item.split(":")
                    atoms.append((float(v), float(p)))
                return cls("discrete", tuple(atoms))
            if kind == "uniform":
                lo, hi = (float(s) for s in body.split(","))
                return cls.uniform(lo, hi)
        except ValueError as exc:
            raise ModelError(f"cannot parse distribution {text!r}: {exc}") from None
        raise ModelError(f"unknown distribution kind {kind!r} in {text!r}")

    def format(self) -> str:
        if self.kind == "discrete":
            return "atoms: " + ", ".join(f"{v!r}:{p!r}" for v, p in self.atoms)
        return f"uniform: {self.lo!r}, {self.hi!r}"

    @property
    def is_discrete(self):
        return self.kind == "discrete"

    @property
    def values(self):
        return np.array([v for v, _ in self.atoms])

    @property
    def probs(self):
        return np.array([p for _, p in self.atoms])

    def from_uniform(self, u):
        """Inverse CDF applied to uniforms in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.is_discrete:
            cdf = np.cumsum(self.probs)
            idx = np.searchsorted(cdf, u, side="right")
            return self.values[np.minimum(idx, len(self.atoms) - 1)]
        return self.lo + (self.hi - self.lo) * u

    def support_bounds(self):
        if self.is_discrete:
            v = self.values
            return float(v.min()), float(v.max())
        return self.lo, self.hi

    def max_abs(self):
        lo, hi = self.support_bounds()
        return max(abs(lo), abs(hi))

    def nodes(self, order=QUAD_ORDER):
        """Points and weights integrating against the law (exact for atoms)."""
        if self.is_discrete:
            keep = self.probs > 0
            return self.values[keep], self.probs[keep]
        x, w = np.polynomial.legendre.leggauss(order)
        return self.lo + (self.hi - self.lo) * (x + 1) / 2, w / 2

    def grid(self, n=GRID_POINTS):
        """Support points used for ess sup / ess inf."""
        if self.is_discrete:
            return self.values[self.probs > 0]
        return np.linspace(self.lo, self.hi, n)


@dataclass(frozen=True)
class SigmaSample:
    omega: float
    omega_prime: np.ndarray
    t: float
    M: np.ndarray

    @property
    def L(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class DisorderSpec:
    L: int = 1
    m: float = 1.0
    lambda_coupling: float = 0.0
    mu_coupling: float = 0.0
    omega_dist: ScalarDistribution = field(default_factory=lambda: ScalarDistribution.point(0.0))
    omega_prime_dist: ScalarDistribution = field(default_factory=lambda: ScalarDistribution.point(0.0))
    fast_path_L1: tuple | None = None

    def __post_init__(self):
        if self.fast_path_L1 is not None:
            if self.L != 1:
                raise ModelError("the (t, m) fast path is only defined for L = 1")
            t_dist, m_dist = self.fast_path_L1
            for name, d in (("t", t_dist), ("m", m_dist)):
                if _law_touches_zero(d):
                    raise ModelError(f"{name} law has zero in its support")
            return
        if int(self.L) != self.L or self.L < 1:
            raise ModelError(f"L must be a positive integer, got {self.L}")
        if not self.m > 0:
            raise ModelError(f"mass m must be positive, got {self.m}")
        if self.lambda_coupling < 0 or self.mu_coupling < 0:
            raise ModelError("couplings must be non-negative")
        t_lo, t_hi = self.omega_dist.support_bounds()
        t_vals = 1 + self.lambda_coupling * np.array([t_lo, t_hi])
        if self.omega_dist.is_discrete:
            t_vals = 1 + self.lambda_coupling * self.omega_dist.values
            if np.any(t_vals == 0):
                raise ModelError("t = 1 + lambda*omega vanishes on the support")
        elif t_vals.min() <= 0 <= t_vals.max():
            raise ModelError("t = 1 + lambda*omega vanishes on the support")
        self._check_invertible()

    def _check_invertible(self):
        d = self.omega_prime_dist
        L = self.L
        if self.mu_coupling == 0:
            return
        if d.is_discrete and len(d.grid()) ** (L * L) <= ENUM_LIMIT:
            vals = d.grid()
            for combo in itertools.product(vals, repeat=L * L):
                M = 0.5 * (self.m * np.eye(L) + self.mu_coupling * np.reshape(combo, (L, L)))
                if abs(np.linalg.det(M)) < PIVOT_TOL * max(1.0, np.abs(M).max()) ** L:
                    raise ModelError(f"M singular on the support at omega' = {np.reshape(combo, (L, L)).tolist()}")
            return
        # Gershgorin: each row of m*1 + mu*omega' is diagonally dominant
        if not self.mu_coupling < self.m / (2 * L * d.max_abs()):
            raise ModelError(
                f"cannot certify M invertible: need mu < m/(2 L max|omega'|) = {self.m / (2 * L * d.max_abs())}")

    @property
    def is_fast_path(self):
        return self.fast_path_L1 is not None

    @property
    def draws_per_sample(self):
        return 2 if self.is_fast_path else 1 + self.L * self.L

    @classmethod
    def random_hopping(cls, t_dist, m_dist):
        """L = 1 model given directly by the laws of t and m."""
        return cls(L=1, fast_path_L1=(t_dist, m_dist))

    def describe(self):
        if self.is_fast_path:
            return {"L": 1, "t_dist": self.fast_path_L1[0].format(), "m_dist": self.fast_path_L1[1].format()}
        return {"L": self.L, "m": self.m, "lambda": self.lambda_coupling, "mu": self.mu_coupling,
                "omega_dist": self.omega_dist.format(), "omega_prime_dist": self.omega_prime_dist.format()}


def _law_touches_zero(d):
    if d.is_discrete:
        return bool(np.any(d.values[d.probs > 0] == 0))
    return d.lo <= 0 <= d.hi


def _from_uniforms(spec, u):
    """Map an (n, draws_per_sample) block of uniforms to arrays (omega, omega', t, M)."""
    n = u.shape[0]
    if spec.is_fast_path:
        t_dist, m_dist = spec.fast_path_L1
        t = t_dist.from_uniform(u[:, 0])
        mm = m_dist.from_uniform(u[:, 1])
        return t.copy(), mm.reshape(n, 1, 1).copy(), t, mm.reshape(n, 1, 1)
    L = spec.L
    omega = spec.omega_dist.from_uniform(u[:, 0])
    omega_p = spec.omega_prime_dist.from_uniform(u[:, 1:]).reshape(n, L, L)
    t = 1 + spec.lambda_coupling * omega
    M = 0.5 * (spec.m * np.eye(L) + spec.mu_coupling * omega_p)
    return omega, omega_p, t, M


def sample_batch(spec: DisorderSpec, stream: np.random.Generator, n: int):
    """Draw n samples; returns (t, M) with shapes (n,) and (n, L, L)."""
    u = stream.random((n, spec.draws_per_sample))
    _, _, t, M = _from_uniforms(spec, u)
    return t, M


def sample_sigma(spec: DisorderSpec, stream: np.random.Generator) -> SigmaSample:
    u = stream.random((1, spec.draws_per_sample))
    omega, omega_p, t, M = _from_uniforms(spec, u)
    M = M[0]
    if spec.L > 1 and abs(np.linalg.det(M)) < PIVOT_TOL:
        raise ModelError(f"sampled M is singular: {M.tolist()}")
    return SigmaSample(float(omega[0]), omega_p[0], float(t[0]), M)


def make_sample(t, M) -> SigmaSample:
    """Build a sample from explicit (t, M); used for direct L=1 hopping data."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return SigmaSample(float(t), M.copy(), float(t), M)


def corner_inverse(M):
    """(M^{-1})_{1L}, vectorized over leading axes."""
    M = np.asarray(M, dtype=float)
    L = M.shape[-1]
    if L == 1:
        return 1.0 / M[..., 0, 0]
    e = np.zeros(M.shape[:-1] + (1,))
    e[..., L - 1, 0] = 1.0
    return np.linalg.solve(M, e)[..., 0, 0]


def kappa_array(t, M):
    """kappa = 1/|(M^{-1})_{1L} t| for arrays of samples."""
    r = np.asarray(corner_inverse(M)) * np.asarray(t)
    scale = np.abs(np.asarray(M)).max(axis=(-1, -2))
    if np.any(np.abs(r) * scale < PIVOT_TOL):
        raise ModelError("kappa undefined: zero coupling entry")
    return 1.0 / np.abs(r)


def kappa(sample: SigmaSample) -> float:
    return float(kappa_array(sample.t, sample.M))


def support_points(spec: DisorderSpec, order=QUAD_ORDER, grid=False):
    """Weighted points (w, t, M) representing the law of sigma.

    Discrete coordinates are enumerated exactly.  Uniform coordinates use Gauss-Legendre
    nodes (or an endpoint-including grid with ``grid=True``; weights are then meaningless).
    """
    def pts(d):
        if grid:
            g = d.grid()
            return g, np.full(len(g), 1.0 / len(g))
        return d.nodes(order)

    if spec.is_fast_path:
        (tv, tw), (mv, mw) = (pts(d) for d in spec.fast_path_L1)
        T, Mm = np.meshgrid(tv, mv, indexing="ij")
        W = np.outer(tw, mw)
        return W.ravel(), T.ravel(), Mm.reshape(-1, 1, 1)
    L = spec.L
    ov, ow = pts(spec.omega_dist)
    if spec.mu_coupling == 0:
        pv, pw = np.zeros(1), np.ones(1)
        n_entries = 1
    else:
        pv, pw = pts(spec.omega_prime_dist)
        n_entries = L * L
    if len(pv) ** n_entries * len(ov) > 2_000_000:
        raise ModelError("support too large for tensor enumeration; lower the quadrature order")
    idx = np.array(list(itertools.product(range(len(pv)), repeat=n_entries)))
    wp = np.prod(pw[idx], axis=1)
    if spec.mu_coupling == 0:
        Mp = np.broadcast_to(0.5 * spec.m * np.eye(L), (1, L, L))
    else:
        Mp = 0.5 * (spec.m * np.eye(L) + spec.mu_coupling * pv[idx].reshape(-1, L, L))
    t = 1 + spec.lambda_coupling * ov
    W = np.outer(ow, wp).ravel()
    T = np.repeat(t, len(wp))
    M = np.tile(Mp, (len(t), 1, 1))
    return W, T, M


@dataclass(frozen=True)
class KappaStats:
    mean_log_kappa: float
    mean_log_kappa_sq: float
    C0: float
    chi_second_moment: float
    balanced: bool
    degenerate: bool = False
    exact: bool = True
    quadrature_order: int | None = None
    chi_third_moment: float = 0.0

    @property
    def mean_chi(self):
        return self.mean_log_kappa / self.C0 if self.C0 > 0 else 0.0


def _is_exact(spec):
    if spec.is_fast_path:
        return all(d.is_discrete for d in spec.fast_path_L1)
    return spec.omega_dist.is_discrete and (spec.mu_coupling == 0 or spec.omega_prime_dist.is_discrete)


def _log_kappa_law(spec):
    w, t, M = support_points(spec)
    keep = w > 0
    return w[keep], np.log(kappa_array(t[keep], M[keep]))


def kappa_moments(spec: DisorderSpec) -> KappaStats:
    w, lk = _log_kappa_law(spec)
    exact = _is_exact(spec)
    mean = math.fsum(w * lk)
    mean_sq = math.fsum(w * lk * lk)
    _, tg, Mg = support_points(spec, grid=True)
    C0 = float(np.abs(np.log(kappa_array(tg, Mg))).max())
    degenerate = C0 == 0.0
    if degenerate:
        chi2 = chi3 = 0.0
    else:
        chi2 = mean_sq / C0 ** 2
        chi3 = math.fsum(w * lk ** 3) / C0 ** 3
    return KappaStats(
        mean_log_kappa=mean,
        mean_log_kappa_sq=mean_sq,
        C0=C0,
        chi_second_moment=chi2,
        balanced=abs(mean) < BALANCE_TOL,
        degenerate=degenerate,
        exact=exact,
        quadrature_order=None if exact else QUAD_ORDER,
        chi_third_moment=chi3,
    )


def kappa_mgf(spec: DisorderSpec, rho: float) -> float:
    """E(kappa^rho)."""
    w, lk = _log_kappa_law(spec)
    return math.fsum(w * np.exp(rho * lk))


def log_kappa_batch(spec: DisorderSpec, stream: np.random.Generator, n: int):
    """log(kappa) of n consecutive samples; same draws as sample_batch."""
    if spec.is_fast_path and all(d.is_discrete for d in spec.fast_path_L1):
        t_dist, m_dist = spec.fast_path_L1
        from ._kernels import table_lookup2
        u = stream.random((n, 2))
        table = np.log(np.abs(m_dist.values[None, :] / t_dist.values[:, None]))
        return table_lookup2(u, np.cumsum(t_dist.probs), np.cumsum(m_dist.probs), table)
    t, M = sample_batch(spec, stream, n)
    return np.log(kappa_array(t, M))
