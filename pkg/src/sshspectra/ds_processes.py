"""Dyson-Schmidt variable, passage times and the slower/faster comparison processes.

The DS variable is x = -cot(theta).  A step acts by x -> Q.(D.x) with D.x = kappa^2 x and
Q = diag(1,-1) R diag(1,-1).  The point at infinity is kept projectively as math.inf.

Passage convention: N(1) is the first step entering [0, inf) and N(2) the next exit, so
the positive half-axis is visited on steps N(1) .. N(2)-1.  Comparison processes for the
first positive passage read disorder sample N(1) + n on their step n -> n+1, which is the
sample driving the true step x_{N(1)+n} -> x_{N(1)+n+1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .disorder import (DisorderSpec, ModelError, RandomStream, SigmaSample, kappa_array, log_kappa_batch,
                       sample_batch)
from .phase_dynamics import (CHUNK, _raise_status, cached_constants, cached_moments, check_eps,
                             step_arrays)
from .ssh_model import EnsembleConstants, reduced_R_batch

GUARD = 10 ** 9
INF = math.inf

ExtendedReal = float  # a real number or math.inf (the unsigned point at infinity)


class FasterConstructionError(ModelError):
    """B^2 - 4AC < 0: the faster comparison thresholds do not exist."""


def _proj(x):
    return (1.0, 0.0) if math.isinf(x) else (x, 1.0)


def _unproj(u, v):
    if v == 0:
        return INF
    return u / v


def Q_matrix(sample: SigmaSample, eps: float):
    K, _ = reduced_R_batch(sample.t, sample.M[None], eps)
    R = np.eye(2) + K[0]
    return np.array([[R[0, 0], -R[0, 1]], [-R[1, 0], R[1, 1]]])


def mobius(A, x):
    u, v = _proj(x)
    return _unproj(A[0, 0] * u + A[0, 1] * v, A[1, 0] * u + A[1, 1] * v)


def ds_step(x: ExtendedReal, sample: SigmaSample, eps: float) -> ExtendedReal:
    k = float(kappa_array(sample.t, sample.M[None])[0])
    u, v = _proj(x)
    u, v = k * u, v / k
    Q = Q_matrix(sample, eps)
    nu, nv = Q[0, 0] * u + Q[0, 1] * v, Q[1, 0] * u + Q[1, 1] * v
    return _unproj(nu, nv)


@dataclass(frozen=True)
class PassageRecord:
    times: np.ndarray
    parities: np.ndarray
    n_steps: int = 0


def record_passages(spec: DisorderSpec, eps: float, n_steps: int, seed: int) -> PassageRecord:
    """Sign changes of x along one trajectory started at x_0 = inf (theta_0 = 0)."""
    check_eps(spec, eps)
    stream = RandomStream(seed)
    q, u0, u1 = 0, 1.0, 0.0
    times, pars = [], []
    done = 0
    while done < n_steps:
        n = min(CHUNK, n_steps - done)
        t, M = sample_batch(spec, stream, n)
        tb = np.empty(2 * n + 4, dtype=np.int64)
        pb = np.empty(2 * n + 4, dtype=np.int64)
        q, u0, u1, c, status = kern.crossing_chunk(*step_arrays(spec, eps, t, M), q, u0, u1, done, tb, pb)
        _raise_status(status, eps)
        times.append(tb[:c])
        pars.append(pb[:c])
        done += n
    return PassageRecord(np.concatenate(times), np.concatenate(pars), n_steps)


@dataclass(frozen=True)
class ComparisonThresholds:
    eps: float
    C0: float
    xhat_minus: float
    xhat_c: float
    xhat_plus: float
    lam: float
    Lambda: float
    xtilde_minus: float
    xtilde_c: float
    xtilde_plus: float
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0

    @property
    def yhat_minus(self):
        return math.log(self.xhat_minus / self.xhat_c) / (2 * self.C0)

    @property
    def yhat_plus(self):
        return math.log(self.xhat_plus / self.xhat_c) / (2 * self.C0)

    @property
    def ytilde_minus(self):
        return math.log(self.xtilde_minus / self.xtilde_c) / (2 * self.C0)

    @property
    def ytilde_plus(self):
        return math.log(self.xtilde_plus / self.xtilde_c) / (2 * self.C0)

    @property
    def faster_ordered(self):
        return 0 < self.xtilde_minus < self.xtilde_c < self.xtilde_plus


def default_lambda(eps):
    return 1.0 / math.log(eps) ** 2


def thresholds(constants: EnsembleConstants, eps: float, lam: float | None = None,
               need_faster: bool = True) -> ComparisonThresholds:
    """Threshold points of both comparison processes; lam=None selects (log eps)^-2.

    With need_faster=False a failing faster construction leaves its fields as nan.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps = {eps} must lie in (0, 1)")
    C0, C1, C2, C3 = constants.C0, constants.C1, constants.C2, constants.C3
    if not C0 > 0:
        raise ModelError("C0 = 0: comparison processes are undefined")
    xm = C1 * eps / 2
    xc = xm * (math.exp(-2 * C0) + 1)
    xp = 2 * math.exp(2 * C0) / (C1 * eps)
    lam = default_lambda(eps) if lam is None else float(lam)
    Lam = math.exp(2 * C0 * lam)
    A = Lam * (C2 + C3 * eps) * eps
    B = Lam - 1 - C3 * eps * eps * (Lam + 1)
    C = (C2 + C3 * eps) * eps
    if B * B - 4 * A * C < 0 or B <= 0:
        if not need_faster:
            nan = math.nan
            return ComparisonThresholds(eps, C0, xm, xc, xp, lam, Lam, nan, nan, nan, A, B, C)
        raise FasterConstructionError(f"eps = {eps} too large for the faster construction (lambda = {lam})")
    xtm = math.exp(2 * C0) * (B * B + 4 * A * C) * C / B ** 3
    xtp = math.exp(-2 * C0) * (B * B - 2 * A * C) / (A * B)
    xtc = math.exp(2 * C0) * Lam * xtm
    return ComparisonThresholds(eps, C0, xm, xc, xp, lam, Lam, xtm, xtc, xtp, A, B, C)


def _log_kappa_stream(spec, stream, n):
    return log_kappa_batch(spec, stream, n)


@dataclass
class ProcessRun:
    T: int
    z: np.ndarray           # log x_n for n = 0 .. T-1
    y_trace: np.ndarray     # log-walk values of the current excursion structure
    chi: np.ndarray         # chi values consumed
    excursions: list = field(default_factory=list)   # (start, end, exit value) per excursion


def _run_process(spec, eps, seed, kind, lam, log_kappa=None):
    consts = cached_constants(spec)
    th = thresholds(consts, eps, lam, need_faster=kind != "slower")
    two_c0 = 2 * consts.C0
    size = 4096
    while True:
        if log_kappa is None:
            lk = _log_kappa_stream(spec, RandomStream(seed), size)
        else:
            lk = log_kappa
        if kind == "slower":
            zm, zc, zp = math.log(th.xhat_minus), math.log(th.xhat_c), math.log(th.xhat_plus)
            out = np.empty(1, dtype=np.int64)
            c, _ = kern.slower_times(lk, zm, zc, zp, 1, out)
        else:
            zm, zc, zp = math.log(th.xtilde_minus), math.log(th.xtilde_c), math.log(th.xtilde_plus)
            out = np.empty(1, dtype=np.int64)
            c, _ = kern.faster_times(lk, two_c0 * th.lam, zm, zc, zp, 1, out)
        if c == 1:
            break
        if log_kappa is not None:
            raise ModelError("supplied disorder ran out before the process was absorbed")
        if size > GUARD:
            raise ModelError(f"{kind} process did not terminate within {GUARD} steps")
        size *= 4
    T = int(out[0])
    if kind == "slower":
        z = kern.slower_path(lk, zm, zc, zp, T + 1)
        first = 2
        steps = lk[2:T - 1] / consts.C0
    else:
        z = kern.faster_path(lk, two_c0 * th.lam, zm, zc, zp, T + 1)
        first = 1
        steps = lk[1:T - 1] / consts.C0 + th.lam
    y = (z[first:T] - zc) / two_c0
    return ProcessRun(T, z[:T], y, steps, _excursions(y, z[first:T], zm)), th


def _excursions(y, z, zm):
    """(start, end, exit value) per excursion, as indices into y = z[first:].

    A new excursion starts right after the path falls to or below x_minus.
    """
    starts = [0] + [int(k) + 1 for k in np.flatnonzero(z[:-1] <= zm)]
    ends = [k - 1 for k in starts[1:]] + [len(y) - 1]
    return [(s, e, float(y[e])) for s, e in zip(starts, ends)]


def run_slower(spec: DisorderSpec, eps: float, seed: int, lam=None, log_kappa=None):
    """Slower process from x_0 = 0, x_1 = x-hat_minus.  Returns (T-hat_1, ProcessRun)."""
    run, _ = _run_process(spec, eps, seed, "slower", lam, log_kappa)
    return run.T, run


def run_faster(spec: DisorderSpec, eps: float, seed: int, lam=None, log_kappa=None):
    """Faster process from x_0 = x-tilde_minus.  Returns (T-tilde_1, ProcessRun)."""
    run, _ = _run_process(spec, eps, seed, "faster", lam, log_kappa)
    return run.T, run


@dataclass
class SandwichReport:
    """Outcome of one sandwich check.

    T_slower is only followed up to the passage length: T_slower = -1 means the slower
    process was still finite at n = N2 - N1, which already gives N2 - N1 <= T-hat_1.
    """
    eps: float
    seed: int
    skipped: bool = False
    reason: str = ""
    N1: int = -1
    N2: int = -1
    T_slower: int = -1
    T_faster: int = -1
    pointwise_violations: list = field(default_factory=list)
    time_violation: bool = False
    faster_valid: bool = True

    @property
    def ok(self):
        return self.skipped or (not self.pointwise_violations and not self.time_violation)


def _first_inf(z):
    idx = np.flatnonzero(np.isinf(z) & (z > 0))
    return int(idx[0]) if len(idx) else -1


def sandwich_check(spec: DisorderSpec, eps: float, seed: int, lam=None, rtol=1e-9,
                   max_report=10) -> SandwichReport:
    """Check x-hat_n <= x_{N1+n} <= x-tilde_n on the first positive passage of one realization,
    together with T-tilde_1 <= N2 - N1 <= T-hat_1."""
    if eps == 0:
        return SandwichReport(eps, seed, skipped=True, reason="eps = 0: no passage through 0 ever completes")
    check_eps(spec, eps)
    consts = cached_constants(spec)
    th = thresholds(consts, eps, lam)
    size = 1 << 12
    while True:
        stream = RandomStream(seed)
        t, M = sample_batch(spec, stream, size)
        arrs = step_arrays(spec, eps, t, M)
        n1, n2, xs, status = kern.passage_trace(*arrs, size)
        _raise_status(status, eps)
        if n1 >= 0 and n2 >= 0 and n2 + 2 <= size:
            break
        if size > GUARD:
            raise ModelError(f"no completed passage within {GUARD} steps")
        size *= 4
    dur = n2 - n1
    rest = np.log(arrs[0][n1:])
    zs = kern.slower_path(rest, math.log(th.xhat_minus), math.log(th.xhat_c), math.log(th.xhat_plus), dur + 1)
    zf = kern.faster_path(rest, 2 * consts.C0 * th.lam, math.log(th.xtilde_minus),
                          math.log(th.xtilde_c), math.log(th.xtilde_plus), dur + 1)
    rep = SandwichReport(eps, seed, N1=int(n1), N2=int(n2), T_slower=_first_inf(zs),
                         T_faster=_first_inf(zf), faster_valid=th.faster_ordered)
    with np.errstate(over="ignore"):
        xhat = np.exp(zs[:dur])
        xtil = np.exp(zf[:dur])
    lo_bad = xhat > xs * (1 + rtol)
    hi_bad = xs > xtil * (1 + rtol)
    for n in np.flatnonzero(lo_bad | hi_bad)[:max_report]:
        rep.pointwise_violations.append(
            {"n": int(n), "xhat": float(xhat[n]), "x": float(xs[n]), "xtilde": float(xtil[n])})
    slower_ok = rep.T_slower == -1 or rep.T_slower >= dur
    faster_ok = 0 <= rep.T_faster <= dur
    rep.time_violation = not (slower_ok and faster_ok)
    return rep


@dataclass
class StoppingStats:
    """Excursion samples of one comparison walk started at y_0 = 0.

    ``weights`` are likelihood ratios when the excursions were drawn under an exponentially
    tilted step law (all ones for plain sampling); weighted means are unbiased for the
    untilted walk.
    """
    kind: str
    T_pm: np.ndarray
    y_exit: np.ndarray
    exit_up: np.ndarray
    y_minus: float
    y_plus: float
    drift: float = 0.0
    weights: np.ndarray | None = None
    T1: np.ndarray | None = None

    @property
    def n(self):
        return len(self.T_pm)

    @property
    def tilted(self):
        return self.weights is not None


def _chi_atoms(spec, C0):
    from .disorder import _log_kappa_law
    w, lk = _log_kappa_law(spec)
    if not np.all(np.isfinite(w)):
        raise ModelError("tilted sampling needs an exactly enumerable law")
    return w, lk / C0


def collect_excursions(spec: DisorderSpec, eps: float, n_samples: int, seed: int, kind="slower",
                       lam=None, tilt: float | None = None) -> StoppingStats:
    """n_samples excursions of y-hat (kind="slower") or y-tilde (kind="faster").

    Without ``tilt`` the steps come from the model stream.  With ``tilt = rho`` the steps
    chi are drawn from the law reweighted by exp(C0 rho (chi + drift)); this needs a law
    with finitely many atoms and is used to reach rare up-exits.
    """
    from .disorder import _is_exact
    consts = cached_constants(spec)
    th = thresholds(consts, eps, lam, need_faster=kind != "slower")
    C0 = consts.C0
    if kind == "slower":
        ym, yp, drift = th.yhat_minus, th.yhat_plus, 0.0
    else:
        ym, yp, drift = th.ytilde_minus, th.ytilde_plus, th.lam
    stream = RandomStream(seed)
    if tilt is not None:
        if not _is_exact(spec):
            raise ModelError("tilted sampling needs discrete laws")
        w, chi_atoms = _chi_atoms(spec, C0)
        q = w * np.exp(C0 * tilt * (chi_atoms + drift))
        logZ = math.log(math.fsum(q))
        cdf = np.cumsum(q / q.sum())

        def draw(n):
            idx = np.minimum(np.searchsorted(cdf, stream.random(n), side="right"), len(cdf) - 1)
            return chi_atoms[idx]
    else:
        def draw(n):
            return _log_kappa_stream(spec, stream, n) / C0
    t_out = np.empty(n_samples, dtype=np.int64)
    y_out = np.empty(n_samples)
    got = 0
    carry = np.empty(0)
    while got < n_samples:
        chi = np.concatenate([carry, draw(CHUNK)])
        c, used = kern.excursions(chi, ym, yp, drift, n_samples - got, t_out[got:], y_out[got:])
        got += c
        carry = chi[used:]
        if len(carry) > GUARD:
            raise ModelError("excursion did not terminate within the step guard")
    weights = None
    if tilt is not None:
        weights = np.exp(t_out * logZ - C0 * tilt * y_out)
    return StoppingStats(kind, t_out, y_out, y_out >= yp, ym, yp, drift, weights)


def mean_passage_time(stats: StoppingStats):
    """E(T_1) = (E(T_-+) + 1)/P(up) + tail from excursion samples, with a delta-method stderr.

    tail = 2 for the slower process and 1 for the faster one.
    """
    tail = 2.0 if stats.kind == "slower" else 1.0
    w = np.ones(stats.n) if stats.weights is None else stats.weights
    a = w * stats.T_pm
    b = w * stats.exit_up
    am, bm = a.mean() + 1.0, b.mean()
    if bm == 0:
        raise ModelError("no up-exit in the sample")
    R = am / bm
    cov = np.cov(a, b)
    var = (cov[0, 0] - 2 * R * cov[0, 1] + R * R * cov[1, 1]) / (bm * bm * stats.n)
    return R + tail, math.sqrt(max(var, 0.0))


def collect_passage_times(spec: DisorderSpec, eps: float, n_samples: int, seed: int, kind="slower",
                          lam=None, max_steps=None) -> np.ndarray:
    """Independent samples of T-hat_1 (or T-tilde_1) from one stream, consumed back to back."""
    consts = cached_constants(spec)
    th = thresholds(consts, eps, lam, need_faster=kind != "slower")
    stream = RandomStream(seed)
    out = np.empty(n_samples, dtype=np.int64)
    got = 0
    carry = np.empty(0)
    used_total = 0
    while got < n_samples:
        lk = np.concatenate([carry, _log_kappa_stream(spec, stream, 1 << 20)])
        if kind == "slower":
            c, used = kern.slower_times(lk, math.log(th.xhat_minus), math.log(th.xhat_c),
                                        math.log(th.xhat_plus), n_samples - got, out[got:])
        else:
            c, used = kern.faster_times(lk, 2 * consts.C0 * th.lam, math.log(th.xtilde_minus),
                                        math.log(th.xtilde_c), math.log(th.xtilde_plus),
                                        n_samples - got, out[got:])
        got += c
        used_total += used
        carry = lk[used:]
        if len(carry) > GUARD or (max_steps is not None and used_total + len(carry) > max_steps):
            raise ModelError(f"{kind} passage did not terminate within the step guard")
    return out


@dataclass(frozen=True)
class StoppingReport:
    r1: float
    r1_sigma: float
    r2: float
    r2_sigma: float
    exp_residual: float
    exp_sigma: float
    n: int
    n_up: int = 0

    def passed(self, k=3.0, balanced=False):
        if balanced:
            return self.r2 < k * self.r2_sigma
        ok = self.r1 < k * self.r1_sigma
        if math.isfinite(self.exp_residual):
            ok = ok and self.exp_residual < k * self.exp_sigma
        return ok


def _resid(d):
    """|mean(d)| and the stderr of the mean."""
    d = np.asarray(d, float)
    return abs(float(d.mean())), float(d.std(ddof=1) / math.sqrt(len(d)))


def optional_stopping_diagnostics(stats: StoppingStats, kstats, thresholds=None, nu=None) -> StoppingReport:
    """Martingale residuals of one excursion sample.

    r1 uses y_n - n E(chi + drift), r2 uses y_n^2 - n E(chi^2) (drift-free walks), and the
    exponential check uses exp(C0 nu y_n) when nu is given.  Samples drawn under a tilted
    law enter with their likelihood-ratio weights.
    """
    if stats.n < 2:
        raise ValueError("need at least two stopping samples")
    w = np.ones(stats.n) if stats.weights is None else stats.weights
    y, T = stats.y_exit, stats.T_pm.astype(float)
    mchi = kstats.mean_chi + stats.drift
    r1, s1 = _resid(w * (y - mchi * T))
    r2, s2 = _resid(w * (y * y - kstats.chi_second_moment * T))
    if nu is not None:
        er, es = _resid(w * np.exp(kstats.C0 * nu * y) - 1.0)
    else:
        er, es = math.nan, math.nan
    return StoppingReport(r1, s1, r2, s2, er, es, stats.n, int(np.sum(stats.exit_up)))
