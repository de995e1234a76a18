"""Closed-form predictions: exponents nu and rho-tilde, the spike coefficient, the expected
passage-time formulas built from exit statistics, and the scaling-regime label."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import DisorderSpec, ModelError, kappa_moments
from .disorder import _log_kappa_law

BISECT_TOL = 1e-13
BOUNDARY_BAND = (1 / 3, 3.0)


@dataclass(frozen=True)
class NuRoot:
    nu: float
    residual: float
    bracket: tuple
    convex: bool = True


@dataclass(frozen=True)
class SpikePrediction:
    coefficient: float
    correction_order: str = "|log E|^-3"
    degenerate: bool = False


@dataclass(frozen=True)
class ScalingRegime:
    label: str
    criterion: float


def _mgf_fn(spec):
    w, lk = _log_kappa_law(spec)

    def mgf(rho):
        return math.fsum(w * np.exp(rho * lk))
    return mgf, w, lk


def _bisect(f, lo, hi, tol=BISECT_TOL):
    """Root of f on [lo, hi] with f(lo) <= 0 < f(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _positive_root(g, what):
    """Unique root on (0, inf) of a convex g with g(0) = 0 and g'(0) < 0."""
    hi = 1.0
    for _ in range(200):
        if g(hi) > 0:
            break
        hi *= 2
    else:
        raise ModelError(f"no sign change found for {what}")
    return _bisect(g, 0.0, hi), hi


def _convex_on(g, hi, n=1000):
    x = np.linspace(0, hi, n)
    v = np.array([g(r) for r in x])
    d2 = np.diff(v, 2)
    return bool(np.all(d2 > -1e-12 * max(1.0, np.abs(v).max())))


def solve_nu(spec: DisorderSpec) -> NuRoot:
    """Positive root of E(kappa^nu) = 1 (of E(kappa^-nu) = 1 when E log kappa > 0)."""
    ks = kappa_moments(spec)
    if ks.balanced:
        raise ModelError("balanced: nu undefined")
    mgf, w, lk = _mgf_fn(spec)
    s = 1.0 if ks.mean_log_kappa < 0 else -1.0
    if not np.any((s * lk > 0) & (w > 0)):
        raise ModelError("Hypothesis violated: log kappa never takes the sign opposite to its mean")

    def g(r):
        return mgf(s * r) - 1.0
    nu, hi = _positive_root(g, "nu")
    return NuRoot(nu, abs(g(nu)), (0.0, hi), _convex_on(g, hi))


def solve_rho_tilde(spec: DisorderSpec, lam: float):
    """Root of E(exp(C0 rho (chi + lam))) = 1 away from 0, and the two-term series value.

    Balanced laws give a negative root; unbalanced laws (with E chi + lam < 0) give nu-tilde.
    """
    ks = kappa_moments(spec)
    mgf, w, lk = _mgf_fn(spec)
    C0 = ks.C0
    s = 1.0 if ks.mean_log_kappa <= 0 else -1.0

    def g(r):
        return mgf(s * r) * math.exp(C0 * r * lam) - 1.0

    chi2 = ks.chi_second_moment
    series = -2 * lam / (C0 * chi2) - 4 * ks.chi_third_moment * lam * lam / (3 * C0 * chi2 ** 3)
    if ks.balanced:
        def h(r):
            return g(-r)
        lo = 1.0
        for _ in range(200):
            if h(lo) > 0:
                break
            lo *= 2
        else:
            raise ModelError("lambda too large: no sign change for rho-tilde")
        return -_bisect(h, 0.0, lo), series
    if s * ks.mean_log_kappa / C0 + lam >= 0:
        raise ModelError("lambda too large: E(chi) + lambda must stay negative")
    root, _ = _positive_root(g, "nu-tilde")
    return root, series


def spike_coefficient(spec: DisorderSpec, L: int | None = None) -> SpikePrediction:
    ks = kappa_moments(spec)
    if not ks.balanced:
        raise ModelError("spike coefficient needs a balanced law")
    L = spec.L if L is None else L
    c = ks.mean_log_kappa_sq / (4 * L)
    return SpikePrediction(c, degenerate=c == 0)


def classify_scaling(eps: float, mean_log_kappa: float) -> ScalingRegime:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    v = abs(mean_log_kappa * math.log(eps))
    lo, hi = BOUNDARY_BAND
    # tolerate rounding when the product is meant to sit exactly on a band edge
    if lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12):
        return ScalingRegime("boundary", v)
    return ScalingRegime("spike-like" if v < lo else "pseudogap-like", v)


@dataclass(frozen=True)
class ExitSummary:
    """Conditional exit statistics of one comparison walk (y', y'', y''' on both sides)."""
    p_up: float
    mean_T: float
    y1_minus: float
    y1_plus: float
    y2_minus: float
    y2_plus: float
    y3_minus: float
    y3_plus: float


def exit_summary(stats, C0: float, rate: float | None) -> ExitSummary:
    """Weighted conditional means from a StoppingStats sample.

    rate is the exponent used for the y'' quantities (nu or nu-tilde); None skips them.
    """
    w = getattr(stats, "weights", None)
    y = np.asarray(stats.y_exit, float)
    w = np.ones_like(y) if w is None else np.asarray(w, float)
    up = np.asarray(stats.exit_up, bool)
    if not up.any() or up.all():
        raise ModelError("empty conditional exit sample on one side")

    def cond(f, mask):
        return float(np.sum(w[mask] * f[mask]) / np.sum(w[mask]))

    if rate:
        e = np.exp(C0 * rate * y)
        y2m = math.log(cond(e, ~up)) / (C0 * rate)
        y2p = math.log(cond(e, up)) / (C0 * rate)
    else:
        y2m = y2p = math.nan
    return ExitSummary(
        p_up=float(np.mean(w * up)),
        mean_T=float(np.mean(w * np.asarray(stats.T_pm, float))),
        y1_minus=cond(y, ~up), y1_plus=cond(y, up),
        y2_minus=y2m, y2_plus=y2p,
        y3_minus=-math.sqrt(cond(y * y, ~up)), y3_plus=math.sqrt(cond(y * y, up)),
    )


def inverse_time_unbalanced(s: ExitSummary, mean_log_kappa: float, C0: float, rate: float, tail: float):
    """[(1 + C0 y'_-/m)(e^{C0 r y''_+} - e^{C0 r y''_-})/(1 - e^{C0 r y''_-}) + C0 (y'_+ - y'_-)/m + tail]^-1.

    m is E log kappa (slower, tail 2) or E log kappa + C0 lambda (faster, tail 1).
    """
    em = math.exp(C0 * rate * s.y2_minus)
    ep = math.exp(C0 * rate * s.y2_plus)
    bracket = (1 + C0 * s.y1_minus / mean_log_kappa) * (ep - em) / (1 - em) \
        + C0 * (s.y1_plus - s.y1_minus) / mean_log_kappa + tail
    return 1.0 / bracket


def inverse_time_balanced(s: ExitSummary, chi2: float, k: float):
    """E(chi^2)/(y'''_+)^2 [1 + (E(chi^2)(y'_+ - k y'_-) + y'_+ (y'''_-)^2)/(-y'_- (y'''_+)^2)]^-1.

    k = 3 for the slower walk (exact) and k = 2 for the faster walk (to first order in lambda).
    """
    corr = (chi2 * (s.y1_plus - k * s.y1_minus) + s.y1_plus * s.y3_minus ** 2) / (-s.y1_minus * s.y3_plus ** 2)
    return chi2 / s.y3_plus ** 2 / (1 + corr)


def predicted_inverse_times(spec: DisorderSpec, eps: float, slower_stats, faster_stats, lam: float):
    """Predicted 1/E(T-hat_1) and 1/E(T-tilde_1) from measured exit statistics."""
    ks = kappa_moments(spec)
    C0 = ks.C0
    if ks.balanced:
        s = exit_summary(slower_stats, C0, None)
        f = exit_summary(faster_stats, C0, None)
        return (inverse_time_balanced(s, ks.chi_second_moment, 3.0),
                inverse_time_balanced(f, ks.chi_second_moment, 2.0))
    nu = solve_nu(spec).nu
    nut, _ = solve_rho_tilde(spec, lam)
    s = exit_summary(slower_stats, C0, nu)
    f = exit_summary(faster_stats, C0, nut)
    m = ks.mean_log_kappa
    return (inverse_time_unbalanced(s, m, C0, nu, 2.0),
            inverse_time_unbalanced(f, m + C0 * lam, C0, nut, 1.0))
