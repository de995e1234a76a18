"""Property suite: transfer-matrix invariants, phase order and crossing structure, the
threshold lemmas of both comparison processes, and accumulator algebra."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from sshspectra import (BirkhoffAccumulator, DisorderSpec, ModelError, RandomStream, ScalarDistribution,
                        ensemble_constants, kappa_moments, merge_accumulators, record_passages,
                        run_birkhoff)
from sshspectra.cli import _run_tasks, _birkhoff_task, pooled
from sshspectra.disorder import sample_batch
from sshspectra.ds_processes import FasterConstructionError, thresholds
from sshspectra.phase_dynamics import evolve_phases, step_arrays
from sshspectra.ssh_model import J, _transfer_batch, reduced_R_batch

N_PAIRS = 10_000
FAST = settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])

atom_values = st.floats(0.3, 3.0).map(lambda v: round(v, 3))


@st.composite
def discrete_law(draw, k_max=3):
    k = draw(st.integers(1, k_max))
    vals = draw(st.lists(atom_values, min_size=k, max_size=k, unique=True))
    w = np.array(draw(st.lists(st.integers(1, 9), min_size=k, max_size=k)), float)
    return ScalarDistribution.discrete(vals, list(w / w.sum()))


@st.composite
def hopping_spec(draw):
    spec = DisorderSpec.random_hopping(draw(discrete_law()), draw(discrete_law()))
    assume(kappa_moments(spec).C0 > 0.05)
    return spec


@st.composite
def two_orbital_spec(draw):
    p = draw(st.integers(1, 9)) / 10
    q = draw(st.integers(1, 9)) / 10
    try:
        spec = DisorderSpec(L=2, m=draw(st.floats(1.5, 3.0)), lambda_coupling=draw(st.floats(0.0, 0.5)),
                            mu_coupling=draw(st.floats(0.3, 0.8)),
                            omega_dist=ScalarDistribution.discrete([-1.0, 1.0], [p, 1 - p]),
                            omega_prime_dist=ScalarDistribution.discrete([-1.0, 1.0], [q, 1 - q]))
        ensemble_constants(spec)
    except ModelError:
        assume(False)
    return spec


any_spec = st.one_of(hopping_spec(), two_orbital_spec())


def q_of_d(spec, eps, x, seed):
    """Q.(D.x) for N_PAIRS samples; returns (x, y) with y = inf at the projective point."""
    t, M = sample_batch(spec, RandomStream(seed), len(x))
    K, kap = reduced_R_batch(t, M, eps)
    q00, q01, q10, q11 = 1 + K[:, 0, 0], -K[:, 0, 1], -K[:, 1, 0], 1 + K[:, 1, 1]
    u = np.where(np.isinf(x), 1.0, kap * kap * x)
    v = np.where(np.isinf(x), 0.0, 1.0)
    num, den = q00 * u + q01 * v, q10 * u + q11 * v
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(den == 0, np.inf, num / den)
    return y, kap


def test_points(rng, th_points):
    """Log-uniform magnitudes of both signs plus the threshold points and their neighbours."""
    mag = np.exp(rng.uniform(-30, 30, N_PAIRS - 4 * len(th_points) - 2))
    x = np.where(rng.random(len(mag)) < 0.5, mag, -mag)
    near = [p * f for p in th_points for f in (1 - 1e-9, 1, 1 + 1e-9)] + [-p for p in th_points]
    return np.concatenate([x, near, [0.0, np.inf]])


test_points.__test__ = False


def nonneg(y):
    return (y >= 0) & np.isfinite(y)


# transfer matrices

@FAST
@given(spec=any_spec, seed=st.integers(0, 2 ** 32))
def test_det_and_symplectic(spec, seed):
    eps_max = ensemble_constants(spec).eps_max
    t, M = sample_batch(spec, RandomStream(seed), N_PAIRS // 10)
    rng = np.random.default_rng(seed)
    for E in rng.uniform(-eps_max, eps_max, 10):
        T = _transfer_batch(t, M, E)
        det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
        assert np.abs(det - 1).max() < 1e-10
        defect = np.swapaxes(T, 1, 2) @ J @ T - J
        assert np.abs(defect).max() < 1e-10
    T0 = _transfer_batch(t, M, 0.0)
    _, kap = reduced_R_batch(t, M, 0.0)
    assert np.allclose(T0[:, 0, 0], kap, rtol=1e-12) and np.allclose(T0[:, 1, 1], 1 / kap, rtol=1e-12)
    assert np.abs(T0[:, 0, 1]).max() < 1e-12 and np.abs(T0[:, 1, 0]).max() < 1e-12


# phase dynamics

def realization(spec, eps, n, seed):
    t, M = sample_batch(spec, RandomStream(seed), n)
    kap, k00, k01, k10, k11 = step_arrays(spec, eps, t, M)
    return kap, np.stack([k00, k01, k10, k11], -1).reshape(-1, 2, 2)


@FAST
@given(spec=any_spec, seed=st.integers(0, 2 ** 32), frac=st.floats(0.01, 1.0))
def test_order_preservation(spec, seed, frac):
    eps = frac * ensemble_constants(spec).eps_max
    rng = np.random.default_rng(seed)
    # triples inside one projective period, so the order is also an order on the circle
    lo = rng.uniform(-4, 4, (125, 1))
    th = np.sort(lo + rng.uniform(0, math.pi, (125, 3)), axis=1)
    kap, K = realization(spec, eps, 200, seed)
    path = evolve_phases(kap, K, th.ravel()).reshape(-1, 125, 3)
    # contraction can merge phases to the same double; after that they differ by rounding only
    tol = 1e-11
    assert np.all(path[:, :, 0] <= path[:, :, 1] + tol) and np.all(path[:, :, 1] <= path[:, :, 2] + tol)
    assert np.all(path[:, :, 2] <= path[:, :, 0] + math.pi + tol)
    # strict order holds wherever the initial gaps have not contracted below the resolution
    gap = np.diff(path, axis=2)
    assert np.all((gap > 0) | (np.abs(gap) <= tol))


@FAST
@given(spec=any_spec, seed=st.integers(0, 2 ** 32), frac=st.floats(0.01, 1.0))
def test_monotone_crossing_and_windows(spec, seed, frac):
    eps = frac * ensemble_constants(spec).eps_max
    kap, K = realization(spec, eps, 2000, seed)
    th = evolve_phases(kap, K, np.random.default_rng(seed).uniform(-3, 3, 5))
    half = np.diff(th, axis=0)
    assert np.all((half > -math.pi / 2) & (half < math.pi / 2))
    full = th[2::2] - th[:-2:2]
    assert np.all((full > -math.pi / 2) & (full < 3 * math.pi / 2))
    q = np.floor(2 * th / math.pi)
    assert np.all(np.diff(q, axis=0) >= 0)


@FAST
@given(spec=any_spec, seed=st.integers(0, 2 ** 32), frac=st.floats(0.05, 1.0))
def test_crossings_alternate(spec, seed, frac):
    eps = frac * ensemble_constants(spec).eps_max
    rec = record_passages(spec, eps, 5000, seed)
    assert np.all(np.diff(rec.times) > 0)
    assert np.all(np.diff(rec.parities) != 0)


# comparison-process lemmas

@settings(max_examples=6, deadline=None)
@given(spec=any_spec, seed=st.integers(0, 2 ** 32))
@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_Q_lower(spec, seed, eps):
    c = ensemble_constants(spec)
    assume(eps <= c.eps_max)
    rng = np.random.default_rng(seed)
    x = np.concatenate([np.exp(rng.uniform(-30, 30, N_PAIRS - 1)), [0.0]])
    t, M = sample_batch(spec, RandomStream(seed), N_PAIRS)
    K, _ = reduced_R_batch(t, M, eps)
    num = (1 + K[:, 0, 0]) * x - K[:, 0, 1]
    den = -K[:, 1, 0] * x + 1 + K[:, 1, 1]
    with np.errstate(divide="ignore"):
        y = num / den
    ok = ~nonneg(y) | (den == 0) | (y >= x * (1 - 1e-12))
    assert np.all(ok)


@settings(max_examples=6, deadline=None)
@given(spec=any_spec, seed=st.integers(0, 2 ** 32))
@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_slower_lemmas(spec, seed, eps):
    c = ensemble_constants(spec)
    assume(eps <= c.eps_max)
    th = thresholds(c, eps, need_faster=False)
    rng = np.random.default_rng(seed)
    x = test_points(rng, [th.xhat_minus, th.xhat_c, th.xhat_plus])
    y, _ = q_of_d(spec, eps, x, seed)
    pos = (x >= 0) & np.isfinite(x)
    assert not np.any(pos & nonneg(y) & (y < th.xhat_minus))
    assert not np.any((x >= th.xhat_minus) & np.isfinite(x) & nonneg(y) & (y < th.xhat_c))
    assert not np.any(nonneg(y) & (x >= th.xhat_plus))


def faster_thresholds(c, eps):
    for lam in (None, 0.3, 0.5):
        try:
            th = thresholds(c, eps, lam)
        except FasterConstructionError:
            continue
        if th.faster_ordered:
            return th
    return None


@settings(max_examples=6, deadline=None)
@given(spec=any_spec, seed=st.integers(0, 2 ** 32))
@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_faster_lemmas(spec, seed, eps):
    c = ensemble_constants(spec)
    assume(eps <= c.eps_max)
    th = faster_thresholds(c, eps)
    assume(th is not None)
    rng = np.random.default_rng(seed)
    x = test_points(rng, [th.xtilde_minus, th.xtilde_c, th.xtilde_plus])
    y, kap = q_of_d(spec, eps, x, seed)
    fin = np.isfinite(x)
    inside = (x >= th.xtilde_minus) & (x <= th.xtilde_plus)
    assert np.all(~inside | (y <= th.Lambda * kap * kap * x * (1 + 1e-12)))
    neg = fin & (x < 0)
    assert not np.any(neg & nonneg(y) & (y >= th.xtilde_minus))
    below = fin & (x < th.xtilde_minus)
    assert not np.any(below & nonneg(y) & (y >= th.xtilde_c))
    assert not np.any(~nonneg(y) & fin & (x >= 0) & (x < th.xtilde_plus))


# accumulators and determinism

finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def accumulator(draw):
    k = draw(st.integers(0, 5))
    return BirkhoffAccumulator(draw(st.integers(0, 10 ** 6)), tuple(draw(st.lists(finite, min_size=k, max_size=k))),
                               tuple(draw(st.lists(finite, min_size=k, max_size=k))))


@settings(max_examples=200, deadline=None)
@given(a=accumulator(), b=accumulator(), c=accumulator())
def test_merge_associative_commutative(a, b, c):
    left = merge_accumulators(merge_accumulators(a, b), c)
    right = merge_accumulators(a, merge_accumulators(b, c))
    assert left.n_steps == right.n_steps == a.n_steps + b.n_steps + c.n_steps
    assert left.sum_phase_shift == right.sum_phase_shift
    assert left.sum_log_norm == right.sum_log_norm
    ab, ba = merge_accumulators(a, b), merge_accumulators(b, a)
    assert ab.sum_phase_shift == ba.sum_phase_shift and ab.sum_log_norm == ba.sum_log_norm
    assert merge_accumulators(BirkhoffAccumulator(), a).sum_log_norm == a.sum_log_norm


def test_pooling_independent_of_order_and_workers(unb):
    tasks = [(unb, 1e-2, 20000, s, 100) for s in range(4)]
    serial = _run_tasks(_birkhoff_task, tasks, 1)
    parallel = _run_tasks(_birkhoff_task, tasks, 2)
    assert [r.accumulator for r in serial] == [r.accumulator for r in parallel]
    assert pooled(serial, 1) == pooled(serial[::-1], 1)[:1] + pooled(serial, 1)[1:]
    assert pooled(serial, 1)[:2] == pooled(serial[::-1], 1)[:2]
    assert run_birkhoff(unb, 1e-2, 20000, 3, burn_in=100).accumulator == serial[3].accumulator
