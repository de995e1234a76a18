import math

import numpy as np
import pytest

from sshspectra import (BirkhoffAccumulator, EpsMaxError, RandomStream, ensemble_constants,
                        merge_accumulators, prufer_half_step_D, prufer_half_step_R, record_passages,
                        run_birkhoff, transfer_matrix)
from sshspectra.disorder import make_sample, sample_batch
from sshspectra.phase_dynamics import evolve_phases, step_arrays
from sshspectra.ssh_model import _R

LOG2 = math.log(2)


def numpy_orbit(spec, eps, n, seed, theta0):
    """Lifted phase and log-norm sum from plain products of the full transfer matrices."""
    t, M = sample_batch(spec, RandomStream(seed), n)
    v = np.array([math.cos(theta0), math.sin(theta0)])
    theta, log_norm = theta0, 0.0
    for ti, Mi in zip(t, M):
        w = transfer_matrix(make_sample(ti, Mi), eps).entries @ v
        r = np.linalg.norm(w)
        w /= r
        log_norm += math.log(r)
        # lift: the new angle differs from the old one by less than 3pi/2 forward, pi/2 back
        d = math.atan2(v[0] * w[1] - v[1] * w[0], v @ w)
        if d < -math.pi / 2:
            d += 2 * math.pi
        theta += d
        v = w
    return theta, log_norm


def test_half_step_D_examples():
    assert prufer_half_step_D(math.pi / 2, 3.7) == pytest.approx(math.pi / 2, abs=1e-15)
    assert prufer_half_step_D(math.pi / 4, 2.0) == pytest.approx(math.atan(0.25), abs=1e-15)
    assert prufer_half_step_D(math.pi / 4 + math.pi, 2.0) == pytest.approx(math.atan(0.25) + math.pi, abs=1e-14)


def test_half_step_D_quadrant_preserving(rng):
    th = rng.uniform(-10, 10, 2000)
    k = np.exp(rng.uniform(-3, 3, 2000))
    for a, b in zip(th, k):
        d = prufer_half_step_D(a, b) - a
        assert -math.pi / 2 < d < math.pi / 2
        assert math.floor(2 * prufer_half_step_D(a, b) / math.pi) == math.floor(2 * a / math.pi) \
            or abs(math.remainder(a, math.pi / 2)) < 1e-12


def test_half_step_R_examples():
    s = make_sample(1.0, [[2.0]])
    assert prufer_half_step_R(0.3, _R(s, 0.01), 0.0) == 0.3
    d = prufer_half_step_R(0.0, _R(s, 0.01), 0.01)
    assert d == pytest.approx(0.0025, abs=1e-4)
    s1 = make_sample(1.0, [[1.0]])
    d = prufer_half_step_R(math.pi / 4, _R(s1, 0.01), 0.01) - math.pi / 4
    assert d == pytest.approx(0.01, abs=1e-4)


def test_half_step_R_first_order(rng):
    """Increment = eps (a + b cos 2 theta) + O(eps^2)."""
    for m in (0.5, 2.0):
        s = make_sample(1.0, [[m]])
        a, b = (1 + m ** -2) / 2, (m ** -2 - 1) / 2
        for th in rng.uniform(0, math.pi, 20):
            for eps in (1e-3, 1e-4):
                d = prufer_half_step_R(th, _R(s, eps), eps) - th
                assert abs(d - eps * (a + b * math.cos(2 * th))) < 10 * (eps * max(1, m ** -2)) ** 2


def test_eps_zero_no_rotation(unb, bal):
    for spec in (unb, bal):
        r = run_birkhoff(spec, 0.0, 10000, seed=1)
        assert r.idos_delta == 0.0


def test_lyapunov_at_criticality(unb):
    r = run_birkhoff(unb, 0.0, 200000, seed=3)
    assert abs(r.lyapunov - 0.5 * LOG2) < 4 * r.lyapunov_stderr


@pytest.mark.parametrize("eps", [0.0, 1e-3, 2e-2])
def test_kernel_matches_numpy_products(unb, eps):
    n, theta0 = 3000, 0.3
    r = run_birkhoff(unb, eps, n, seed=11, burn_in=0, theta0=theta0)
    theta, log_norm = numpy_orbit(unb, eps, n, 11, theta0)
    assert r.accumulator.sum_phase_shift == pytest.approx(theta - theta0, abs=1e-8)
    assert r.accumulator.sum_log_norm == pytest.approx(log_norm, rel=1e-10, abs=1e-8)


def test_kernel_matches_numpy_products_L2(L2):
    n, eps = 2000, 1e-2
    r = run_birkhoff(L2, eps, n, seed=2, burn_in=0, theta0=1.0)
    theta, log_norm = numpy_orbit(L2, eps, n, 2, 1.0)
    assert r.accumulator.sum_phase_shift == pytest.approx(theta - 1.0, abs=1e-8)
    assert r.accumulator.sum_log_norm == pytest.approx(log_norm, rel=1e-10)
    assert r.idos_delta == pytest.approx((theta - 1.0) / (math.pi * 4 * n), rel=1e-9)


def test_estimate_fields(unb):
    r = run_birkhoff(unb, 1e-3, 12345, seed=4)
    assert sum(r.batch_sizes) == 12345 and len(r.batch_sizes) == 100
    # crossings only go forward; the window ends may lose less than one quadrant
    assert r.idos_delta >= -1 / (4 * r.n_steps)
    assert r.idos_stderr > 0 and r.lyapunov_stderr > 0
    assert r.accumulator.n_steps == 12345


def test_eps_above_max_rejected(unb):
    with pytest.raises(EpsMaxError):
        run_birkhoff(unb, 2 * ensemble_constants(unb).eps_max, 1000, seed=0)
    with pytest.raises(EpsMaxError):
        run_birkhoff(unb, -1e-3, 1000, seed=0)


def test_merge_identity_and_counts():
    a = BirkhoffAccumulator.single(10, 0.3, 1.2)
    b = BirkhoffAccumulator.single(5, 0.1, -0.7)
    assert merge_accumulators(BirkhoffAccumulator(), a) == a
    assert merge_accumulators(a, b).n_steps == 15
    assert merge_accumulators(a, b).sum_log_norm == pytest.approx(0.5)


def test_evolve_phases_crossings(unb):
    t, M = sample_batch(unb, RandomStream(6), 5000)
    kap, K0, K1, K2, K3 = step_arrays(unb, 1e-2, t, M)
    K = np.stack([K0, K1, K2, K3], -1).reshape(-1, 2, 2)
    th = evolve_phases(kap, K, [0.0])[:, 0]
    q = np.floor(2 * th / math.pi)
    assert np.all(np.diff(q) >= 0)
    assert np.all(np.diff(q) <= 1)
    inc = np.diff(th)
    assert np.all((inc > -math.pi / 2) & (inc < math.pi / 2))


def test_record_passages_matches_phase(unb):
    n, eps = 50000, 1e-2
    rec = record_passages(unb, eps, n, seed=8)
    r = run_birkhoff(unb, eps, n, seed=8, burn_in=0, theta0=0.0)
    assert len(rec.times) == math.floor(2 * r.accumulator.sum_phase_shift / math.pi)
    assert np.all(np.diff(rec.times) > 0)
    assert np.all(np.diff(rec.parities) != 0)
    assert len(record_passages(unb, 0.0, 10000, seed=8).times) == 0
