"""Band-center spectrum of the random hopping chain from the Prufer phase.

Off the phase boundary the IDOS increment vanishes like a power eps^nu, on it the
increment decays only like 1/log(eps)^2.  Both are read off Birkhoff sums of the
phase shift along long orbits.
"""
import math

import numpy as np

from sshspectra import (DisorderSpec, ScalarDistribution, kappa_moments, run_birkhoff, solve_nu,
                        spike_coefficient)

atoms = ScalarDistribution.discrete
unb = DisorderSpec.random_hopping(ScalarDistribution.point(1.0), atoms([2.0, 0.5], [0.25, 0.75]))
bal = DisorderSpec.random_hopping(atoms([2.0, 0.5], [0.5, 0.5]), atoms([2.0, 0.5], [0.5, 0.5]))

# Lyapunov exponent at the critical energy equals |E log kappa|
ks = kappa_moments(unb)
r = run_birkhoff(unb, 0.0, 10 ** 6, seed=1)
print(f"gamma(0) = {r.lyapunov:.5f} +- {r.lyapunov_stderr:.1g}, |E log kappa| = {abs(ks.mean_log_kappa):.5f}")

# pseudogap: log-log slope of the IDOS increment against nu from E(kappa^nu) = 1
nu = solve_nu(unb).nu
eps = np.geomspace(1e-3, 3e-2, 6)
idos = np.array([run_birkhoff(unb, e, 2 * 10 ** 6, seed=10 + i).idos_delta for i, e in enumerate(eps)])
slope = np.polyfit(np.log(eps), np.log(idos), 1)[0]
print(f"nu = {nu:.5f}, fitted slope = {slope:.3f}")
for e, d in zip(eps, idos):
    print(f"  eps = {e:.2e}  N(eps) - 1/2 = {d:.3e}")

# Dyson spike: (N(eps) - 1/2) log(eps)^2 approaches E(log^2 kappa)/(4L) slowly from below
c = spike_coefficient(bal).coefficient
for i, e in enumerate((1e-2, 1e-3, 1e-4)):
    d = run_birkhoff(bal, e, 5 * 10 ** 6, seed=20 + i).idos_delta
    print(f"  eps = {e:.0e}  idos*log^2 = {d * math.log(e) ** 2:.4f}  (limit {c:.4f})")
