"""Passage times of the Dyson-Schmidt variable and the two comparison walks.

A positive passage of x = -cot(theta) is bracketed by a slower walk (drop the energy
shift) and a faster walk (boost it by Lambda).  Both are random walks in log x, so
their mean passage times follow from optional stopping and scale like eps^-nu
(unbalanced) or log(eps)^2 (balanced).
"""
import math

import numpy as np

from sshspectra import (DisorderSpec, ScalarDistribution, collect_excursions, collect_passage_times,
                        kappa_moments, mean_passage_time, predicted_inverse_times, sandwich_check,
                        solve_nu, solve_rho_tilde)

atoms = ScalarDistribution.discrete
unb = DisorderSpec.random_hopping(ScalarDistribution.point(1.0), atoms([2.0, 0.5], [0.25, 0.75]))
bal = DisorderSpec.random_hopping(atoms([2.0, 0.5], [0.5, 0.5]), atoms([2.0, 0.5], [0.5, 0.5]))

# one passage with its two comparison walks on the same samples
rep = sandwich_check(unb, 1e-3, seed=4)
print(f"passage N1={rep.N1} N2={rep.N2}: faster walk ends at {rep.T_faster}, "
      f"slower walk still finite at {rep.N2 - rep.N1} steps; violations: {len(rep.pointwise_violations)}")
bad = sum(not sandwich_check(bal, 1e-4, seed=s).ok for s in range(200))
print(f"balanced eps=1e-4: {bad} violations over 200 seeds")

# unbalanced: mean passage times from excursions drawn under the tilted law
lam = 0.3
nu, nut = solve_nu(unb).nu, solve_rho_tilde(unb, lam)[0]
print(f"nu = {nu:.4f}, nu-tilde(lambda={lam}) = {nut:.4f}")
for i, e in enumerate(np.geomspace(1e-4, 1e-2, 3)):
    s = collect_excursions(unb, e, 5000, 2 * i, tilt=nu)
    f = collect_excursions(unb, e, 5000, 2 * i + 1, kind="faster", lam=lam, tilt=nut)
    ps, pf = predicted_inverse_times(unb, e, s, f, lam)
    m, se = mean_passage_time(s)
    print(f"  eps = {e:.1e}  E T-hat = {m:.4g} +- {se:.2g} (formula {1 / ps:.4g})  "
          f"ratio {1 / m / e ** nu:.4f}  E T-tilde = {1 / pf:.4g}")

# balanced: direct sampling, compared with the log(eps)^2 law
m2 = kappa_moments(bal).mean_log_kappa_sq
for i, e in enumerate((1e-4, 1e-6, 1e-8)):
    T = collect_passage_times(bal, e, 5000, 30 + i)
    print(f"  eps = {e:.0e}  E T-hat = {T.mean():.1f}  log(eps)^2/E(log^2 kappa)/E T = "
          f"{math.log(e) ** 2 / m2 / T.mean():.3f}")
