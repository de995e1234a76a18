"""The rotation number against a direct eigenvalue count.

The finite chain with open ends is a banded symmetric matrix.  Counting negative pivots of
H - E gives #{eigenvalues <= E}; on the same disorder this agrees with 1/2 + idos_delta from
the phase dynamics up to a boundary term of order 1/N.
"""
import numpy as np

from sshspectra import (DisorderSpec, ScalarDistribution, assemble_hamiltonian, count_eigenvalues_leq,
                        idos_oracle, run_birkhoff)

atoms = ScalarDistribution.discrete
unb = DisorderSpec.random_hopping(ScalarDistribution.point(1.0), atoms([2.0, 0.5], [0.25, 0.75]))
two = DisorderSpec(L=2, m=2.0, lambda_coupling=0.5, mu_coupling=0.6,
                   omega_dist=atoms([-1.0, 1.0], [0.5, 0.5]), omega_prime_dist=atoms([-1.0, 1.0], [0.4, 0.6]))

# small chain: inertia count against dense diagonalisation
H = assemble_hamiltonian(two, 60, seed=3)
w = np.linalg.eigvalsh(H.to_dense())
E = 0.5 * (w[100] + w[101])
print(f"L=2, N=60: inertia count {count_eigenvalues_leq(H, E).count_leq}, dense count {np.sum(w <= E)}")
print(f"spectrum symmetric about 0: {np.allclose(w, -w[::-1])}")

# long chains: oracle against the Birkhoff orbit on the same samples
N = 100000
for spec, name in ((unb, "unbalanced L=1"), (two, "L=2")):
    for e in (1e-2, 1e-3):
        o = idos_oracle(spec, N, e, seed=7)
        b = 0.5 + run_birkhoff(spec, e, N, seed=7, burn_in=0).idos_delta
        print(f"{name:15s} eps = {e:.0e}  oracle {o:.7f}  rotation {b:.7f}  N*diff = {N * abs(o - b):.2f}")
