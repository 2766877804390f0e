"""
Energy factorization of the curved two-center problem
=====================================================

The spherical (or hyperbolic) two-center energy, evaluated at the point that
corresponds to a flat state, splits as

    E_curved = c (E_Kep + V2 + kappa (D + K) / 2),      c = 1 + kappa a^2,

with ``D = C^2 - 2 h A1`` the secular first integral. This script draws random
states and prints the worst relative residual of the identity.
"""

import numpy as np

from secularbilliards import EUCLIDEAN, HYPERBOLIC, ModelParams
from secularbilliards.model import energy_euclidean, first_integrals, identity_residual

rng = np.random.default_rng(0)

for space, a in ((EUCLIDEAN, 0.7), (HYPERBOLIC, 0.5)):
    p = ModelParams(m1=1.0, m2=0.3, f=0.2, a=a, space=space)
    worst = 0.0
    for _ in range(500):
        q = rng.uniform(-1, 1, 2) * 0.3
        v = rng.normal(size=2)
        state = np.concatenate([q, v])
        I = first_integrals(state, p)
        worst = max(worst, abs(identity_residual(state, p)) / max(1.0, abs(I.E_sph)))
    print(f"kappa={p.kappa:+d}  c={p.c:.3f}  h={p.h:.4f}  worst relative residual {worst:.2e}")

# D reduces to C^2 when the centers coincide
p0 = ModelParams(m1=1.0, m2=0.3, a=0.0)
state = np.array([0.3, 0.1, -0.2, 0.9])
I = first_integrals(state, p0)
print(f"a=0: D={I.D:.15f}  C^2={I.C**2:.15f}  E_Eucl={energy_euclidean(state, p0):.6f}")
