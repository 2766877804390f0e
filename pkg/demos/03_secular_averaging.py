"""
Kepler elements and the orbit-averaged secondary potential
==========================================================

Solve Kepler's equation, convert between states and elements, and average
the secondary potential over a Kepler ellipse. The trapezoid rule in the
eccentric longitude converges geometrically as nodes double.
"""

import numpy as np

from secularbilliards import AveragedSystem, ModelParams, OrbitElements, solve_kepler
from secularbilliards.secular import (
    averaged_secondary_potential,
    convergence_table,
    elements_to_state,
    state_to_elements,
)

E = solve_kepler(1.0, 0.7)
print(f"E - e sin E = {E - 0.7 * np.sin(E):.15f}  (mean anomaly 1.0)")

el = OrbitElements(Lambda=1.0, k=0.3, h_e=-0.2, ell=0.4)
back = state_to_elements(elements_to_state(el, 1.0), 1.0)
print(f"element round trip: e={el.e:.6f} -> {back.e:.6f}, g={el.g:.6f} -> {back.g:.6f}")

asys = AveragedSystem(ModelParams(m1=1.0, m2=0.1, a=1.2))
print(f"<V2> = {averaged_secondary_potential(el, asys):.12f}")
print("  N   |I_N - I_ref|")
for N, _, err in convergence_table(el, asys, nodes=(8, 16, 32, 64, 128)):
    print(f"{N:4d}  {err:.2e}")
