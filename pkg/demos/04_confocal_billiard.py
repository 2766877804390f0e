"""
Kepler billiards with confocal walls
====================================

A Kepler particle bouncing off a wall confocal with the two centers keeps
its first integral D at every bounce. Translating the wall breaks the
confocality and D jumps.
"""

import numpy as np

from secularbilliards import catalog, run_billiard

for name in ("kepler-ellipse-euclidean", "kepler-ellipse-spherical", "kepler-shifted-ellipse"):
    sc = catalog.get(name)
    run = run_billiard(sc.selector(), sc.build_walls(), sc.initial_state(), sc.run.t_end,
                       sc.run.max_bounces, sc.run.tol)
    jumps = np.abs([b.dD for b in run.bounces]) if run.bounces else np.zeros(1)
    print(f"{name:28s} bounces={len(run.bounces):3d}  max|dD|={jumps.max():.2e}  status={run.status}")
