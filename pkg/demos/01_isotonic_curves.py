"""Projecting a noisy curve onto monotone functions with PAV.

Run: python demos/01_isotonic_curves.py
"""
import numpy as np

from monoproj.pava import GridFunction, minmax_oracle, pava_project, sup_distance

rng = np.random.default_rng(0)

# %% A noisy increasing signal on an irregular grid, with uneven weights
x = np.sort(rng.uniform(0, 10, 25))
y = np.log1p(x) + rng.normal(0, 0.4, x.size)
w = rng.uniform(0.5, 2.0, x.size)
f = GridFunction(x, y, w)

p = pava_project(f)
print("monotone after projection:", p.is_monotone())
print("distinct levels:", np.unique(np.round(p.values, 12)).size, "of", x.size)

# %% The pooled levels agree with the min-max formula for isotonic regression
print("max gap to min-max oracle: %.2e" % sup_distance(p, minmax_oracle(f)))

# %% The projection never moves two curves further apart (sup norm)
g = f.with_values(y + rng.normal(0, 0.3, x.size))
print("sup |f-g| = %.3f  >=  sup |Pf-Pg| = %.3f" % (sup_distance(f, g), sup_distance(p, pava_project(g))))

# %% A decreasing input collapses to its weighted mean
d = GridFunction(np.arange(4.0), np.array([4.0, 3.0, 2.0, 1.0]), np.array([1.0, 1.0, 1.0, 5.0]))
print("decreasing ->", pava_project(d).values)
