"""Closed-form absorption laws and correlation functions against exact solves."""
# %%
from fractions import Fraction
from itertools import combinations

import numpy as np

from sepness import closed_forms as cf
from sepness import exact, homogeneous_segment

# Product formula in rational arithmetic: three walkers on {1,2,3} of [4]_0.
print(cf.absorption_product(4, 1, 1, (1, 2, 3)))
print(cf.absorption_levels(3, 1, 1, (1, 2)))

# %%
# Non-unit boundary conductances, compared with the linear-algebra solve.
N, wl, wr = 7, Fraction(1, 2), 3
g = homogeneous_segment(N - 1, wl, wr)
worst = 0.0
for xs in combinations(range(1, N), 3):
    closed = np.array([float(v) for v in cf.absorption_levels(N, wl, wr, xs)])
    worst = max(worst, np.abs(closed - exact.absorption_distribution(g, xs).probs).max())
print("levels, worst deviation over all 3-subsets:", worst)

# %%
# Pair correlations are negative and of order 1/N.
N, rl, rr = 8, 0.2, 0.8
sd = exact.stationary_distribution(homogeneous_segment(N - 1, 1, 1, rl, rr))
for x, y in [(1, 2), (2, 5), (4, 7)]:
    print((x, y), float(cf.two_point_correlation(N, 1, 1, rl, rr, x, y)), sd.centered_moment((x, y)))

# %%
# Three-point function: the (rho_R - rho_L)^n prefactor flips the sign for odd n.
pts = (1, 3, 6)
lit = float(cf.n_point_correlation(cf.CorrelationRequest(pts, centered=True), N, 1, 1, rl, rr))
fixed = float(cf.centered_correlation(N, 1, 1, rl, rr, pts))
print(f"prefactor (rho_R-rho_L)^3: {lit:+.3e}  (rho_L-rho_R)^3: {fixed:+.3e}  exact: {sd.centered_moment(pts):+.3e}")
