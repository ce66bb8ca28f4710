"""Monte Carlo estimators next to their exact targets.

All runs are reproducible from the (seed, stream) pair.
"""
# %%
import numpy as np

from sepness import closed_forms as cf
from sepness import ninja as nj
from sepness import simulate as sim
from sepness.lattice import homogeneous_segment

rng = sim.RngStream(seed=2024)
n = 50_000

# %%
# Labelled stirring from a full bulk: the pattern of labels that exit on the
# right is one draw from F.
g = homogeneous_segment(3)
pats = sim.stirring_pattern_samples(g, n, rng.child(0))
est = sim.McEstimate.from_samples(np.eye(1 << g.n_sites)[pats])
target = cf.mixture_weights(g).weights.astype(float)
for m in range(1 << g.n_sites):
    print(f"mask {m:03b}: {est.mean[m]:.4f} +- {est.stderr[m]:.4f}   F = {target[m]:.4f}")

# %%
# Dual walkers from {1, 2} on [3]_0.
levels = sim.dual_level_samples(homogeneous_segment(2), (1, 2), n, rng.child(1))
print("dual levels:", levels.mean(axis=0), "target (1/6, 2/3, 1/6)")

# %%
# Ninja coupling: given that every label ends on the right, the ninja ends
# on the left with probability 1 - (x_{k+1} - k)/N.
N, xs, y = 5, (1, 2), 4
s = sim.ninja_samples(N, xs, y, n, rng.child(2))
E = s[:, 1] == 1
cond = sim.McEstimate.from_samples(s[E, 2])
print(f"P(ninja at 0 | E) = {cond.mean:.4f} +- {cond.stderr:.4f}, "
      f"predicted {nj.predicted_ninja_at_0_given_E(N, xs, y):.4f}")

# %%
# Primal dynamics: time averages after burn-in.
g = homogeneous_segment(3, 1, 1, 0.2, 0.8)
run = sim.simulate_sep(g, 0, 20_000.0, rng.child(3), [(1,), (2,), (3,), (1, 3)])
for sites, e in zip(run.observables, run.estimates):
    print(sites, f"{e.mean:.4f} +- {e.stderr:.4f}")
