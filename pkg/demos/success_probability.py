"""
Success probability on a collision channel
==========================================

A receiver sees the total received power ``gamma`` of a slot but not how
many transmitters produced it. Here we compare the closed-form probability
that a slot with power ``gamma`` carries exactly one transmitter against a
binned Monte Carlo estimate.
"""
import numpy as np

from ehrx import ChannelParams, estimate_success_prob_mc
from ehrx.collision import density_table

###############################################################################
# Three links with distinct means and access probabilities.
params = ChannelParams(means=(1.0, 2.0, 3.0), access_probs=(0.2, 0.3, 0.4))
table = density_table(params)
print("non-empty subsets:", len(table.weights))
print("probability of an idle slot: %.4f" % table.empty_weight)

###############################################################################
# Closed form at a few power levels. Weak slots are almost always a single
# sender; strong ones are more likely a pile-up.
for g in (0.1, 1.0, 3.0, 8.0):
    print("gamma=%4.1f  P_s=%.4f" % (g, table.success_prob(g)))

###############################################################################
# Monte Carlo over busy slots, 20 equal bins.
edges = np.linspace(0.0, 10.0, 21)
est = estimate_success_prob_mc(params, edges, 1_000_000, np.random.default_rng(0))
closed = table.success_prob(est.midpoints)
for mid, n, e, c in zip(est.midpoints, est.counts, est.estimate, closed):
    print("%5.2f  n=%7d  mc=%.4f  closed=%.4f" % (mid, n, e, c))

ok = est.counts >= 1000
print("max |mc - closed| on populated bins: %.4f" % np.max(np.abs(est.estimate - closed)[ok]))
