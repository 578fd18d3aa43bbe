"""
Watching the battery
====================

Run the index policy for a while and look at how the battery level settles
below the perturbation level ``theta``, and how often it decides to decode.
"""
import numpy as np

from ehrx import ChannelParams, EnergyConfig, compute_theta, default_gamma_max, run

params = ChannelParams.homogeneous(10, mean=1.0, q=0.1)
cfg = EnergyConfig(gamma_max=default_gamma_max(params), v=200.0, decode_cost_c=1.0)

theta = compute_theta(cfg)
print("gamma_max = %.2f, theta = %.2f" % (cfg.gamma_max, theta))
print("never decode at or below E = %.3f" % cfg.harvest_threshold)

###############################################################################
# 200k slots with the full trajectory kept.
m, tr = run("lyapunov", params, cfg, horizon=200_000, seed=1, warmup=0, trace=True)
print("throughput %.4f bits/slot" % m.throughput)
print("decoded %d slots, %d of them collisions" % (m.decode_count, m.wasted_decodes))

# the battery climbs from the threshold and then hovers in a band under theta
for t in (0, 1000, 10_000, 50_000, 199_999):
    print("t=%6d  E=%.2f" % (t, tr.energy[t]))
print("E range after 10k slots: [%.2f, %.2f]" % (tr.energy[10_000:].min(), tr.energy[10_000:].max()))

###############################################################################
# Decoding rate as a function of received power. Mid-power slots are decoded
# almost always; very weak ones carry little rate and strong ones are
# probably collisions, so those are mostly harvested.
busy = tr.gamma > 0
bins = np.quantile(tr.gamma[busy], np.linspace(0, 1, 6))
idx = np.digitize(tr.gamma[busy], bins[1:-1])
for k in range(5):
    sel = idx == k
    print("gamma in [%.2f, %.2f): decode fraction %.3f" % (bins[k], bins[k + 1], tr.rho[busy][sel].mean()))
