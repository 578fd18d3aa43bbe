"""
Throughput against V and against q
==================================

The two parameter sweeps at a reduced scale (2 seeds of 2e5 slots) so the
script finishes in well under a minute. The CLI runs the same sweeps at full
scale: ``ehrx sweep-v`` and ``ehrx sweep-q``.
"""
from ehrx import experiments as ex

cfg = ex.load_config().replace(horizon=200_000, warmup=10_000, seeds=2)

###############################################################################
# Larger V trades battery headroom for throughput; the gain flattens out.
for r in ex.sweep_v(cfg):
    print("c=%.1f  V=%5.0f  thr=%.4f +- %.4f  B/V=%.2f"
          % (r["c"], r["V"], r["mean_throughput"], r["stderr"], r["B_over_V"]))

###############################################################################
# A coarse access-probability grid. Costlier decoding pushes the best q up,
# since the extra traffic also brings more energy to harvest.
cfg = cfg.replace(sweep_q=ex.SweepSpec("q", [0.04, 0.08, 0.12, 0.16, 0.2, 0.3], (0.5, 2.0), v=200.0))
rows, best = ex.sweep_q(cfg)
for r in rows:
    print("c=%.1f  q=%.2f  thr=%.4f" % (r["c"], r["q"], r["mean_throughput"]))
print("best q per c:", best)
