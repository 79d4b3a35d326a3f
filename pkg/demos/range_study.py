"""
How far can one pair be served?
===============================

One random source-destination pair per slot.  The script bins slots by the
pair's shortest-path hop count and prints the fraction of slots in which
the pair received at least one qualified ebit.
"""

from collections import defaultdict

from qguard.experiment import HOPS, ExperimentConfig, run_range_study

cfg = ExperimentConfig(m=1, slots=200, seeds=[0], algorithms=["QCAST", "QCAST_PUR", "QGUARD"])
rows = run_range_study(cfg, HOPS)

# %%
# Success fraction per hop bin.
frac = defaultdict(dict)
count = {}
for r in rows:
    frac[r.bin][r.algorithm] = r.success_fraction
    count[r.bin] = r.slots

print("hops  slots" + "".join(f"{a:>11s}" for a in cfg.algorithms))
for b in sorted(frac):
    print(f"{b:4d}  {count[b]:5d}" + "".join(f"{frac[b].get(a, 0.0):11.3f}" for a in cfg.algorithms))
