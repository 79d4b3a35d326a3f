"""
Choosing a detour by expected goodput
=====================================

A 5-hop major path S-C-E-G-J-D loses its E-G hop.  Two detours are
reserved around the E..J segment: a short one through H and a longer one
through F and I.  The short detour has one weak pair on E-H; the long one
has plenty of good pairs.  This script walks through the fidelity budget
and shows why the fidelity-aware planner picks the longer detour while a
hop-count planner picks the shorter one.
"""

from qguard.recovery import (
    availability_factor,
    detour_budget,
    exg,
    qcast_recovery,
    select_recovery,
    span_plan,
    uniform_detour_targets,
)
from qguard.topology import Link, NetworkGraph, Node
from qguard.views import build_k_hop_views
from qguard.werner import fidelity_to_werner

names = ["S", "C", "E", "G", "J", "D", "H", "F", "I"]
idx = {n: i for i, n in enumerate(names)}
edges = ["SC", "CE", "EG", "GJ", "JD", "EH", "HJ", "EF", "FI", "IJ"]
g = NetworkGraph(
    [Node(i, float(i), 0.0, 100) for i in range(len(names))],
    [Link(idx[a], idx[b], 1.0, 4, 9.5) for a, b in edges],
)
lid = lambda a, b: g.link_id(idx[a], idx[b])

# %%
# The request wants F_th = 0.8.  In Werner terms the whole path must keep
# w_th, and the two-hop E..J segment gets its share of that budget.
w_th = fidelity_to_werner(0.8)
w_seg = detour_budget(w_th, (2, 4), 5)
print(f"w_th = {w_th:.4f}, segment budget w_seg = {w_seg:.4f}")
for hops in (2, 3):
    print(f"  a {hops}-hop detour needs F >= {uniform_detour_targets(w_seg, hops)[0]:.4f} per hop")

# %%
# Realized pairs after generation, as seen by E through its 3-hop view.
outcomes = {
    lid("E", "G"): [],
    lid("E", "H"): [0.940],
    lid("H", "J"): [0.945, 0.945],
    lid("E", "F"): [0.960, 0.960],
    lid("F", "I"): [0.958, 0.958, 0.958],
    lid("I", "J"): [0.962, 0.962],
}
view = build_k_hop_views(g, outcomes, 3)[idx["E"]]

detours = {"E-H-J": ["EH", "HJ"], "E-F-I-J": ["EF", "FI", "IJ"]}
options = []
for label, hops in detours.items():
    keys = [lid(h[0], h[1]) for h in hops]
    span = span_plan(keys, uniform_detour_targets(w_seg, len(keys)), 3, view)
    a = availability_factor(span, view)
    options.append((label, span, a))
    print(f"{label:8s} rounds={span.rounds} availability={a:.2f} EXG={exg(span, 0.9, a):.4f}")


class Detour:
    def __init__(self, label):
        self.label = label
        self.nodes = tuple(idx[c] for c in label.split("-"))


# %%
# The fidelity-aware planner maximises EXG; the hop-count planner takes the
# shortest detour whose hops all have at least one pair.
best = select_recovery([(Detour(lbl), s, a) for lbl, s, a in options], 0.9)
short = qcast_recovery(
    [(Detour(lbl), [lid(h[0], h[1]) for h in hops]) for lbl, hops in detours.items()],
    lambda d: view,
)
print("fidelity-aware choice:", best[0].label)
print("hop-count choice:     ", short.label)
