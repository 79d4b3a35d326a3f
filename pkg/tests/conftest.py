import math
from typing import NamedTuple

import pytest
from hypothesis import HealthCheck, settings

from qguard.recovery import availability_factor, detour_budget, span_plan, uniform_detour_targets
from qguard.topology import Link, NetworkGraph, Node
from qguard.views import build_k_hop_views

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_graph(n, edges, *, p=1.0, channels=4, eta=9.5, memory=100):
    """Graph on nodes ``0..n-1``; per-edge values may be dicts keyed by ``(u, v)``.

    Lengths are ``-ln p`` with ``alpha = 1`` so each link gets exactly ``p``.
    """

    def val(x, e):
        return x.get(e, x.get((e[1], e[0]))) if isinstance(x, dict) else x

    nodes = [Node(i, float(i), 0.0, memory[i] if isinstance(memory, (list, tuple)) else memory) for i in range(n)]
    links = []
    for e in edges:
        pe = val(p, e)
        length = -math.log(pe) if pe > 0 else 1e9
        links.append(Link(e[0], e[1], length, val(channels, e), val(eta, e)))
    return NetworkGraph(nodes, links, alpha=1.0)


def line_graph(n, **kw):
    return make_graph(n, [(i, i + 1) for i in range(n - 1)], **kw)


# The recovery example: major path S-C-E-G-J-D, two-hop detours through
# A, B and H, and a three-hop detour E-F-I-J.
DETOUR = dict(S=0, C=1, E=2, G=3, J=4, D=5, A=6, B=7, H=8, F=9, I=10)
DETOUR_MAJOR = ["S", "C", "E", "G", "J", "D"]
DETOUR_EDGES = [
    ("S", "C"), ("C", "E"), ("E", "G"), ("G", "J"), ("J", "D"),
    ("S", "A"), ("A", "C"), ("J", "B"), ("B", "D"),
    ("E", "H"), ("H", "J"), ("E", "F"), ("F", "I"), ("I", "J"),
]


def detour_graph(p=0.9, channels=4, memory=100):
    edges = [(DETOUR[a], DETOUR[b]) for a, b in DETOUR_EDGES]
    return make_graph(len(DETOUR), edges, p=p, channels=channels, memory=memory)


def ids(names):
    return tuple(DETOUR[x] for x in names)


@pytest.fixture
def detour_net():
    return detour_graph()


class Detour(NamedTuple):
    nodes: tuple
    links: tuple = ()


def detour_options(g):
    """The two candidate detours around the failed E-G hop, seen from E.

    Realized pairs follow the purification table of the example, with
    F_th = 0.8 on the 5-hop major path and W = 3.  Returns the 2-hop and
    3-hop detours, their ``(detour, span, availability)`` options and E's view.
    """
    E, H, J, F, I = (DETOUR[x] for x in "EHJFI")
    lid = g.link_id
    outcomes = {
        lid(E, H): [0.940],
        lid(H, J): [0.945, 0.945],
        lid(E, F): [0.960, 0.960],
        lid(F, I): [0.958, 0.958, 0.958],
        lid(I, J): [0.962, 0.962],
        lid(E, DETOUR["G"]): [],
    }
    view = build_k_hop_views(g, outcomes, 3)[E]
    w_seg = detour_budget((4 * 0.8 - 1) / 3, (2, 4), 5)
    two = Detour((E, H, J), (lid(E, H), lid(H, J)))
    three = Detour((E, F, I, J), (lid(E, F), lid(F, I), lid(I, J)))
    opts = []
    for det in (two, three):
        span = span_plan(list(det.links), uniform_detour_targets(w_seg, len(det.links)), 3, view)
        opts.append((det, span, availability_factor(span, view)))
    return two, three, opts, view
