"""Phase 4: per-hop fidelity targets, EXG, detour choice, route assembly.

Realized link data is read only through :class:`~qguard.views.LinkStateView`
objects.  Outcome keys are ``(reservation, link)`` pairs because one link
can carry channels reserved by several paths and each path may only use
its own pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .purification import DEFAULT_R_MAX, build_cost_table, iterate_rounds
from .views import LinkStateView
from .werner import (
    detour_targets,
    equal_split_target,
    fidelity_to_werner,
    segment_budget,
    werner_to_fidelity,
)

TIE_RTOL = 1e-12


def plan_targets_equal_split(n_hops: int, f_th: float) -> list[float]:
    return [equal_split_target(f_th, n_hops)] * n_hops


def _product(xs) -> float:
    out = 1.0
    for x in xs:
        out *= x
    return out


def plan_targets_ws(f0s: Sequence[float], w_budget: float, width: int, r_max: int = DEFAULT_R_MAX) -> list[int] | None:
    """Greedy non-uniform purification rounds for hops with predicted ``f0s``.

    Start from the smallest uniform round count meeting ``w_budget`` and
    repeatedly drop one round where it costs the least Werner parameter,
    while the product still meets the budget.  Hops whose marginal losses
    tie (relative ``1e-12``) are decremented together or not at all, so
    identical hops always keep identical round counts.  ``None`` if no
    uniform count up to ``r_max`` works or it needs more than ``width`` raw
    pairs per output.
    """
    n = len(f0s)
    table = [[fidelity_to_werner(f) for f in iterate_rounds(f0, r_max)] for f0 in f0s]
    uniform = next((r for r in range(r_max + 1) if _product(t[r] for t in table) >= w_budget), None)
    if uniform is None or 2**uniform > width:
        return None
    rounds = [uniform] * n

    def ok(rs):
        return _product(table[e][rs[e]] for e in range(n)) >= w_budget

    while True:
        cands = []
        for e in range(n):
            if rounds[e] == 0:
                continue
            trial = rounds.copy()
            trial[e] -= 1
            if ok(trial):
                cands.append((table[e][rounds[e]] - table[e][rounds[e] - 1], e))
        if not cands:
            return rounds
        cands.sort()
        applied = False
        i = 0
        while i < len(cands):
            lead = cands[i][0]
            group = [e for d, e in cands[i:] if math.isclose(d, lead, rel_tol=TIE_RTOL, abs_tol=1e-15)]
            trial = rounds.copy()
            for e in group:
                trial[e] -= 1
            if ok(trial):
                rounds = trial
                applied = True
                break
            i += len(group)
        if not applied:
            return rounds


def ws_targets(f0s: Sequence[float], rounds: Sequence[int], w_budget: float, r_max: int = DEFAULT_R_MAX) -> list[float]:
    """Per-hop fidelity targets for a WS round allocation.

    Each hop's target Werner parameter is its predicted post-purification
    value scaled by an equal share of the slack, so the targets multiply to
    exactly ``w_budget``.
    """
    ws = [fidelity_to_werner(iterate_rounds(f0, r_max)[r]) for f0, r in zip(f0s, rounds)]
    slack = (w_budget / _product(ws)) ** (1.0 / len(ws))
    return [werner_to_fidelity(min(1.0, w * slack)) for w in ws]


def ws_segment_budget(etas: Sequence[float], segment: tuple[int, int], w_th: float) -> float:
    """Werner budget of major-path hops ``segment[0]:segment[1]`` weighted by ``1/eta``."""
    d_total = sum(1.0 / e for e in etas)
    d_seg = sum(1.0 / e for e in etas[segment[0] : segment[1]])
    return w_th ** (d_seg / d_total)


@dataclass(frozen=True)
class SpanPlan:
    keys: tuple            # (reservation, link) per hop
    targets: tuple[float, ...]
    rounds: tuple           # int or None per hop
    width: int

    @property
    def swaps(self) -> int:
        return len(self.keys) - 1

    @property
    def feasible_rounds(self) -> bool:
        return all(r is not None and 2**r <= self.width for r in self.rounds)


def span_plan(keys: Sequence, targets: Sequence[float], width: int, view: LinkStateView, r_max: int = DEFAULT_R_MAX) -> SpanPlan:
    table = build_cost_table(view, dict(zip(keys, targets)), r_max)
    return SpanPlan(tuple(keys), tuple(targets), tuple(e.rounds for e in table), width)


def availability_factor(span: SpanPlan, view: LinkStateView) -> float:
    """Worst ratio of realized pairs to the ``2**r`` the plan needs per hop."""
    a = 1.0
    for key, r in zip(span.keys, span.rounds):
        n = view.count(key)
        if r is None or n == 0:
            return 0.0
        a = min(a, n / 2**r)
    return min(a, 1.0)


def exg(span: SpanPlan, q: float, a: float) -> float:
    """Expected goodput of a span; ``-inf`` when the span is infeasible."""
    if a <= 0 or not span.feasible_rounds:
        return -math.inf
    penalty = 1 + sum(2**r - 1 for r in span.rounds)
    return span.width * q**span.swaps / penalty * a


def select_recovery(options: Sequence[tuple], q: float):
    """Pick the feasible option with the highest EXG.

    ``options`` holds ``(detour, span, availability)`` triples where
    ``detour`` exposes ``nodes``.  Ties go to fewer hops, then the
    lexicographically smaller node sequence.  ``None`` if nothing is
    feasible.
    """
    best, best_key = None, None
    for det, span, a in options:
        score = exg(span, q, a)
        if score == -math.inf:
            continue
        key = (-score, len(span.keys), tuple(det.nodes))
        if best_key is None or key < best_key:
            best, best_key = (det, span, a), key
    return best


def qcast_recovery(options: Sequence[tuple], view_of):
    """Shortest detour whose every hop produced at least one pair.

    ``options`` holds ``(detour, keys)``; ``view_of(detour)`` gives the view
    used to read its hops.
    """
    alive = []
    for det, keys in options:
        view = view_of(det)
        if all(view.count(k) > 0 for k in keys):
            alive.append((len(keys), tuple(det.nodes), det))
    if not alive:
        return None
    return min(alive, key=lambda t: t[:2])[2]


@dataclass
class AssembledRoute:
    owner: int
    nodes: tuple[int, ...]
    keys: list            # (reservation, link) per hop
    targets: list[float]


def assemble_route(major_idx: int, major, failed: Sequence[int], choices: dict, major_targets: Sequence[float]):
    """Splice chosen detours into a major path.

    ``choices`` maps a segment ``(i, j)`` to ``(detour_idx, detour, targets)``.
    Returns ``None`` (route failed) if a failed hop is left uncovered.
    """
    segs = sorted(choices)
    for (a0, a1), (b0, b1) in zip(segs, segs[1:]):
        if b0 < a1:
            raise ValueError(f"overlapping detours {(a0, a1)} and {(b0, b1)}")
    covered = {h for i, j in segs for h in range(i, j)}
    if any(h not in covered for h in failed):
        return None
    nodes = [major.nodes[0]]
    keys, targets = [], []
    h = 0
    starts = {i: (i, j) for i, j in segs}
    while h < len(major.links):
        if h in starts:
            i, j = starts[h]
            det_idx, det, det_targets = choices[(i, j)]
            keys += [(det_idx, l) for l in det.links]
            targets += list(det_targets)
            nodes += list(det.nodes[1:])
            h = j
        else:
            keys.append((major_idx, major.links[h]))
            targets.append(major_targets[h])
            nodes.append(major.nodes[h + 1])
            h += 1
    return AssembledRoute(major.owner, tuple(nodes), keys, targets)


def detour_budget(w_th: float, segment: tuple[int, int], major_len: int, etas=None) -> float:
    """Werner share of a replaced segment: hop-count split, or ``1/eta`` weighted."""
    if etas is None:
        return segment_budget(w_th, segment[1] - segment[0], major_len)
    return ws_segment_budget(etas, segment, w_th)


def uniform_detour_targets(w_seg: float, n_hops: int) -> list[float]:
    return [detour_targets(w_seg, n_hops)] * n_hops
