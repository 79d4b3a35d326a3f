"""One time slot of the five-phase routing protocol.

Phase 1 (requests) is an input.  Phase 2 reserves major and recovery paths,
Phase 3 draws link generation and builds k-hop views, Phase 4 repairs
failed hops (shortest detour for the Q-CAST family, EXG with fidelity
targets for the Q-GUARD family) and Phase 5 purifies, swaps and counts
qualified pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paths import ExtScorer, FpScorer, ResidualGraph, select_major_paths, select_recovery_paths
from .purification import (
    DEFAULT_R_MAX,
    END_TO_END,
    BellPair,
    final_e2e_purification,
    pump_to_target,
)
from .recovery import (
    assemble_route,
    availability_factor,
    detour_budget,
    plan_targets_equal_split,
    plan_targets_ws,
    qcast_recovery,
    select_recovery,
    span_plan,
    uniform_detour_targets,
    ws_targets,
)
from .views import LinkStateView, visible_links
from .werner import clamp_fidelity, end_to_end_fidelity


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str
    scorer: str               # "EXT" | "FP"
    recovery: str             # "SHORTEST_DETOUR" | "EXG"
    targets: str              # "EQUAL_SPLIT" | "WS"
    hop_purification: bool
    e2e_purification: bool


ALGORITHMS = {
    "QCAST": AlgorithmConfig("QCAST", "EXT", "SHORTEST_DETOUR", "EQUAL_SPLIT", False, False),
    "QCAST_PUR": AlgorithmConfig("QCAST_PUR", "EXT", "SHORTEST_DETOUR", "EQUAL_SPLIT", False, True),
    "QGUARD": AlgorithmConfig("QGUARD", "EXT", "EXG", "EQUAL_SPLIT", True, True),
    "QGUARD_WS": AlgorithmConfig("QGUARD_WS", "EXT", "EXG", "WS", True, True),
    "QGUARD_FP": AlgorithmConfig("QGUARD_FP", "FP", "EXG", "EQUAL_SPLIT", True, True),
}


@dataclass
class SlotMetrics:
    raw: list[int]
    qualified: list[int]
    trace: dict = field(default_factory=dict)

    @property
    def served(self) -> list[bool]:
        return [x >= 1 for x in self.qualified]

    @property
    def total_raw(self) -> int:
        return sum(self.raw)

    @property
    def total_qualified(self) -> int:
        return sum(self.qualified)

    @property
    def served_pairs(self) -> int:
        return sum(self.served)


def attempt_generation(graph, reservations, rng: np.random.Generator, noise_sigma: float = 0.01) -> dict:
    """Realized pair fidelities keyed by ``(reservation index, link)``.

    Success and noise are drawn for every channel of every link, reserved or
    not, so two runs on the same stream see the same outcome on a given
    channel even when they reserve different paths.
    """
    n_links = len(graph.links)
    width = max((l.channels for l in graph.links), default=0)
    u = rng.random((n_links, width))
    z = rng.standard_normal((n_links, width))
    out = {}
    for ri, res in enumerate(reservations):
        for link, chans in zip(res.links, res.channels):
            l = graph.links[link]
            out[(ri, link)] = [
                clamp_fidelity(l.f0_mean + noise_sigma * z[link, c]) for c in chans if u[link, c] < l.p_gen
            ]
    return out


def execute_swaps(pools: Sequence[Sequence[BellPair]], q: float, rng) -> list[BellPair]:
    """Rank-matched swapping along a route.

    Attempt ``t`` joins the ``t``-th best pair of every hop and survives if
    all ``L - 1`` swaps succeed.
    """
    if not pools:
        return []
    ranked = [sorted(p, key=lambda b: b.fidelity, reverse=True) for p in pools]
    attempts = min(len(p) for p in ranked)
    out = []
    for t in range(attempts):
        chain = [p[t].fidelity for p in ranked]
        if len(chain) > 1:
            draws = rng.random(len(chain) - 1)
            if not np.all(draws < q):
                continue
        out.append(BellPair(end_to_end_fidelity(chain), END_TO_END))
    return out


class Simulator:
    """Runs slots of a configured algorithm over a fixed topology.

    Scorers (with their path-score caches) and per-node visibility sets are
    built once and reused across slots.
    """

    def __init__(
        self,
        graph,
        *,
        q: float = 0.9,
        k: int = 3,
        r_max: int = DEFAULT_R_MAX,
        noise_sigma: float = 0.01,
        e2e_stochastic: bool = True,
        recovery_rounds: int = 2,
    ):
        self.graph = graph
        self.q = q
        self.k = k
        self.r_max = r_max
        self.noise_sigma = noise_sigma
        self.e2e_stochastic = e2e_stochastic
        self.recovery_rounds = recovery_rounds
        self._ext = ExtScorer(graph, q)
        self._fp: dict[float, FpScorer] = {}
        self._visible: dict[int, frozenset] = {}
        self._ends = [(l.u, l.v) for l in graph.links]

    # plumbing ----------------------------------------------------------

    def scorer(self, kind: str, f_th: float | None = None):
        if kind == "EXT":
            return self._ext
        if f_th not in self._fp:
            self._fp[f_th] = FpScorer(self.graph, self.q, f_th, self.r_max)
        return self._fp[f_th]

    def view(self, owner: int, outcomes) -> LinkStateView:
        vis = self._visible.get(owner)
        if vis is None:
            vis = self._visible[owner] = visible_links(self.graph.hop_distances(), self._ends, owner, self.k)
        return LinkStateView(owner, self.k, outcomes, vis)

    def reserve(self, requests, scorer_kind: str):
        """Phase 2: major paths, then detours in what is left."""
        if scorer_kind == "FP":
            scorers = [self.scorer("FP", r.f_th) for r in requests]
        else:
            scorers = [self._ext] * len(requests)
        residual = ResidualGraph(self.graph)
        majors, residual = select_major_paths(self.graph, requests, scorers, residual)
        recs = select_recovery_paths(
            residual, majors, self.k, [scorers[m.owner] for m in majors], rounds=self.recovery_rounds
        )
        return majors, recs

    # phase 4 -------------------------------------------------------------

    def _major_targets(self, algo: AlgorithmConfig, major, f_th: float) -> list[float]:
        n = len(major.links)
        if algo.targets == "WS":
            f0s = [self.graph.links[l].f0_mean for l in major.links]
            w_th = (4 * f_th - 1) / 3
            rounds = plan_targets_ws(f0s, w_th, major.width, self.r_max)
            if rounds is not None:
                return ws_targets(f0s, rounds, w_th, self.r_max)
        return plan_targets_equal_split(n, f_th)

    def _detour_targets(self, algo: AlgorithmConfig, major, det, f_th: float) -> list[float]:
        w_th = (4 * f_th - 1) / 3
        if algo.targets == "WS":
            etas = [self.graph.links[l].eta for l in major.links]
            budget = detour_budget(w_th, det.segment, len(major.links), etas)
            f0s = [self.graph.links[l].f0_mean for l in det.links]
            rounds = plan_targets_ws(f0s, budget, det.width, self.r_max)
            if rounds is not None:
                return ws_targets(f0s, rounds, budget, self.r_max)
        else:
            budget = detour_budget(w_th, det.segment, len(major.links))
        return uniform_detour_targets(budget, len(det.links))

    def plan_routes(self, algo, requests, majors, recs, outcomes):
        """Phase 4 for every major path; failed routes are dropped."""
        n_major = len(majors)
        by_major: dict[int, list[tuple[int, object]]] = {}
        for ri, rec in enumerate(recs):
            by_major.setdefault(rec.major, []).append((n_major + ri, rec))
        routes = []
        for mi, major in enumerate(majors):
            f_th = requests[major.owner].f_th
            targets = self._major_targets(algo, major, f_th)
            failed = [h for h, l in enumerate(major.links) if not outcomes.get((mi, l))]
            choices = {}
            covered_until = 0
            for h in failed:
                if h < covered_until:
                    continue
                cands = [
                    (idx, rec)
                    for idx, rec in by_major.get(mi, ())
                    if rec.segment[0] <= h < rec.segment[1] and rec.segment[0] >= covered_until
                ]
                pick = self._choose_detour(algo, major, cands, outcomes, f_th)
                if pick is None:
                    break
                idx, rec, det_targets = pick
                choices[rec.segment] = (idx, rec, det_targets)
                covered_until = rec.segment[1]
            route = assemble_route(mi, major, failed, choices, targets)
            if route is not None:
                routes.append(route)
        return routes

    def _choose_detour(self, algo, major, cands, outcomes, f_th):
        if not cands:
            return None
        head = lambda rec: self.view(major.nodes[rec.segment[0]], outcomes)
        if algo.recovery == "SHORTEST_DETOUR":
            options = [(rec, [(idx, l) for l in rec.links]) for idx, rec in cands]
            rec = qcast_recovery(options, head)
            if rec is None:
                return None
            idx = next(i for i, r in cands if r is rec)
            return idx, rec, self._detour_targets(algo, major, rec, f_th)
        options = []
        index = {}
        for idx, rec in cands:
            view = head(rec)
            det_targets = self._detour_targets(algo, major, rec, f_th)
            span = span_plan([(idx, l) for l in rec.links], det_targets, rec.width, view, self.r_max)
            options.append((rec, span, availability_factor(span, view)))
            index[id(rec)] = idx
        best = select_recovery(options, self.q)
        if best is None:
            return None
        rec, span, _ = best
        return index[id(rec)], rec, list(span.targets)

    # phase 5 -------------------------------------------------------------

    def run_slot(self, requests, algo: AlgorithmConfig, streams, shared: dict | None = None) -> SlotMetrics:
        m = len(requests)
        trace = dict.fromkeys(
            ("generated", "pump_lost", "swap_used", "unused", "e2e_created", "e2e_lost", "routes", "majors"), 0
        )
        if m == 0:
            return SlotMetrics([], [], trace)
        key = ("phase2", algo.scorer)
        if shared is not None and key in shared:
            majors, recs = shared[key]
        else:
            majors, recs = self.reserve(requests, algo.scorer)
            if shared is not None:
                shared[key] = (majors, recs)
        outcomes = attempt_generation(self.graph, list(majors) + list(recs), streams.generation, self.noise_sigma)
        routes = self.plan_routes(algo, requests, majors, recs, outcomes)
        trace["majors"] = len(majors)
        trace["routes"] = len(routes)

        e2e: list[list[BellPair]] = [[] for _ in range(m)]
        for route in routes:
            pools = [[BellPair(f, key[1]) for f in outcomes[key]] for key in route.keys]
            generated = sum(len(p) for p in pools)
            trace["generated"] += generated
            if algo.hop_purification:
                new_pools = []
                for pool, target in zip(pools, route.targets):
                    outs, left = pump_to_target(pool, target, streams.purification)
                    new_pools.append(outs + left)
                pools = new_pools
            after_pump = sum(len(p) for p in pools)
            trace["pump_lost"] += generated - after_pump
            attempts = min(len(p) for p in pools)
            trace["swap_used"] += attempts * len(pools)
            trace["unused"] += after_pump - attempts * len(pools)
            e2e[route.owner].extend(execute_swaps(pools, self.q, streams.swap))

        raw, qualified = [], []
        for i, req in enumerate(requests):
            pairs = e2e[i]
            raw.append(len(pairs))
            trace["e2e_created"] += len(pairs)
            if algo.e2e_purification:
                pairs = final_e2e_purification(pairs, req.f_th, streams.purification, self.e2e_stochastic)
            trace["e2e_lost"] += raw[-1] - len(pairs)
            qualified.append(sum(p.fidelity >= req.f_th for p in pairs))
        return SlotMetrics(raw, qualified, trace)


def run_slot(graph, requests, algo, *, k: int, q: float, r_max: int = DEFAULT_R_MAX, streams, **kw) -> SlotMetrics:
    """Single-slot convenience wrapper around :class:`Simulator`."""
    if isinstance(algo, str):
        algo = ALGORITHMS[algo]
    return Simulator(graph, q=q, k=k, r_max=r_max, **kw).run_slot(requests, algo, streams)
