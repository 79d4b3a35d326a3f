"""Phase 2: path metrics, extended Dijkstra, and contention-free reservation.

A ``(W, L)``-path reserves ``W`` channels on each of its ``L`` hops; every
reserved channel holds one memory qubit at both ends of its link, so path
endpoints spend ``W`` qubits and intermediate nodes ``2W``.

Path scores (EXT and the purification-aware FP score) are non-additive but
never increase when a path is extended, which is what lets a Dijkstra-style
search use them.
"""
from __future__ import annotations

import functools
import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .purification import DEFAULT_R_MAX, purification_cost
from .werner import equal_split_target

MAJOR = "major"
RECOVERY = "recovery"


# metrics -------------------------------------------------------------


@functools.lru_cache(maxsize=65536)
def _binomial(width: int, p: float) -> tuple[float, ...]:
    return tuple(math.comb(width, i) * p**i * (1.0 - p) ** (width - i) for i in range(width + 1))


def hop_success_dist(width: int, p: float) -> np.ndarray:
    """Binomial distribution of successful channels out of ``width``."""
    if width < 1:
        raise ValueError("width must be >= 1")
    return np.array(_binomial(width, p))


def _bottleneck(qs: Sequence[Sequence[float]]) -> list[float]:
    # Plain lists: widths are small, so numpy call overhead would dominate.
    p = list(qs[0])
    for q in qs[1:]:
        n = len(p)
        q_at_least = [0.0] * n
        p_above = [0.0] * n
        acc_q = acc_p = 0.0
        for i in range(n - 1, -1, -1):
            p_above[i] = acc_p
            acc_q += q[i]
            acc_p += p[i]
            q_at_least[i] = acc_q
        p = [p[i] * q_at_least[i] + q[i] * p_above[i] for i in range(n)]
    return p


def bottleneck_dist(qs: Sequence[np.ndarray]) -> np.ndarray:
    """Distribution of the minimum success count over independent hops.

    Uses the forward recurrence: after adding hop ``k`` the bottleneck is ``i``
    if it was ``i`` and hop ``k`` got at least ``i``, or hop ``k`` got exactly
    ``i`` and the earlier bottleneck exceeded ``i``.
    """
    return np.array(_bottleneck([[float(x) for x in q] for q in qs]))


def _expected_throughput(qs: Sequence[Sequence[float]], q: float) -> float:
    pl = _bottleneck(qs)
    return q ** (len(qs) - 1) * sum(i * x for i, x in enumerate(pl))


def ext(probs: Sequence[float], width: int, q: float) -> float:
    """Expected end-to-end pairs of a ``(width, len(probs))``-path in one slot."""
    if width < 1:
        raise ValueError("width must be >= 1")
    return _expected_throughput([_binomial(width, p) for p in probs], q)


def _purified(width: int, p: float, cost: int, m: int) -> list[float]:
    base = _binomial(width, p)
    out = [sum(base[i * cost : min((i + 1) * cost - 1, width) + 1]) for i in range(m)]
    out.append(sum(base[m * cost :]))
    return out


def purified_hop_dist(width: int, p: float, cost: int, m: int) -> np.ndarray:
    """Distribution of purified outputs on a hop that spends ``cost`` raw pairs each.

    Outcomes above ``m`` are folded into ``m``.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    return np.array(_purified(width, p, cost, m))


def fp_score(
    probs: Sequence[float],
    f0s: Sequence[float],
    width: int,
    q: float,
    f_th: float,
    r_max: int = DEFAULT_R_MAX,
) -> float:
    """Purification-aware path score from predicted initial fidelities ``f0s``.

    Each hop gets the equal-split target for this path length; a hop needing
    ``r`` rounds turns ``2**r`` raw pairs into one purified pair.  Zero when
    some hop cannot reach its target or the width cannot feed one output on
    every hop.
    """
    target = equal_split_target(f_th, len(probs))
    costs = []
    for f0 in f0s:
        r = purification_cost(f0, target, r_max)
        if r is None:
            return 0.0
        costs.append(2**r)
    m = min(width // c for c in costs)
    if m == 0:
        return 0.0
    return _expected_throughput([_purified(width, p, c, m) for p, c in zip(probs, costs)], q)


class ExtScorer:
    """EXT over graph links, memoised by ``(links, width)``.

    Bottleneck distributions are cached per path prefix, so scoring a
    one-hop extension of a scored path costs one recurrence step.
    """

    width_monotone = True
    max_cache = 2_000_000

    def __init__(self, graph, q: float):
        self.graph = graph
        self.q = q
        self._cache: dict = {}
        self._dists: dict = {}

    def __call__(self, links: tuple[int, ...], width: int) -> float:
        key = (links, width)
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) > self.max_cache:
                self._cache.clear()
                self._dists.clear()
            hit = self._cache[key] = self._score(links, width)
        return hit

    def _dist(self, links, width):
        key = (links, width)
        d = self._dists.get(key)
        if d is None:
            hop = _binomial(width, self.graph.links[links[-1]].p_gen)
            d = list(hop) if len(links) == 1 else _bottleneck([self._dist(links[:-1], width), hop])
            self._dists[key] = d
        return d

    def _score(self, links, width):
        pl = self._dist(links, width)
        return self.q ** (len(links) - 1) * sum(i * x for i, x in enumerate(pl))


class FpScorer(ExtScorer):
    """FP score using each link's predicted (noise-free) initial fidelity."""

    def __init__(self, graph, q: float, f_th: float, r_max: int = DEFAULT_R_MAX):
        super().__init__(graph, q)
        self.f_th = f_th
        self.r_max = r_max

    def _score(self, links, width):
        ls = [self.graph.links[l] for l in links]
        return fp_score([l.p_gen for l in ls], [l.f0_mean for l in ls], width, self.q, self.f_th, self.r_max)


# residual resources ---------------------------------------------------


class ResidualGraph:
    """Channels and memory qubits still unreserved in the current slot."""

    def __init__(self, graph):
        self.graph = graph
        self.chan_left = [l.channels for l in graph.links]
        self.mem_left = [n.memory for n in graph.nodes]
        self._next_chan = [0] * len(graph.links)

    def feasible_width(self, nodes: Sequence[int], links: Sequence[int]) -> int:
        w = min(self.chan_left[l] for l in links)
        w = min(w, self.mem_left[nodes[0]], self.mem_left[nodes[-1]])
        for v in nodes[1:-1]:
            w = min(w, self.mem_left[v] // 2)
        return max(w, 0)

    def reserve(self, nodes: Sequence[int], links: Sequence[int], width: int) -> list[list[int]]:
        """Take ``width`` channels on each hop; returns channel indices per hop."""
        if width < 1 or width > self.feasible_width(nodes, links):
            raise ValueError(f"cannot reserve width {width} on {nodes}")
        chans = []
        for l in links:
            start = self._next_chan[l]
            chans.append(list(range(start, start + width)))
            self._next_chan[l] += width
            self.chan_left[l] -= width
        self.mem_left[nodes[0]] -= width
        self.mem_left[nodes[-1]] -= width
        for v in nodes[1:-1]:
            self.mem_left[v] -= 2 * width
        return chans


@dataclass(frozen=True)
class PathCandidate:
    nodes: tuple[int, ...]
    links: tuple[int, ...]
    width: int
    score: float

    @property
    def hops(self) -> int:
        return len(self.links)

    def rank_key(self):
        """Sort key: higher score, then fewer hops, then lexicographic nodes."""
        return (-self.score, len(self.links), self.nodes)


@dataclass
class PathReservation:
    candidate: PathCandidate
    role: str
    owner: int
    width: int
    channels: list[list[int]]
    major: int | None = None
    segment: tuple[int, int] | None = None

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.candidate.nodes

    @property
    def links(self) -> tuple[int, ...]:
        return self.candidate.links


# extended Dijkstra -----------------------------------------------------

Scorer = Callable[[tuple, int], float]


def _best_width(scorer: Scorer, links: tuple, wmax: int) -> tuple[float, int]:
    if getattr(scorer, "width_monotone", False):
        return scorer(links, wmax), wmax
    best, best_w = -math.inf, wmax
    for w in range(wmax, 0, -1):
        s = scorer(links, w)
        if s > best:
            best, best_w = s, w
    return best, best_w


def extended_dijkstra(
    residual: ResidualGraph,
    src: int,
    dst: int,
    scorer: Scorer,
    *,
    width_cap: int | None = None,
    max_hops: int | None = None,
    banned_nodes=frozenset(),
    banned_links=frozenset(),
) -> PathCandidate | None:
    """Highest-scoring ``src -> dst`` path in the residual graph.

    Each node is settled once with the best-ranked path reaching it; paths
    grow only from settled nodes.  Width is the largest the residual allows
    along the path (optionally capped), scanned downward unless the scorer
    declares itself monotone in width.
    """
    mem = residual.mem_left
    chan = residual.chan_left
    adj = residual.graph.adjacency
    core0 = mem[src] if width_cap is None else min(mem[src], width_cap)
    if src == dst or core0 < 1 or mem[dst] < 1:
        return None

    settled = set()
    best: dict[int, tuple] = {}
    # heap entries: (-score, hops, nodes, links, core_width, width)
    heap = [(-math.inf, 0, (src,), (), core0, core0)]
    while heap:
        neg, hops, nodes, links, core, width = heapq.heappop(heap)
        u = nodes[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == dst:
            return PathCandidate(nodes, links, width, -neg)
        if max_hops is not None and hops >= max_hops:
            continue
        through = core if u == src else min(core, mem[u] // 2)
        for v, lid in adj[u]:
            if v in settled or v in banned_nodes or lid in banned_links:
                continue
            c = min(through, chan[lid])
            w = min(c, mem[v])
            if w < 1:
                continue
            new_links = links + (lid,)
            score, bw = _best_width(scorer, new_links, w)
            if score <= 0:
                continue
            entry = (-score, hops + 1, nodes + (v,), new_links, c, bw)
            prev = best.get(v)
            if prev is None or entry[:3] < prev[:3]:
                best[v] = entry
                heapq.heappush(heap, entry)
    return None


# reservation -----------------------------------------------------------


def _pick(scorer, i: int) -> Scorer:
    return scorer[i] if isinstance(scorer, (list, tuple)) else scorer


def select_major_paths(graph, requests, scorer: Scorer, residual: ResidualGraph | None = None):
    """Greedy contention-free major paths.

    Each round every request proposes its best path in the residual graph;
    the globally best proposal is reserved.  Repeats until no request can
    find a positive-score path.  Returns ``(reservations, residual)``.
    ``scorer`` may be one scorer or a list with one per request.

    Reserving only removes resources, so scores of untouched paths cannot
    change; a request's proposal is recomputed only when a reservation
    shares a node or link with it.
    """
    residual = residual or ResidualGraph(graph)
    proposals: dict[int, PathCandidate | None] = {}
    stale = set(range(len(requests)))
    out: list[PathReservation] = []
    while True:
        for i in sorted(stale):
            r = requests[i]
            proposals[i] = extended_dijkstra(residual, r.source, r.destination, _pick(scorer, i))
        stale.clear()
        live = [(c.rank_key(), i) for i, c in proposals.items() if c is not None]
        if not live:
            return out, residual
        _, i = min(live)
        cand = proposals[i]
        chans = residual.reserve(cand.nodes, cand.links, cand.width)
        out.append(PathReservation(cand, MAJOR, i, cand.width, chans))
        used_nodes, used_links = set(cand.nodes), set(cand.links)
        for j, c in proposals.items():
            if c is not None and (used_nodes.intersection(c.nodes) or used_links.intersection(c.links)):
                stale.add(j)


def major_segments(n_hops: int, k: int):
    """Index pairs ``(i, j)`` of major-path nodes with ``1 <= j - i <= k``."""
    for i in range(n_hops):
        for j in range(i + 1, min(i + k, n_hops) + 1):
            yield i, j


def select_recovery_paths(
    residual: ResidualGraph,
    majors: Sequence[PathReservation],
    k: int,
    scorer: Scorer,
    *,
    rounds: int = 2,
) -> list[PathReservation]:
    """Reserve detours around segments of the major paths.

    A detour joins major-path nodes ``i < j`` with ``j - i <= k`` and avoids
    every other node of its major path; it has at most ``k + 1`` hops so its
    links stay inside the k-hop view of node ``i``.  Each round searches one
    new detour per segment (link-disjoint from the segment's earlier ones)
    and reserves them at width 1 in descending score order.  A final pass
    widens the reserved detours, up to their major path's width, from
    whatever capacity remains.  ``scorer`` may be a list aligned with
    ``majors``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out: list[PathReservation] = []
    used: dict[tuple[int, int, int], set[int]] = {}
    for _ in range(rounds):
        found = []
        for mi, maj in enumerate(majors):
            for i, j in major_segments(len(maj.links), k):
                banned = frozenset(maj.nodes[:i] + maj.nodes[i + 1 : j] + maj.nodes[j + 1 :])
                cand = extended_dijkstra(
                    residual,
                    maj.nodes[i],
                    maj.nodes[j],
                    _pick(scorer, mi),
                    width_cap=maj.width,
                    max_hops=k + 1,
                    banned_nodes=banned,
                    banned_links=frozenset(maj.links[i:j]) | used.get((mi, i, j), frozenset()),
                )
                if cand is not None:
                    found.append((cand.rank_key(), mi, i, j, cand))
        if not found:
            break
        added = False
        for _, mi, i, j, cand in sorted(found, key=lambda t: t[:4]):
            if residual.feasible_width(cand.nodes, cand.links) < 1:
                continue
            chans = residual.reserve(cand.nodes, cand.links, 1)
            maj = majors[mi]
            out.append(PathReservation(cand, RECOVERY, maj.owner, 1, chans, major=mi, segment=(i, j)))
            used.setdefault((mi, i, j), set()).update(cand.links)
            added = True
        if not added:
            break
    for rec in out:
        extra = min(residual.feasible_width(rec.nodes, rec.links), majors[rec.major].width - rec.width)
        if extra > 0:
            more = residual.reserve(rec.nodes, rec.links, extra)
            for hop, chans in zip(rec.channels, more):
                hop.extend(chans)
            rec.width += extra
    return out
