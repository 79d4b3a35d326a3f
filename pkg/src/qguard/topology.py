"""Network topology: Waxman generation, link physics, requests, JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .werner import clamp_fidelity, fidelity_to_werner

ETA_FLOOR = 0.5


def initial_fidelity_mean(eta: float) -> float:
    """Mean fidelity of a fresh pair on a link with hardware quality ``eta``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return 0.25 + 0.75 * math.exp(-1.0 / eta)


@dataclass
class Node:
    id: int
    x_km: float
    y_km: float
    memory: int


@dataclass
class Link:
    u: int
    v: int
    length_km: float
    channels: int
    eta: float
    p_gen: float = 1.0
    f0_mean: float = field(init=False)

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError(f"self-loop on node {self.u}")
        if self.u > self.v:
            self.u, self.v = self.v, self.u
        self.f0_mean = clamp_fidelity(initial_fidelity_mean(self.eta))

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u


@dataclass(frozen=True)
class Request:
    source: int
    destination: int
    f_th: float

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("request source and destination must differ")
        fidelity_to_werner(self.f_th)

    @property
    def w_th(self) -> float:
        return fidelity_to_werner(self.f_th)


class NetworkGraph:
    """Undirected topology with per-link physics and per-node memory.

    Link ids are positions in :attr:`links`.  ``p_gen`` on every link is kept
    consistent with :attr:`alpha`; assign ``alpha`` to re-derive it.
    """

    def __init__(self, nodes: list[Node], links: list[Link], alpha: float = 0.0):
        self.nodes = nodes
        self.links = links
        self._index = {}
        for lid, l in enumerate(links):
            if (l.u, l.v) in self._index:
                raise ValueError(f"duplicate link {l.u}-{l.v}")
            self._index[(l.u, l.v)] = lid
        adj: list[list[tuple[int, int]]] = [[] for _ in nodes]
        for lid, l in enumerate(links):
            adj[l.u].append((l.v, lid))
            adj[l.v].append((l.u, lid))
        self.adjacency = [sorted(a) for a in adj]
        self.alpha = alpha

    @property
    def alpha(self) -> float:
        return self._alpha

    @alpha.setter
    def alpha(self, value: float):
        if value < 0:
            raise ValueError("alpha must be non-negative")
        self._alpha = float(value)
        for l in self.links:
            l.p_gen = math.exp(-self._alpha * l.length_km)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def link_id(self, a: int, b: int) -> int:
        return self._index[(a, b) if a < b else (b, a)]

    def path_links(self, path_nodes) -> tuple[int, ...]:
        return tuple(self.link_id(a, b) for a, b in zip(path_nodes, path_nodes[1:]))

    def average_degree(self) -> float:
        return 2.0 * len(self.links) / self.n

    def _csr(self) -> csr_matrix:
        rows = [l.u for l in self.links] + [l.v for l in self.links]
        cols = [l.v for l in self.links] + [l.u for l in self.links]
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))

    def is_connected(self) -> bool:
        return connected_components(self._csr(), directed=False)[0] == 1

    @cached_property
    def _hop_dist(self) -> np.ndarray:
        d = shortest_path(self._csr(), directed=False, unweighted=True)
        d[np.isinf(d)] = np.iinfo(np.int32).max
        return d.astype(np.int64)

    def hop_distances(self) -> np.ndarray:
        """All-pairs shortest-path hop counts (large sentinel if unreachable)."""
        return self._hop_dist

    def euclidean(self, a: int, b: int) -> float:
        na, nb = self.nodes[a], self.nodes[b]
        return math.hypot(na.x_km - nb.x_km, na.y_km - nb.y_km)

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "nodes": [{"id": n.id, "x_km": n.x_km, "y_km": n.y_km, "memory": n.memory} for n in self.nodes],
            "links": [
                {"u": l.u, "v": l.v, "length_km": l.length_km, "channels": l.channels, "eta": l.eta}
                for l in self.links
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkGraph":
        nodes = sorted(
            (Node(int(d["id"]), float(d["x_km"]), float(d["y_km"]), int(d["memory"])) for d in doc["nodes"]),
            key=lambda n: n.id,
        )
        if [n.id for n in nodes] != list(range(len(nodes))):
            raise ValueError("node ids must be 0..n-1")
        links = [
            Link(int(d["u"]), int(d["v"]), float(d["length_km"]), int(d["channels"]), float(d["eta"]))
            for d in doc["links"]
        ]
        return cls(nodes, links, float(doc["alpha"]))

    def __eq__(self, other):
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def write_topology(g: NetworkGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=1))


def read_topology(path) -> NetworkGraph:
    return NetworkGraph.from_dict(json.loads(Path(path).read_text()))


# generation ----------------------------------------------------------


def _degree_for(beta: float, u: np.ndarray, shape: np.ndarray, n: int) -> float:
    return 2.0 * np.count_nonzero(u < np.minimum(1.0, beta * shape)) / n


def _tune_beta(u: np.ndarray, shape: np.ndarray, n: int, target: float) -> float:
    lo, hi = 0.0, 1.0
    while _degree_for(hi, u, shape, n) < target and hi < 1e9:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _degree_for(mid, u, shape, n) < target:
            lo = mid
        else:
            hi = mid
    d_lo = abs(_degree_for(lo, u, shape, n) - target)
    d_hi = abs(_degree_for(hi, u, shape, n) - target)
    return lo if d_lo < d_hi else hi


def _repair_connectivity(n: int, edges: set, pos: np.ndarray, dist: np.ndarray) -> None:
    """Join components by repeatedly adding the shortest inter-component edge."""
    while True:
        rows = [a for a, b in edges] + [b for a, b in edges]
        cols = [b for a, b in edges] + [a for a, b in edges]
        m = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        ncomp, label = connected_components(m, directed=False)
        if ncomp == 1:
            return
        cross = label[:, None] != label[None, :]
        masked = np.where(cross, dist, np.inf)
        a, b = np.unravel_index(np.argmin(masked), masked.shape)
        edges.add((min(a, b), max(a, b)))


def generate_waxman(
    n: int,
    avg_degree: float,
    area_km: float,
    rng: np.random.Generator,
    hw: tuple[float, float] = (9.5, 1.0),
    memory_range: tuple[int, int] = (20, 31),
    channel_range: tuple[int, int] = (6, 12),
    gamma: float = 0.05,
    max_retries: int = 20,
    degree_tol: float = 0.5,
) -> NetworkGraph:
    """Random connected Waxman topology on an ``area_km`` square.

    Pair ``(u, v)`` is linked with probability ``beta * exp(-d / (gamma * diag))``;
    ``beta`` is bisected so the average degree lands within ``degree_tol`` of
    ``avg_degree`` (capped at ``n - 1``).  Structural draws come first and the
    hardware-quality draws last, so graphs built from equal seeds share their
    wiring even when ``hw`` differs.  ``alpha`` is left at 0; see
    :func:`calibrate_alpha`.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    target = min(avg_degree, n - 1)
    scale = gamma * area_km * math.sqrt(2.0)
    iu, ju = np.triu_indices(n, k=1)

    for _attempt in range(max_retries):
        pos = rng.uniform(0.0, area_km, size=(n, 2))
        dist = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
        u = rng.random(iu.size)
        shape = np.exp(-dist[iu, ju] / scale)
        beta = _tune_beta(u, shape, n, target)
        keep = u < np.minimum(1.0, beta * shape)
        edges = {(int(a), int(b)) for a, b in zip(iu[keep], ju[keep])}
        probe = NetworkGraph(
            [Node(i, 0.0, 0.0, 1) for i in range(n)], [Link(a, b, 1.0, 1, 1.0) for a, b in sorted(edges)]
        )
        if edges and probe.is_connected():
            break
    else:
        _repair_connectivity(n, edges, pos, dist)

    if abs(2.0 * len(edges) / n - target) > degree_tol:
        raise RuntimeError(
            f"Waxman generation missed average degree {avg_degree} (got {2.0 * len(edges) / n:.2f}) "
            f"for n={n}, area_km={area_km}, gamma={gamma} after {max_retries} retries"
        )

    ordered = sorted(edges)
    memory = rng.integers(memory_range[0], memory_range[1] + 1, size=n)
    channels = rng.integers(channel_range[0], channel_range[1] + 1, size=len(ordered))
    etas = _truncated_normal(rng, hw[0], hw[1], len(ordered))

    nodes = [Node(i, float(pos[i, 0]), float(pos[i, 1]), int(memory[i])) for i in range(n)]
    links = [
        Link(a, b, float(dist[a, b]), int(c), float(e))
        for (a, b), c, e in zip(ordered, channels, etas)
    ]
    return NetworkGraph(nodes, links)


def _truncated_normal(rng: np.random.Generator, mean: float, sigma: float, size: int) -> np.ndarray:
    """Normal draws resampled until every value is at least :data:`ETA_FLOOR`."""
    out = rng.normal(mean, sigma, size=size) if sigma > 0 else np.full(size, float(mean))
    bad = out < ETA_FLOOR
    while bad.any():
        out[bad] = rng.normal(mean, sigma, size=int(bad.sum()))
        bad = out < ETA_FLOOR
    return out


def calibrate_alpha(g: NetworkGraph, target_p: float, tol: float = 1e-9) -> float:
    """Set ``g.alpha`` so the mean link success probability equals ``target_p``."""
    if not 0.0 < target_p <= 1.0:
        raise ValueError("target_p must be in (0, 1]")
    lengths = np.array([l.length_km for l in g.links])
    if target_p == 1.0 or lengths.size == 0:
        g.alpha = 0.0
        return 0.0
    mean_p = lambda a: float(np.mean(np.exp(-a * lengths)))
    lo, hi = 0.0, 1.0
    while mean_p(hi) > target_p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_p(mid) > target_p:
            lo = mid
        else:
            hi = mid
        if abs(mean_p(mid) - target_p) <= tol:
            break
    g.alpha = mid
    return mid


def sample_requests(g: NetworkGraph, m: int, f_th: float, rng: np.random.Generator) -> list[Request]:
    """``m`` distinct unordered node pairs, uniformly without replacement."""
    n = g.n
    total = n * (n - 1) // 2
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > total:
        raise ValueError(f"cannot draw {m} distinct pairs from {n} nodes")
    iu, ju = np.triu_indices(n, k=1)
    picks = rng.choice(total, size=m, replace=False)
    return [Request(int(iu[i]), int(ju[i]), f_th) for i in picks]
