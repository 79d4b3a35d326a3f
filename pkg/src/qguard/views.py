"""k-hop link-state views.

After generation each node learns the realized pairs of every link whose
nearer endpoint is at most ``k`` hops away.  Planning code reads link data
only through a :class:`LinkStateView`, so a decision that touches a link
outside the owner's neighbourhood fails loudly instead of silently using
global knowledge.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np


class LocalityError(LookupError):
    """A planning step asked for a link outside the owner's k-hop view."""


class LinkStateView:
    """Realized pair fidelities of the links visible from ``owner``.

    ``outcomes`` maps a key to the fidelities realized this slot (possibly
    empty).  A key is a link id or a ``(reservation, link id)`` pair;
    ``visible`` is a set of link ids restricting which keys may be read.
    Passing ``visible=None`` gives an unrestricted (global) view.
    """

    __slots__ = ("owner", "k", "_outcomes", "_visible")

    def __init__(
        self,
        owner: int,
        k: int,
        outcomes: Mapping[int, Sequence[float]],
        visible: frozenset[int] | None = None,
    ):
        self.owner = owner
        self.k = k
        self._outcomes = outcomes
        self._visible = visible

    def __contains__(self, key) -> bool:
        link = key[1] if isinstance(key, tuple) else key
        return self._visible is None or link in self._visible

    def fidelities(self, key) -> Sequence[float]:
        if key not in self:
            raise LocalityError(f"link {key} not visible from node {self.owner} (k={self.k})")
        return self._outcomes.get(key, ())

    def count(self, key) -> int:
        return len(self.fidelities(key))

    def best(self, key) -> float | None:
        fids = self.fidelities(key)
        return max(fids) if fids else None

    def keys(self) -> list:
        """Visible outcome keys."""
        return sorted(k for k in self._outcomes if k in self)


def visible_links(hop_dist: np.ndarray, endpoints: Sequence[tuple[int, int]], owner: int, k: int) -> frozenset[int]:
    """Links ``(u, v)`` with ``min(dist(owner, u), dist(owner, v)) <= k``."""
    row = hop_dist[owner]
    return frozenset(
        lid for lid, (u, v) in enumerate(endpoints) if min(row[u], row[v]) <= k
    )


def build_k_hop_views(graph, outcomes: Mapping[int, Sequence[float]], k: int) -> dict[int, LinkStateView]:
    """One view per node of ``graph`` over the slot's realized ``outcomes``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    dist = graph.hop_distances()
    ends = [(l.u, l.v) for l in graph.links]
    return {
        n.id: LinkStateView(n.id, k, outcomes, visible_links(dist, ends, n.id, k))
        for n in graph.nodes
    }
