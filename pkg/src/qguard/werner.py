"""Werner-parameter algebra.

Every bipartite state in the simulator is a Werner state described by a
single fidelity ``F`` in [0.25, 1].  The Werner parameter ``w = (4F - 1)/3``
multiplies under entanglement swapping, which makes fidelity budgeting a
matter of splitting a product.
"""
from __future__ import annotations

from typing import Iterable

F_MIN = 0.25
F_MAX = 1.0


def clamp_fidelity(f: float) -> float:
    """Clip a fidelity into the Werner range [0.25, 1]."""
    if f < F_MIN:
        return F_MIN
    if f > F_MAX:
        return F_MAX
    return float(f)


def fidelity_to_werner(f: float) -> float:
    if not F_MIN <= f <= F_MAX:
        raise ValueError(f"fidelity {f!r} outside [0.25, 1]")
    return (4.0 * f - 1.0) / 3.0


def werner_to_fidelity(w: float) -> float:
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"Werner parameter {w!r} outside [0, 1]")
    return (1.0 + 3.0 * w) / 4.0


def end_to_end_fidelity(hops: Iterable[float]) -> float:
    """Fidelity after swapping a chain of hop pairs together.

    The Werner parameters of the hops multiply, so the result does not depend
    on the order in which the swaps happen.
    """
    hops = list(hops)
    if not hops:
        raise ValueError("end_to_end_fidelity needs at least one hop")
    w = 1.0
    for f in hops:
        w *= fidelity_to_werner(f)
    return werner_to_fidelity(w)


def equal_split_target(f_th: float, n_hops: int) -> float:
    """Per-hop fidelity target when an ``n_hops`` path shares ``f_th`` evenly."""
    if n_hops < 1:
        raise ValueError("path length must be at least one hop")
    return werner_to_fidelity(fidelity_to_werner(f_th) ** (1.0 / n_hops))


def segment_budget(w_th: float, seg_hops: int, n_hops: int) -> float:
    """Werner budget inherited by ``seg_hops`` of an ``n_hops`` path."""
    if n_hops < 1 or not 0 <= seg_hops <= n_hops:
        raise ValueError(f"bad segment {seg_hops} of {n_hops} hops")
    return w_th ** (seg_hops / n_hops)


def detour_targets(w_seg: float, detour_hops: int) -> float:
    """Per-hop fidelity target for a detour splitting ``w_seg`` uniformly."""
    if detour_hops < 1:
        raise ValueError("detour must have at least one hop")
    return werner_to_fidelity(w_seg ** (1.0 / detour_hops))

