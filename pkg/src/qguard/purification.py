"""BBPSSW purification on Werner pairs.

Planning uses the deterministic symmetric recurrence (round counts, cost
tables); execution in the slot engine samples the success of each step.
Round counts that cannot reach a target within ``r_max`` are reported as
``None`` (infeasible) rather than raised.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .views import LinkStateView
from .werner import clamp_fidelity

END_TO_END = -1
DEFAULT_R_MAX = 3


class BellPair(NamedTuple):
    """A realized pair; ``hop`` is a link id or :data:`END_TO_END`."""

    fidelity: float
    hop: int = END_TO_END


class PurificationOutcome(NamedTuple):
    output_fidelity: float
    success_prob: float


def bbpssw_symmetric_step(f: float) -> PurificationOutcome:
    g = 1.0 - f
    num = f * f + g * g / 9.0
    den = f * f + 2.0 / 3.0 * f * g + 5.0 / 9.0 * g * g
    return PurificationOutcome(clamp_fidelity(num / den), den)


def bbpssw_asymmetric_step(fa: float, fb: float) -> PurificationOutcome:
    """BBPSSW with two Werner inputs of different fidelity.

    Reduces to :func:`bbpssw_symmetric_step` when ``fa == fb``.
    """
    ga, gb = 1.0 - fa, 1.0 - fb
    num = fa * fb + ga * gb / 9.0
    den = fa * fb + (fa * gb + fb * ga) / 3.0 + 5.0 / 9.0 * ga * gb
    return PurificationOutcome(clamp_fidelity(num / den), den)


def purification_cost(f0: float, target: float, r_max: int = DEFAULT_R_MAX) -> int | None:
    """Fewest symmetric rounds taking ``f0`` to ``target``; ``None`` past ``r_max``."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    f, r = f0, 0
    while f < target:
        if r == r_max:
            return None
        f = bbpssw_symmetric_step(f).output_fidelity
        r += 1
    return r


def iterate_rounds(f0: float, r_max: int) -> list[float]:
    """``[F^(0), F^(1), ..., F^(r_max)]`` under the symmetric recurrence."""
    out = [f0]
    for _ in range(r_max):
        out.append(bbpssw_symmetric_step(out[-1]).output_fidelity)
    return out


@dataclass(frozen=True)
class CostTableEntry:
    link: int
    initial_fidelity: float | None
    target: float
    rounds: int | None
    available: int

    @property
    def raw_pairs_per_output(self) -> int | None:
        return None if self.rounds is None else 2 ** self.rounds

    @property
    def meets_target(self) -> bool:
        """Enough realized pairs exist to run the planned rounds once."""
        return self.rounds is not None and self.available >= 2 ** self.rounds


def build_cost_table(
    view: LinkStateView, targets: Mapping[int, float], r_max: int = DEFAULT_R_MAX
) -> list[CostTableEntry]:
    """Purification cost per targeted link, seeded from the best realized pair."""
    table = []
    for link, target in targets.items():
        fids = view.fidelities(link)
        if not fids:
            table.append(CostTableEntry(link, None, target, None, 0))
            continue
        best = max(fids)
        table.append(CostTableEntry(link, best, target, purification_cost(best, target, r_max), len(fids)))
    return table


def _attempt(rng, prob: float) -> bool:
    return rng.random() < prob


def pump_to_target(pool: Sequence[BellPair], target: float, rng) -> tuple[list[BellPair], list[BellPair]]:
    """Purify a hop's pairs toward ``target``.

    Pairs already at target are set aside untouched.  Below-target pairs are
    combined two at a time, best first; a success leaves one pair at the
    output fidelity, a failure loses both.  Returns ``(outputs, leftovers)``,
    where leftovers are below-target survivors.
    """
    outputs = [p for p in pool if p.fidelity >= target]
    work = sorted((p for p in pool if p.fidelity < target), key=lambda p: p.fidelity, reverse=True)
    while len(work) >= 2:
        a, b = work[0], work[1]
        del work[:2]
        res = bbpssw_asymmetric_step(a.fidelity, b.fidelity)
        if not _attempt(rng, res.success_prob):
            continue
        new = BellPair(res.output_fidelity, a.hop)
        if new.fidelity >= target:
            outputs.append(new)
        else:
            work.append(new)
            work.sort(key=lambda p: p.fidelity, reverse=True)
    outputs.sort(key=lambda p: p.fidelity, reverse=True)
    return outputs, work


def final_e2e_purification(
    pairs: Sequence[BellPair], f_th: float, rng, stochastic: bool = True
) -> list[BellPair]:
    """Combine the two lowest unqualified end-to-end pairs until none can be.

    Qualified pairs are never consumed.  With ``stochastic=False`` every
    attempt succeeds.
    """
    qualified = [p for p in pairs if p.fidelity >= f_th]
    work = sorted((p for p in pairs if p.fidelity < f_th), key=lambda p: p.fidelity)
    while len(work) >= 2:
        a, b = work[0], work[1]
        del work[:2]
        res = bbpssw_asymmetric_step(a.fidelity, b.fidelity)
        if stochastic and not _attempt(rng, res.success_prob):
            continue
        new = BellPair(res.output_fidelity, a.hop)
        if new.fidelity >= f_th:
            qualified.append(new)
        else:
            work.append(new)
            work.sort(key=lambda p: p.fidelity)
    return qualified + work
