"""Seeded multi-trial experiments, aggregation and CSV output.

A trial is one ``(seed, sweep value)`` pair.  Every algorithm in a trial
sees the same requests on the same topology and draws link generation from
the same substreams, so algorithm comparisons are paired.  Trials are
independent and may run in worker processes; rows are always emitted in
``(algorithm, sweep value, seed, bin)`` order.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

from .rng import RandomStream
from .slot import ALGORITHMS, Simulator
from .topology import NetworkGraph, calibrate_alpha, generate_waxman, sample_requests

DISTANCE_BIN_KM = 10.0
HOPS = "hops"
DISTANCE_KM = "distance_km"

DEFAULT_ALGORITHMS = ("QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS", "QGUARD_FP")


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


@dataclass(frozen=True)
class ExperimentConfig:
    nodes: int = 100
    avg_degree: float = 6.0
    area_km: float = 100.0
    target_p: float = 0.7
    q: float = 0.9
    k: int = 3
    m: int = 10
    f_th: float = 0.75
    eta_mean: float = 9.5
    eta_sigma: float = 1.0
    gen_noise_sigma: float = 0.01
    r_max: int = 3
    memory_range: tuple[int, int] = (20, 31)
    channel_range: tuple[int, int] = (6, 12)
    slots: int = 1000
    seeds: tuple[int, ...] = (0,)
    algorithms: tuple[str, ...] = DEFAULT_ALGORITHMS
    sweep: dict | None = None
    waxman_gamma: float = 0.05
    recovery_rounds: int = 2
    e2e_stochastic: bool = True
    range_mode: str | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("memory_range", "channel_range", "seeds", "algorithms"):
            value = getattr(self, name)
            if isinstance(value, (list, tuple)):
                object.__setattr__(self, name, tuple(value))
        self.validate()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for name in ("memory_range", "channel_range", "seeds", "algorithms"):
            out[name] = list(out[name])
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # validation ------------------------------------------------------------

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        def is_int(x):
            return isinstance(x, int) and not isinstance(x, bool)

        def is_num(x):
            return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)

        need(is_int(self.nodes) and self.nodes >= 2, "nodes must be an integer >= 2")
        need(is_num(self.avg_degree) and self.avg_degree > 0, "avg_degree must be positive")
        need(is_num(self.area_km) and self.area_km > 0, "area_km must be positive")
        for name in ("target_p", "q"):
            v = getattr(self, name)
            need(is_num(v) and 0 < v <= 1, f"{name} must be in (0, 1]")
        need(is_num(self.f_th) and 0.25 <= self.f_th <= 1, "f_th must be in [0.25, 1]")
        need(is_int(self.k) and self.k >= 1, "k must be an integer >= 1")
        need(is_int(self.m) and self.m >= 1, "m must be an integer >= 1")
        need(is_num(self.eta_mean) and self.eta_mean > 0, "eta_mean must be positive")
        need(is_num(self.eta_sigma) and self.eta_sigma >= 0, "eta_sigma must be >= 0")
        need(is_num(self.gen_noise_sigma) and self.gen_noise_sigma >= 0, "gen_noise_sigma must be >= 0")
        need(is_int(self.r_max) and self.r_max >= 1, "r_max must be an integer >= 1")
        for name in ("memory_range", "channel_range"):
            lo_hi = getattr(self, name)
            need(
                len(lo_hi) == 2 and all(is_int(x) for x in lo_hi) and 1 <= lo_hi[0] <= lo_hi[1],
                f"{name} must be [lo, hi] integers with 1 <= lo <= hi",
            )
        need(is_int(self.slots) and self.slots >= 0, "slots must be an integer >= 0")
        need(len(self.seeds) > 0 and all(is_int(s) and s >= 0 for s in self.seeds), "seeds must be non-negative integers")
        need(len(set(self.seeds)) == len(self.seeds), "seeds must be distinct")
        need(len(self.algorithms) > 0, "algorithms must not be empty")
        for a in self.algorithms:
            need(a in ALGORITHMS, f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        need(len(set(self.algorithms)) == len(self.algorithms), "algorithms must be distinct")
        need(is_num(self.waxman_gamma) and self.waxman_gamma > 0, "waxman_gamma must be positive")
        need(is_int(self.recovery_rounds) and self.recovery_rounds >= 0, "recovery_rounds must be >= 0")
        need(isinstance(self.e2e_stochastic, bool), "e2e_stochastic must be true or false")
        need(self.range_mode in (None, HOPS, DISTANCE_KM), f"range_mode must be null, {HOPS!r} or {DISTANCE_KM!r}")
        need(self.range_mode is None or self.m == 1, "range studies need m = 1")
        need(is_int(self.workers) and self.workers >= 1, "workers must be an integer >= 1")
        if self.sweep is not None:
            need(
                isinstance(self.sweep, dict) and set(self.sweep) == {"name", "values"},
                "sweep must be an object with 'name' and 'values'",
            )
            name, values = self.sweep["name"], self.sweep["values"]
            sweepable = {f.name for f in dataclasses.fields(self)} - {"sweep", "seeds", "algorithms", "workers", "slots"}
            need(name in sweepable, f"cannot sweep {name!r}")
            need(isinstance(values, list) and len(values) > 0, "sweep values must be a non-empty list")
            for v in values:
                try:
                    dataclasses.replace(self, sweep=None, **{name: v})
                except ConfigError as exc:
                    raise ConfigError(f"sweep {name}={v!r}: {exc}") from None

    # sweep -----------------------------------------------------------------

    def sweep_points(self) -> list[tuple[Any, "ExperimentConfig"]]:
        """``(value, config)`` per sweep value; ``[(None, self)]`` without a sweep."""
        if self.sweep is None:
            return [(None, self)]
        name = self.sweep["name"]
        return [(v, dataclasses.replace(self, sweep=None, **{name: v})) for v in self.sweep["values"]]


@dataclass(frozen=True)
class AggregateRow:
    algorithm: str
    sweep_param: str
    sweep_value: Any
    seed: int
    slots: int
    qualified_eps: float
    raw_eps: float
    qualified_sd_pairs: float
    bin_kind: str = ""
    bin: Any = ""
    success_fraction: Any = ""


CSV_HEADER = [f.name for f in dataclasses.fields(AggregateRow)]


# topology ------------------------------------------------------------------


def build_topology(cfg: ExperimentConfig, seed: int) -> NetworkGraph:
    """The seeded topology for ``cfg``, with ``alpha`` calibrated to ``target_p``."""
    g = generate_waxman(
        cfg.nodes,
        cfg.avg_degree,
        cfg.area_km,
        RandomStream(seed).topology(),
        hw=(cfg.eta_mean, cfg.eta_sigma),
        memory_range=cfg.memory_range,
        channel_range=cfg.channel_range,
        gamma=cfg.waxman_gamma,
    )
    calibrate_alpha(g, cfg.target_p)
    return g


def simulator_for(cfg: ExperimentConfig, graph: NetworkGraph) -> Simulator:
    return Simulator(
        graph,
        q=cfg.q,
        k=cfg.k,
        r_max=cfg.r_max,
        noise_sigma=cfg.gen_noise_sigma,
        e2e_stochastic=cfg.e2e_stochastic,
        recovery_rounds=cfg.recovery_rounds,
    )


# trials --------------------------------------------------------------------


def _distance_bin(d: float) -> float:
    return math.floor(d / DISTANCE_BIN_KM) * DISTANCE_BIN_KM


def _run_trial(cfg: ExperimentConfig, seed: int, sweep_value, with_trace: bool):
    """All slots of one trial.  Returns per-algorithm sums and trace records."""
    graph = build_topology(cfg, seed)
    sim = simulator_for(cfg, graph)
    streams = RandomStream(seed)
    hop_dist = graph.hop_distances() if cfg.range_mode else None
    algos = [ALGORITHMS[a] for a in cfg.algorithms]

    # (algorithm, bin) -> [slots, raw, qualified, served pairs, successes]
    sums: dict[tuple[str, Any], list[float]] = defaultdict(lambda: [0, 0, 0, 0, 0])
    trace: list[dict] = []
    for t in range(cfg.slots):
        requests = sample_requests(graph, cfg.m, cfg.f_th, streams.requests(t))
        if cfg.range_mode == HOPS:
            r = requests[0]
            b = int(hop_dist[r.source, r.destination])
        elif cfg.range_mode == DISTANCE_KM:
            r = requests[0]
            b = _distance_bin(graph.euclidean(r.source, r.destination))
        else:
            b = ""
        shared: dict = {}
        for algo in algos:
            metrics = sim.run_slot(requests, algo, streams.slot(t), shared)
            acc = sums[(algo.name, b)]
            acc[0] += 1
            acc[1] += metrics.total_raw
            acc[2] += metrics.total_qualified
            acc[3] += metrics.served_pairs
            acc[4] += int(metrics.served_pairs > 0)
            if with_trace:
                rec = {
                    "algorithm": algo.name,
                    "sweep_value": sweep_value,
                    "seed": seed,
                    "slot": t,
                    "bin": b,
                    "raw": metrics.total_raw,
                    "qualified": metrics.total_qualified,
                    "served_pairs": metrics.served_pairs,
                }
                rec.update(metrics.trace)
                trace.append(rec)
    return dict(sums), trace


def _trial_job(args):
    return _run_trial(*args)


def _rows_for(cfg: ExperimentConfig, sweep_value, seed: int, sums: dict) -> list[AggregateRow]:
    param = cfg.sweep["name"] if cfg.sweep else ""
    rows = []
    for (alg, b), (n, raw, qual, served, succ) in sums.items():
        rows.append(
            AggregateRow(
                algorithm=alg,
                sweep_param=param,
                sweep_value="" if sweep_value is None else sweep_value,
                seed=seed,
                slots=n,
                qualified_eps=qual / n,
                raw_eps=raw / n,
                qualified_sd_pairs=served / n,
                bin_kind=cfg.range_mode or "",
                bin=b,
                success_fraction=succ / n if cfg.range_mode else "",
            )
        )
    return rows


def run_experiment(cfg: ExperimentConfig, *, trace: list | None = None) -> list[AggregateRow]:
    """Run every ``(algorithm, sweep value, seed)`` combination of ``cfg``.

    Per-slot records are appended to ``trace`` when a list is given.  With
    ``slots = 0`` no rows are produced.
    """
    if cfg.slots == 0:
        return []
    jobs = [(pcfg, seed, value, trace is not None) for value, pcfg in cfg.sweep_points() for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]

    alg_index = {a: i for i, a in enumerate(cfg.algorithms)}
    keyed = []
    for ji, ((_, seed, value, _), (sums, recs)) in enumerate(zip(jobs, results)):
        for row in _rows_for(cfg, value, seed, sums):
            keyed.append(((alg_index[row.algorithm], ji, 0 if row.bin == "" else row.bin), row))
        if trace is not None:
            trace.extend(recs)
    return [row for _, row in sorted(keyed, key=lambda kr: kr[0])]


def run_range_study(cfg: ExperimentConfig, mode: str = HOPS, *, trace: list | None = None) -> list[AggregateRow]:
    """Success fraction of a single random pair per slot, binned by hops or distance.

    Hop bins use the pair's shortest-path hop count; distance bins are
    10 km wide and labelled by their lower edge.
    """
    if mode not in (HOPS, DISTANCE_KM):
        raise ConfigError(f"mode must be {HOPS!r} or {DISTANCE_KM!r}")
    if cfg.m != 1:
        raise ConfigError("range studies need m = 1")
    return run_experiment(cfg.replace(range_mode=mode), trace=trace)


# presets ---------------------------------------------------------------------

EXPERIMENTS = {
    "threshold": dict(
        sweep={"name": "f_th", "values": [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]},
        algorithms=["QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS"],
    ),
    "heterogeneity": dict(
        sweep={"name": "eta_sigma", "values": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]},
        algorithms=["QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS"],
    ),
    "load": dict(
        sweep={"name": "m", "values": list(range(1, 11))},
        algorithms=["QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS"],
    ),
    "range-hops": dict(m=1, range_mode=HOPS, algorithms=["QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS"]),
    "range-distance": dict(m=1, range_mode=DISTANCE_KM, algorithms=["QCAST", "QCAST_PUR", "QGUARD", "QGUARD_WS"]),
    "fp-compare": dict(m=1, range_mode=HOPS, algorithms=["QGUARD", "QGUARD_FP"]),
}


def preset(name: str, base: dict | None = None) -> ExperimentConfig:
    """Config for a named experiment.

    The preset fixes the sweep (or range mode and ``m = 1``) and supplies a
    default algorithm list; every other field comes from ``base``, which
    may also override the algorithm list.
    """
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    data = dict(base or {})
    fixed = EXPERIMENTS[name]
    for key, value in fixed.items():
        if key == "algorithms" and "algorithms" in data:
            continue
        data[key] = value
    return ExperimentConfig.from_dict(data)


# output ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def rows_to_csv(rows: Sequence[AggregateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def write_csv(rows: Sequence[AggregateRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def write_trace(records: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
