import csv
import io
import json
import subprocess
import sys
from collections import defaultdict
from pathlib import Path

import pytest

from qguard.cli import main
from qguard.experiment import (
    CSV_HEADER,
    DISTANCE_KM,
    HOPS,
    ConfigError,
    ExperimentConfig,
    build_topology,
    preset,
    rows_to_csv,
    run_experiment,
    run_range_study,
    write_trace,
)
from qguard.topology import read_topology

DATA = Path(__file__).parent / "data"
TINY = DATA / "tiny.json"


def tiny(**kw):
    return ExperimentConfig.from_json(TINY).replace(**kw)


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


# configuration ----------------------------------------------------------------------


def test_defaults_are_the_reference_settings():
    cfg = ExperimentConfig()
    assert (cfg.nodes, cfg.avg_degree, cfg.area_km) == (100, 6.0, 100.0)
    assert (cfg.target_p, cfg.q, cfg.k, cfg.m, cfg.f_th) == (0.7, 0.9, 3, 10, 0.75)
    assert (cfg.eta_mean, cfg.eta_sigma, cfg.gen_noise_sigma, cfg.r_max) == (9.5, 1.0, 0.01, 3)
    assert cfg.memory_range == (20, 31) and cfg.channel_range == (6, 12)
    assert cfg.slots == 1000


@pytest.mark.parametrize(
    "change",
    [
        {"q": 0.0},
        {"q": 1.5},
        {"target_p": -0.1},
        {"nodes": 1},
        {"m": 0},
        {"k": 0},
        {"r_max": 0},
        {"memory_range": [5, 2]},
        {"channel_range": [3]},
        {"slots": -1},
        {"seeds": []},
        {"seeds": [1, 1]},
        {"algorithms": ["QCAST", "DIJKSTRA"]},
        {"sweep": {"name": "f_th"}},
        {"sweep": {"name": "seeds", "values": [1]}},
        {"sweep": {"name": "q", "values": [0.5, 2.0]}},
        {"range_mode": "hops", "m": 2},
        {"f_th": True},
        {"colour": "blue"},
    ],
)
def test_invalid_configs_are_rejected(change):
    data = json.loads(TINY.read_text()) | change
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_round_trips_through_dict():
    cfg = tiny()
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert json.loads(json.dumps(cfg.to_dict()))["seeds"] == [0, 1]


def test_presets():
    thr = preset("threshold", {"slots": 1})
    assert thr.sweep["name"] == "f_th" and thr.sweep["values"][0] == 0.6 and thr.sweep["values"][-1] == 0.95
    assert preset("load").sweep["values"] == list(range(1, 11))
    rng = preset("range-distance", {"m": 10})
    assert rng.m == 1 and rng.range_mode == DISTANCE_KM
    assert preset("fp-compare").algorithms == ("QGUARD", "QGUARD_FP")
    assert preset("fp-compare", {"algorithms": ["QCAST"]}).algorithms == ("QCAST",)
    with pytest.raises(ConfigError):
        preset("nonsense")


# runs -------------------------------------------------------------------------------------


def test_zero_slots_give_header_only():
    assert run_experiment(tiny(slots=0)) == []
    assert rows_to_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_golden_tiny_csv():
    assert rows_to_csv(run_experiment(tiny())) == (DATA / "golden_tiny.csv").read_text()


def test_row_order_and_layout():
    cfg = tiny()
    rows = run_experiment(cfg)
    keys = [(r.algorithm, r.sweep_value, r.seed) for r in rows]
    expected = [(a, v, s) for a in cfg.algorithms for v in (0.7, 0.85) for s in (0, 1)]
    assert keys == expected
    assert all(r.qualified_eps <= r.raw_eps and r.slots == 5 for r in rows)
    assert all(0 <= r.qualified_sd_pairs <= cfg.m for r in rows)


def test_workers_do_not_change_results():
    assert rows_to_csv(run_experiment(tiny(workers=2))) == rows_to_csv(run_experiment(tiny()))


def test_aggregates_equal_trace_means(tmp_path):
    trace = []
    rows = run_experiment(tiny(), trace=trace)
    path = tmp_path / "trace.jsonl"
    write_trace(trace, path)
    groups = defaultdict(list)
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        groups[(rec["algorithm"], rec["sweep_value"], rec["seed"])].append(rec)
    assert len(groups) == len(rows)
    for r in rows:
        recs = groups[(r.algorithm, r.sweep_value, r.seed)]
        assert len(recs) == r.slots
        assert sorted(x["slot"] for x in recs) == list(range(r.slots))
        assert r.qualified_eps == pytest.approx(sum(x["qualified"] for x in recs) / len(recs), abs=1e-12)
        assert r.raw_eps == pytest.approx(sum(x["raw"] for x in recs) / len(recs), abs=1e-12)
        assert r.qualified_sd_pairs == pytest.approx(sum(x["served_pairs"] for x in recs) / len(recs), abs=1e-12)
        assert all(x["qualified"] <= x["raw"] for x in recs)


def perfect_pair(**kw):
    return ExperimentConfig(
        nodes=2, avg_degree=1, target_p=1.0, q=1.0, eta_mean=1e6, eta_sigma=0.0,
        gen_noise_sigma=0.0, m=1, slots=4, seeds=(0, 1), **kw,
    )


def test_perfect_single_hop_always_succeeds():
    rows = run_range_study(perfect_pair(), HOPS)
    assert {r.bin for r in rows} == {1}
    assert all(r.success_fraction == 1.0 and r.bin_kind == HOPS for r in rows)


def test_range_bins():
    cfg = tiny(m=1, sweep=None, slots=20, seeds=(0,), algorithms=("QCAST", "QGUARD"))
    rows = run_range_study(cfg, HOPS)
    assert sum(r.slots for r in rows if r.algorithm == "QCAST") == 20
    assert all(isinstance(r.bin, int) and r.bin >= 1 for r in rows)
    assert [r.bin for r in rows if r.algorithm == "QCAST"] == sorted(r.bin for r in rows if r.algorithm == "QCAST")
    by_dist = run_range_study(cfg, DISTANCE_KM)
    assert all(r.bin % 10 == 0 for r in by_dist)
    assert sum(r.slots for r in by_dist if r.algorithm == "QGUARD") == 20
    with pytest.raises(ConfigError):
        run_range_study(tiny(), HOPS)
    with pytest.raises(ConfigError):
        run_range_study(cfg, "furlongs")


# command line --------------------------------------------------------------------------------


def test_cli_simulate_matches_library(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    trace = tmp_path / "trace.jsonl"
    assert main(["simulate", "--config", str(TINY), "--out", str(out), "--trace", str(trace)]) == 0
    assert out.read_text() == (DATA / "golden_tiny.csv").read_text()
    assert len(trace.read_text().splitlines()) == 5 * 2 * 2 * 5
    assert main(["simulate", "--config", str(TINY), "--seed", "1"]) == 0
    rows = parse(capsys.readouterr().out)
    assert {r["seed"] for r in rows} == {"1"}


def test_cli_experiment_preset(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nodes": 12, "avg_degree": 3, "waxman_gamma": 0.5, "slots": 3, "algorithms": ["QCAST"]}))
    assert main(["simulate", "--config", str(cfg), "--experiment", "range-hops"]) == 0
    rows = parse(capsys.readouterr().out)
    assert rows and all(r["bin_kind"] == HOPS and r["algorithm"] == "QCAST" for r in rows)


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"q": 2}')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "q must be in (0, 1]" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_zero_slots_prints_header(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nodes": 12, "avg_degree": 3, "waxman_gamma": 0.5, "slots": 0}))
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out == ",".join(CSV_HEADER) + "\n"


def test_gen_topology_round_trip(tmp_path):
    out = tmp_path / "topo.json"
    proc = subprocess.run(
        [sys.executable, "-m", "qguard", "gen-topology", "--config", str(TINY), "--seed", "1", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert read_topology(out) == build_topology(tiny(), 1)


def test_module_entry_point_reports_errors(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qguard", "simulate", "--config", str(tmp_path / "none.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2 and "config error" in proc.stderr
