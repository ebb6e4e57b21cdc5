import json
import math
import os
import random

import pytest

from ftlopt.engine import (
    AlnsConfig,
    ConfigError,
    accept,
    config_from_dict,
    load_config,
    run,
    temperature_schedule,
    write_report,
)
from ftlopt.model import validate_solution
from ftlopt.operators import build_initial

from helpers import micro_instance


class TestConfig:
    def test_defaults_match_production_tables(self):
        cfg = AlnsConfig()
        assert cfg.max_iterations == 25_000
        assert cfg.psi == 100
        assert cfg.xi == 0.35
        assert cfg.segment_length == 200

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            AlnsConfig(xi=0).check()
        with pytest.raises(ConfigError):
            AlnsConfig(rho=0).check()
        with pytest.raises(ConfigError):
            AlnsConfig(removal_ops=("nope",)).check()
        with pytest.raises(ConfigError):
            AlnsConfig(insertion_ops=("regret1",)).check()
        with pytest.raises(ConfigError):
            config_from_dict({"unknown_key": 1})

    def test_config_file_round_trip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"max_iterations": 50, "seed": 3, "insertion_ops": ["greedy"]}))
        cfg = load_config(str(p))
        assert cfg.max_iterations == 50
        assert cfg.seed == 3
        assert cfg.insertion_ops == ("greedy",)


class TestAccept:
    def test_improvement_always_accepted(self):
        assert accept(100, 99, 5.0, random.Random(1))

    def test_equal_cost_accepted_with_probability_one(self):
        rng = random.Random(2)
        assert all(accept(100, 100, 5.0, rng) for _ in range(200))

    def test_gap_t_ln2_accepted_about_half(self):
        rng = random.Random(3)
        temperature = 1000.0
        gap = int(temperature * math.log(2))
        hits = sum(accept(10_000, 10_000 + gap, temperature, rng) for _ in range(10_000))
        assert abs(hits / 10_000 - 0.5) < 0.02


class TestTemperature:
    def test_start_value_formula(self):
        cfg = AlnsConfig(sa_start_gap=0.05, sa_start_acceptance=0.5)
        t0, _c = temperature_schedule(cfg, 1000)
        assert abs(t0 - 50 / math.log(2)) < 1e-9

    def test_cooling_telescopes_to_end_fraction(self):
        cfg = AlnsConfig(max_iterations=25_000, sa_end_fraction=0.002)
        t0, c = temperature_schedule(cfg, 1000)
        assert abs(c - 0.002 ** (1 / 25_000)) < 1e-15
        assert abs(t0 * c**25_000 / t0 - 0.002) < 1e-9


class TestRun:
    def test_zero_iterations_returns_initial(self):
        inst = micro_instance(1)
        best, report = run(inst, AlnsConfig(max_iterations=0, seed=1))
        assert best == build_initial(inst)
        assert report.best_cents == best.cost_total

    def test_fixed_seed_reproducible(self):
        inst = micro_instance(2)
        cfg = AlnsConfig(max_iterations=400, seed=11)
        a, ra = run(inst, cfg)
        b, rb = run(inst, cfg)
        assert a == b
        assert [(t.iteration, t.current_cents, t.best_cents) for t in ra.trace] == [
            (t.iteration, t.current_cents, t.best_cents) for t in rb.trace
        ]

    def test_best_cost_trace_monotone(self):
        inst = micro_instance(4)
        _best, report = run(inst, AlnsConfig(max_iterations=600, seed=5))
        bests = [t.best_cents for t in report.trace]
        assert all(a >= b for a, b in zip(bests, bests[1:]))

    def test_mixed_never_worse_than_all_outsourced(self):
        for seed in range(6):
            inst = micro_instance(seed)
            best, _ = run(inst, AlnsConfig(max_iterations=300, seed=seed))
            assert best.cost_total <= sum(r.sm_price_cents for r in inst.requests)

    def test_accepted_solutions_stay_feasible(self):
        inst = micro_instance(6)
        best, _ = run(inst, AlnsConfig(max_iterations=300, seed=6, strict_validation=True))
        assert validate_solution(inst, best) == []

    def test_weights_positive_and_stats_consistent(self):
        inst = micro_instance(7)
        cfg = AlnsConfig(max_iterations=450, segment_length=100, seed=7)
        _best, report = run(inst, cfg)
        for stats in (report.removal_stats, report.insertion_stats):
            assert all(s.weight > 0 for s in stats)
            total = sum(s.weight for s in stats)
            probs = [s.weight / total for s in stats]
            assert abs(sum(probs) - 1.0) < 1e-12
        assert sum(s.uses for s in report.removal_stats) == 450
        assert sum(s.uses for s in report.insertion_stats) == 450

    def test_threads_do_not_change_results(self):
        inst = micro_instance(8)
        cfg = AlnsConfig(max_iterations=200, seed=8)
        os.environ["FTL_THREADS"] = "0"
        try:
            a, _ = run(inst, cfg)
            os.environ["FTL_THREADS"] = "3"
            b, _ = run(inst, cfg)
        finally:
            os.environ.pop("FTL_THREADS", None)
        assert a == b

    def test_regret_literal_switch_runs(self):
        inst = micro_instance(9)
        best, _ = run(inst, AlnsConfig(max_iterations=150, seed=9, regret_literal=True))
        assert validate_solution(inst, best) == []

    def test_report_files(self, tmp_path):
        inst = micro_instance(10)
        _best, report = run(inst, AlnsConfig(max_iterations=120, segment_length=40, seed=10))
        jp = tmp_path / "r.json"
        cp = tmp_path / "r.csv"
        write_report(report, str(jp), str(cp))
        doc = json.loads(jp.read_text())
        assert doc["iterations"] == 120
        lines = cp.read_text().splitlines()
        assert lines[0] == "iteration,current_cost,best_cost,temperature"
        assert len(lines) == 1 + len(report.trace)

    def test_empty_instance_runs(self):
        import dataclasses

        inst = dataclasses.replace(micro_instance(12), requests=())
        best, report = run(inst, AlnsConfig(max_iterations=50, seed=12))
        assert best.cost_total == 0 and best.trips == () and not best.bank
        assert report.best_cents == 0

    def test_wall_clock_stop(self):
        inst = micro_instance(11)
        _best, report = run(inst, AlnsConfig(max_iterations=100_000, seed=11, max_seconds=0.3))
        assert report.stopped_early
