import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydqec.cli import trajectory_rows
from rydqec.optimizer import (
    SCAN_COLUMNS, DEConfig, GateSearch, gate_infidelity, minimize, optimize_gate, scan_alpha, scan_tau, write_csv,
)
from rydqec.gate_metrics import CCZ
from rydqec.rydberg_model import BOUNDS, PulseParams, SystemParams


def sphere(x):
    return float(np.sum(x**2))


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


def test_sphere():
    r = minimize(sphere, [(-1, 1)] * 3, DEConfig(max_generations=100, tol=0))
    assert r.best_cost < 1e-10


def test_best1bin_strategy():
    r = minimize(sphere, [(-1, 1)] * 3, DEConfig(max_generations=100, tol=0, strategy="best1bin"))
    assert r.best_cost < 1e-10
    with pytest.raises(ValueError):
        DEConfig(strategy="rand2exp")


def test_rosenbrock():
    r = minimize(rosenbrock, [(-2, 2)] * 3, DEConfig(max_generations=1000, tol=1e-14))
    assert r.best_cost < 1e-6
    assert np.allclose(r.best, 1, atol=1e-2)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_deterministic_elitist_bounded(seed):
    bounds = [(-3, 1), (0.5, 2), (-1, 4)]
    cfg = DEConfig(population_size=12, max_generations=30, seed=seed)
    a = minimize(rosenbrock, bounds, cfg)
    b = minimize(rosenbrock, bounds, cfg)
    assert np.array_equal(a.best, b.best) and a.history == b.history
    assert all(x >= y for x, y in zip(a.history, a.history[1:]))
    assert all(lo <= v <= hi for v, (lo, hi) in zip(a.best, bounds))


def test_non_finite_costs_are_rejected():
    def cost(x):
        if x[0] > 0:
            return math.nan
        if x[1] > 0.5:
            raise FloatingPointError("boom")
        return sphere(x)

    r = minimize(cost, [(-1, 1)] * 2, DEConfig(population_size=10, max_generations=40))
    assert math.isfinite(r.best_cost) and r.best[0] <= 0


def test_config_validation():
    with pytest.raises(ValueError):
        DEConfig(population_size=3)
    with pytest.raises(ValueError):
        minimize(sphere, [(0, math.inf)], DEConfig())


def test_gate_search_is_reproducible():
    system = SystemParams(8.0)
    search = GateSearch(de=DEConfig(population_size=8, max_generations=4), seeds=(5,), polish=False)
    a = optimize_gate(system, CCZ, search)
    b = optimize_gate(system, CCZ, search)
    assert a.pulse == b.pulse and a.fidelity == b.fidelity
    x = a.pulse.as_array()
    assert all(lo <= v <= hi for v, (lo, hi) in zip(x, BOUNDS))
    assert gate_infidelity(x, system, CCZ, 4096) == pytest.approx(1 - a.fidelity, abs=1e-3)


def test_scan_records_failures_and_continues(tmp_path, monkeypatch):
    import rydqec.optimizer as opt

    real = opt.optimize_gate

    def flaky(system, *a, **k):
        if system.tau == 6.0:
            raise opt.IntegrationError("synthetic blow-up")
        return real(system, *a, **k)

    monkeypatch.setattr(opt, "optimize_gate", flaky)
    search = GateSearch(de=DEConfig(population_size=6, max_generations=2), seeds=(0,), polish=False)
    rows = scan_tau([5.0, 6.0], 0.0, CCZ, search)
    assert [r["status"] for r in rows][0] == "ok"
    assert rows[1]["status"].startswith("error") and math.isnan(rows[1]["fidelity"])
    write_csv(rows, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header.split(",") == SCAN_COLUMNS


def test_scan_alpha_grid_order():
    search = GateSearch(de=DEConfig(population_size=5, max_generations=1), seeds=(0,), polish=False)
    rows = scan_alpha([0.0, 1.0], [4.0, 5.0], 1.64e-3, CCZ, search)
    assert [(r["alpha"], r["tau"]) for r in rows] == [(0.0, 4.0), (0.0, 5.0), (1.0, 4.0), (1.0, 5.0)]


def test_alpha_zero_keeps_phi101_zero():
    rows = trajectory_rows(PulseParams(1.68, 8.88, -1.33), SystemParams(25.0, gamma=1.64e-3, alpha=0.0), 50, 25.0)
    assert max(abs(r["phi_ent_101"]) for r in rows) < 1e-9


def test_alpha_one_ties_phi101_to_phi110():
    rows = trajectory_rows(PulseParams(1.69, 5.85, -4.84), SystemParams(12.5, gamma=1.64e-3, alpha=1.0), 50, 25.0)
    assert max(abs(r["phi_ent_101"] - r["phi_ent_110"]) for r in rows) < 1e-8
