"""One test per primary acceptance criterion.

Each test prints a PASS/FAIL line (also collected in the terminal summary)
and then asserts the same condition, so a failing criterion shows up both
as a test failure and as a FAIL line with the measured numbers.
"""

import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from rydqec.bacon_shor import build_qec_cycle, negative_control_cycle
from rydqec.circuit_sim import Circuit, GateOp, NoiseModel, run_noisy
from rydqec.evolver import convergence_check, default_steps, evolve
from rydqec.ft_analysis import (
    STATES,
    fit_power_law,
    lambda_sweep,
    logical_error_rate,
    single_fault_scan,
)
from rydqec.gate_metrics import (
    CCZ,
    decomposition_benchmark,
    error_breakdown,
    gate_fidelity,
    perturbed_fidelity,
    plus_state_fidelity,
)
from rydqec.optimizer import DEConfig, GateSearch, optimize_gate, scan_alpha
from rydqec.quantum_core import Operator, StateVector
from rydqec.rydberg_model import PulseParams, SystemParams, plus_state

pytestmark = pytest.mark.acceptance

TABLE_II = PulseParams(3.55, 8.34, -4.09)
# a point inside the 3-digit rounding box of TABLE_II, found by local search at gamma = 0
TABLE_II_BOX = PulseParams(3.54693081, 8.34368204, -4.09119596)
TABLE_II_3B = PulseParams(0.53, 5.76, -4.05)
# Nelder-Mead refinement started from TABLE_II_3B
TABLE_II_3B_LOCAL = PulseParams(0.5295, 5.7751, -4.0441)
GAMMA_CRYO = 1.64e-3

SEARCH_2C = GateSearch(de=DEConfig(population_size=45, max_generations=100), seeds=(0,))
SEARCH_3B = GateSearch(de=DEConfig(population_size=45, max_generations=100), seeds=(0, 1, 2))
SEARCH_ALPHA = GateSearch(de=DEConfig(population_size=30, max_generations=60), seeds=(0,))
ALPHA_TAUS = (12.5, 25.0, 50.0)


def verdict(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def breakdown(pulse, tau, gamma):
    t0 = time.perf_counter()
    traj = evolve(plus_state(), pulse, SystemParams(tau, gamma=gamma))
    return error_breakdown(traj, gamma), time.perf_counter() - t0


def test_replay_fig2b():
    e, dt = breakdown(TABLE_II, 87.5, 0.0)
    box, _ = breakdown(TABLE_II_BOX, 87.5, 0.0)
    ok = abs(e.fidelity - (1 - 9.6e-7)) <= 0.02 and e.phi_bar < 1e-3 and dt < 10
    verdict(
        "replay fig2b",
        ok,
        f"1-F = {1 - e.fidelity:.3e}, phi_bar = {e.phi_bar:.3e}, {dt:.1f} s "
        f"(target 1-F 9.6e-07 +/- 2pp, phi_bar < 1e-3; rounding-box point {TABLE_II_BOX} "
        f"gives 1-F = {1 - box.fidelity:.2e}, phi_bar = {box.phi_bar:.2e})",
    )


def test_replay_fig3a():
    e, dt = breakdown(TABLE_II, 87.5, GAMMA_CRYO)
    box, _ = breakdown(TABLE_II_BOX, 87.5, GAMMA_CRYO)
    f_ok = abs(e.fidelity - 0.8965) <= 0.02
    p_ok = abs(e.p_bar / 1.03e-1 - 1) <= 0.2
    verdict(
        "replay fig3a",
        f_ok and p_ok,
        f"F = {e.fidelity:.2%} ({'ok' if f_ok else 'off'}), p_bar = {e.p_bar:.3e} ({'ok' if p_ok else 'off'}), "
        f"{dt:.1f} s (target F 89.65% +/- 2pp, p_bar 1.03e-1 +/- 20%; rounding-box point gives "
        f"F = {box.fidelity:.2%}, p_bar = {box.p_bar:.3e})",
    )


@pytest.mark.slow
def test_reoptimize_fig2c():
    t0 = time.perf_counter()
    res = optimize_gate(SystemParams(25.0), CCZ, SEARCH_2C)
    dt = time.perf_counter() - t0
    verdict(
        "re-optimization fig2c",
        res.fidelity >= 0.9625 and dt < 1800,
        f"F = {res.fidelity:.4%} at {res.pulse} in {dt / 60:.1f} min "
        f"(target >= 96.25%, < 30 min; DE pop 45, 100 generations, seeds {SEARCH_2C.seeds})",
    )


@pytest.mark.slow
def test_reoptimize_fig3b():
    t0 = time.perf_counter()
    system = SystemParams(87.5, gamma=GAMMA_CRYO)
    res = optimize_gate(system, CCZ, SEARCH_3B)
    dt = time.perf_counter() - t0
    published, _ = breakdown(TABLE_II_3B, 87.5, GAMMA_CRYO)
    local, _ = breakdown(TABLE_II_3B_LOCAL, 87.5, GAMMA_CRYO)
    per_seed = ", ".join(f"{s}: {1 - r.best_cost:.4f}" for s, r in zip(SEARCH_3B.seeds, res.runs))
    verdict(
        "re-optimization fig3b",
        res.fidelity >= 0.9679,
        f"F = {res.fidelity:.4%} at {res.pulse} in {dt / 60:.1f} min (target >= 96.79%; "
        f"{SEARCH_3B.de.strategy}, pop {SEARCH_3B.de.population_size}, {SEARCH_3B.de.max_generations} generations, "
        f"search F per seed {{{per_seed}}}; rounded published point replays at F = {published.fidelity:.2%}, "
        f"its local refinement {TABLE_II_3B_LOCAL} at F = {local.fidelity:.2%})",
    )


def test_decomposition_benchmark():
    expected = {("TB", "300K"): 0.8846, ("TB", "0K"): 0.9627, ("NN", "300K"): 0.9393, ("NN", "0K"): 0.9802}
    durations = {"TB": 9.2, "NN": 10.6}
    got = {k: decomposition_benchmark(*k) for k in expected}
    worst = max(abs(got[k][0] - v) for k, v in expected.items())
    dur_ok = all(abs(got[(n, "300K")][1] - d) < 1e-9 for n, d in durations.items())
    verdict(
        "decomposition benchmark",
        worst <= 2e-4 and dur_ok,
        f"max |dF| = {worst * 100:.4f}pp, durations TB {got[('TB', '300K')][1]:.1f} us / "
        f"NN {got[('NN', '300K')][1]:.1f} us (target 0.02pp, 9.2 / 10.6 us)",
    )


def test_appendix_a_state_vs_gate_fidelity():
    rng = np.random.default_rng(2024)
    target = CCZ.target_unitary()
    worst = 0.0
    for _ in range(1000):
        u = Operator(np.diag(np.exp(1j * rng.uniform(-np.pi, np.pi, 8))))
        worst = max(worst, abs(plus_state_fidelity(u) - gate_fidelity(u, target) ** 2))
    verdict("appendix A fidelity identity", worst < 1e-12, f"max deviation {worst:.2e} over 1000 unitaries (target 1e-12)")


def test_appendix_b_second_order_independence():
    rng = np.random.default_rng(7)
    eps = 0.01
    delta = 1e-3

    def cross(dc, dp, d):
        inf = lambda a, b: 1 - perturbed_fidelity(a, b)  # noqa: E731
        return inf(d * dc, d * dp) - inf(d * dc, 0 * dp) - inf(0 * dc, d * dp)

    ratios = []
    for _ in range(100):
        dc, dp = rng.normal(size=(2, 8))
        dc /= np.linalg.norm(dc)
        dp /= np.linalg.norm(dp)
        ratios.append(cross(dc, dp, delta) / cross(dc, dp, delta / 2))
    ratios = np.array(ratios)
    verdict(
        "appendix B cross term",
        bool(np.all(ratios >= 8 * (1 - eps))),
        f"cross-term reduction under delta -> delta/2 in [{ratios.min():.3f}, {ratios.max():.3f}] "
        f"over 100 directions at delta = {delta:g} (target >= 8, {eps:.0%} slack)",
    )


def test_integrator_order_and_norm():
    rep = convergence_check(plus_state(), TABLE_II, SystemParams(87.5), default_steps(87.5, 128))
    traj = evolve(plus_state(), TABLE_II, SystemParams(87.5, gamma=GAMMA_CRYO))
    rise = float(np.diff(traj.norms).max())
    ulp = 4 * np.finfo(float).eps
    verdict(
        "integrator order and norm",
        12 <= rep.ratio <= 20 and rise <= ulp,
        f"step-halving ratio {rep.ratio:.2f} (target [12, 20]); largest per-step norm change {rise:.1e} "
        f"with gamma > 0 (target <= 0 up to {ulp:.1e} rounding), final norm^2 {traj.norms[-1] ** 2:.4f}",
    )


@pytest.mark.slow
def test_alpha_endpoints():
    t0 = time.perf_counter()
    rows = scan_alpha([0.0, 1.0], ALPHA_TAUS, GAMMA_CRYO, CCZ, SEARCH_ALPHA)
    dt = time.perf_counter() - t0
    best = {a: max((r for r in rows if r["alpha"] == a and r["status"] == "ok"), key=lambda r: r["fidelity"])
            for a in (0.0, 1.0)}
    table = "; ".join(f"alpha={r['alpha']:g} tau={r['tau']:g}: {r['fidelity']:.2%}" for r in rows)
    verdict(
        "alpha endpoints",
        all(b["fidelity"] > 0.98 for b in best.values()) and dt < 4 * 3600,
        f"best F {best[0.0]['fidelity']:.2%} (alpha 0, tau {best[0.0]['tau']:g}), "
        f"{best[1.0]['fidelity']:.2%} (alpha 1, tau {best[1.0]['tau']:g}) in {dt / 60:.1f} min "
        f"(target > 98%; {table})",
    )


def test_qec_fault_tolerance():
    t0 = time.perf_counter()
    cycle = build_qec_cycle()
    reports = {s: single_fault_scan(cycle, s) for s in STATES}
    bad = negative_control_cycle()
    bad_reports = {s: single_fault_scan(bad, s) for s in STATES}
    dt = time.perf_counter() - t0
    ok = all(r.passed for r in reports.values()) and not all(r.passed for r in bad_reports.values())
    detail = ", ".join(f"{s}: {r.total_locations} faults / {len(r.failures)} failures" for s, r in reports.items())
    neg = ", ".join(f"{s}: {len(r.failures)} failures" for s, r in bad_reports.items())
    verdict("QEC fault tolerance", ok and dt < 1200, f"{detail}; negative control {neg}; {dt:.0f} s (target < 20 min)")


@pytest.mark.slow
def test_qec_scaling():
    t0 = time.perf_counter()
    cycle = build_qec_cycle()
    parts, ok = [], True
    for s in STATES:
        est = lambda_sweep(cycle, s)
        fit = fit_power_law([e.lam for e in est], [e.p_L for e in est])
        fewest = min(e.failures for e, u in zip(est, fit.used) if u)
        ok &= 1.8 <= fit.alpha <= 2.2 and fewest >= 100
        hi = logical_error_rate(cycle, s, NoiseModel(), 0.1, 1_000_000)
        lo = logical_error_rate(cycle, s, NoiseModel(), 0.05, 1_000_000)
        bracket = hi.ci_low / lo.ci_high <= 4 <= hi.ci_high / lo.ci_low
        ok &= bracket
        top = logical_error_rate(cycle, s, NoiseModel(), 1.0, 200_000)
        half = logical_error_rate(cycle, s, NoiseModel(), 0.5, 200_000)
        parts.append(
            f"{s}: alpha = {fit.alpha:.3f} +/- {fit.alpha_stderr:.3f}, min failures {fewest}, "
            f"p_L(0.1)/p_L(0.05) = {hi.p_L / lo.p_L:.2f} ({'brackets 4' if bracket else 'misses 4'}), "
            f"p_L(1)/p_L(0.5) = {top.p_L / half.p_L:.2f}"
        )
    dt = time.perf_counter() - t0
    verdict("QEC scaling", bool(ok) and dt < 6 * 3600, "; ".join(parts) + f"; {dt:.0f} s (target alpha in [1.8, 2.2])")


def test_monte_carlo_matches_channel():
    p = 0.3
    circ = Circuit(2, (GateOp("H", (0,)), GateOp("CNOT", (0, 1), "two_nn")))
    noise = NoiseModel(p2_nn=p)
    psi0 = StateVector.basis((2, 2), (0, 0))
    n = 100_000
    samples = np.empty((n, 16), complex)
    for k in range(n):
        a = run_noisy(circ, psi0, noise, [11, k]).amps
        samples[k] = np.outer(a, a.conj()).reshape(-1)
    mean = samples.mean(axis=0)
    sem = samples.std(axis=0) / np.sqrt(n)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(bell, bell)
    # two-qubit depolarizing channel in closed form: sum over all 16 Paulis of P rho P equals 4 tr(rho) I
    channel = (1 - 16 * p / 15) * rho + 16 * p / 15 * np.eye(4) / 4
    z = np.abs(mean - channel.reshape(-1)) / np.maximum(sem, 1e-12)
    verdict(
        "Monte Carlo vs channel",
        bool(z.max() < 5),
        f"max |rho_MC - rho_channel| = {np.abs(mean - channel.reshape(-1)).max():.2e}, "
        f"largest deviation {z.max():.2f} standard errors over {n} trajectories (target < 5)",
    )
