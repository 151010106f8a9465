import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydqec.evolver import evolve
from rydqec.gate_metrics import (
    AMP, BITS, C1Z3, CCZ, TABLE_I, DecompositionError, DegenerateOutcomeError, GateOutcome, approximate_fidelity,
    compose_decomposition, decay_estimate, decomposition_benchmark, extract_outcome, gate_fidelity, gate_unitary,
    mixture_decomposition, perturbed_fidelity, phase_error, plus_state_fidelity, population_error, state_fidelity,
    wrap_phase,
)
from rydqec.quantum_core import Operator, StateVector
from rydqec.rydberg_model import COMPUTATIONAL, DIMS, PulseParams, SystemParams, plus_state

FIG2C = PulseParams(1.19, 6.81, -3.25)
# optimum found by the DE search at tau=25, gamma=0 (seed 0), frozen here as an oracle
FIG2C_DE = PulseParams(1.1902177372310343, 6.805503438920816, -3.258458722599121)


def register_state(amps8):
    v = np.zeros(64, dtype=complex)
    v[COMPUTATIONAL] = amps8
    return StateVector(DIMS, v)


def outcome_with(phases: dict[str, float]) -> GateOutcome:
    phi = np.zeros(8)
    for bits, val in phases.items():
        phi[int(bits, 2)] = val
    return extract_outcome(register_state(AMP * np.exp(1j * phi)))


def test_exact_ccz_outcome():
    o = extract_outcome(register_state(CCZ.target_state()))
    assert np.allclose(o.c, AMP)
    assert abs(o.ent("111")) == pytest.approx(np.pi)
    assert np.allclose(np.delete(o.phi_ent, 7), 0)
    assert o.leakage == pytest.approx(0, abs=1e-15)
    assert state_fidelity(register_state(CCZ.target_state())) == pytest.approx(1)


def test_identity_outcome_and_overlap():
    o = extract_outcome(plus_state())
    assert np.allclose(o.phi_ent, 0)
    assert state_fidelity(plus_state(), CCZ, correct_local_phases=False) == pytest.approx(0.5625)


def test_local_phases_removed():
    # a virtual Z on every ion does not change the corrected fidelity
    theta = 0.7
    amps = CCZ.target_state() * np.exp(1j * theta * BITS.sum(axis=1))
    assert state_fidelity(register_state(amps)) == pytest.approx(1)
    assert state_fidelity(register_state(amps), correct_local_phases=False) < 0.9


def test_degenerate_outcome():
    amps = np.full(8, AMP, dtype=complex)
    amps[int("100", 2)] = 0
    with pytest.raises(DegenerateOutcomeError):
        extract_outcome(register_state(amps))


def test_population_error():
    assert population_error(extract_outcome(register_state(CCZ.target_state()))) == pytest.approx(0, abs=1e-15)
    zero = GateOutcome(np.zeros(8), np.zeros(8), np.zeros(8), 1.0)
    assert population_error(zero) == 1.0


def test_phase_error_values():
    assert phase_error(outcome_with({"111": np.pi})) == pytest.approx(0, abs=1e-15)
    assert phase_error(outcome_with({})) == pytest.approx(0.4375)


def test_phase_error_matches_symmetric_formula():
    p110, p101, p111 = 0.3, -0.2, 2.9
    o = outcome_with({"110": p110, "011": p110, "101": p101, "111": p111})
    ref = 1 - abs(4 + 2 * np.exp(1j * p110) + np.exp(1j * p101) - np.exp(1j * p111)) ** 2 / 64
    assert phase_error(o) == pytest.approx(ref)


def test_decay_estimate():
    tr = evolve(plus_state(), FIG2C, SystemParams(25.0))
    assert decay_estimate(tr, 0.0) == 0.0

    class Flat:  # constant Rydberg population P over [0, tau]
        times = np.linspace(0, 10, 11)
        rydberg_pop = np.full(11, 0.3)

    g = 2e-3
    assert decay_estimate(Flat, g) == pytest.approx(1 - (1 - g * 0.3 * 10 / 2) ** 2)


def test_approximate_fidelity():
    tr = evolve(plus_state(), PulseParams(0.0, 1.0, 0.0), SystemParams(5.0))
    assert approximate_fidelity(outcome_with({"111": np.pi}), tr, 0.0) == pytest.approx(1)
    assert approximate_fidelity(outcome_with({"111": np.pi, "101": np.pi}), tr, 0.0) == pytest.approx(0.5625)
    o = outcome_with({"111": np.pi, "101": 0.2})
    assert approximate_fidelity(o, tr, 0.0, rule="sum") == pytest.approx(approximate_fidelity(o, tr, 0.0))
    with pytest.raises(ValueError):
        approximate_fidelity(o, tr, 0.0, rule="max")


def test_gate_fidelity_examples():
    ut = CCZ.target_unitary()
    assert gate_fidelity(ut, ut) == pytest.approx(1)
    ident = Operator(np.eye(8))
    assert gate_fidelity(ident, ut) == pytest.approx(0.75)
    assert plus_state_fidelity(ident) == pytest.approx(0.5625)


@given(st.integers(0, 2**32 - 1))
def test_state_fidelity_is_gate_fidelity_squared(seed):
    rng = np.random.default_rng(seed)
    u = Operator(np.diag(np.exp(1j * rng.uniform(-np.pi, np.pi, 8))))
    for spec in (CCZ, C1Z3):
        assert abs(plus_state_fidelity(u, spec) - gate_fidelity(u, spec.target_unitary()) ** 2) < 1e-12


def test_gate_unitary_is_diagonal_and_consistent():
    system = SystemParams(25.0)
    u = gate_unitary(FIG2C, system)
    final = evolve(plus_state(), FIG2C, system).final_state
    via_u = u.entries @ np.full(8, AMP)
    assert np.allclose(via_u, final.amps[COMPUTATIONAL], atol=1e-10)
    assert state_fidelity(final, correct_local_phases=False) == pytest.approx(plus_state_fidelity(u), abs=1e-12)


def test_symmetry_of_outcome():
    o = extract_outcome(evolve(plus_state(), FIG2C, SystemParams(25.0, gamma=1e-3)).final_state)
    i = {b: int(b, 2) for b in ("100", "001", "110", "011")}
    assert o.c[i["100"]] == pytest.approx(o.c[i["001"]], abs=1e-10)
    assert o.phi[i["100"]] == pytest.approx(o.phi[i["001"]], abs=1e-10)
    assert o.c[i["110"]] == pytest.approx(o.c[i["011"]], abs=1e-10)
    assert o.phi[i["110"]] == pytest.approx(o.phi[i["011"]], abs=1e-10)
    assert o.c[0] == pytest.approx(AMP, abs=1e-14) and o.phi[0] == 0


def test_fig2c_optimum_error_budget():
    o = extract_outcome(evolve(plus_state(), FIG2C_DE, SystemParams(25.0)).final_state)
    assert population_error(o) == pytest.approx(6.33e-5, rel=0.2)
    assert phase_error(o) == pytest.approx(3.24e-2, rel=0.2)


@pytest.mark.xfail(strict=True, reason="3-digit rounding of the published optimum shifts p_bar to 7.8e-5 (+23%)")
def test_fig2c_rounded_parameters_error_budget():
    o = extract_outcome(evolve(plus_state(), FIG2C, SystemParams(25.0)).final_state)
    assert population_error(o) == pytest.approx(6.33e-5, rel=0.2)
    assert phase_error(o) == pytest.approx(3.24e-2, rel=0.2)


def test_mixture_decomposition():
    assert mixture_decomposition(outcome_with({"111": np.pi})) == pytest.approx((1, 0))
    assert mixture_decomposition(outcome_with({"111": np.pi, "101": np.pi})) == pytest.approx((0, 1))
    assert mixture_decomposition(outcome_with({"111": np.pi, "101": np.pi / 2})) == pytest.approx((0.5, 0.5))
    with pytest.raises(DecompositionError):
        mixture_decomposition(outcome_with({"111": np.pi, "110": 0.1, "011": 0.1}))


def test_wrap_phase_interval():
    x = wrap_phase(np.array([-np.pi, np.pi, 3 * np.pi, 0.5]))
    assert np.allclose(x, [np.pi, np.pi, np.pi, 0.5])


def test_compose_decomposition_table_rows():
    for name, temp, fid in (("TB", "300K", 0.8846), ("NN", "300K", 0.9393), ("TB", "0K", 0.9627), ("NN", "0K", 0.9802)):
        f, _ = decomposition_benchmark(name, temp)
        assert f == pytest.approx(fid, abs=2e-4)
    assert decomposition_benchmark("TB", "300K")[1] == pytest.approx(9.2)
    assert decomposition_benchmark("NN", "300K")[1] == pytest.approx(10.6)
    assert compose_decomposition([(0.97, 2.0)], 0) == (0.97, 2.0)
    with pytest.raises(ValueError):
        compose_decomposition([(1.2, 1.0)], 0)
    assert TABLE_I["0K"]["CCZ_global"] == (0.9742, 2.0)


def test_phase_only_error_is_second_order():
    rng = np.random.default_rng(11)
    for _ in range(100):
        dp = rng.normal(size=8)
        dp /= np.linalg.norm(dp)
        d = 1e-2
        r = (1 - perturbed_fidelity(np.zeros(8), d * dp)) / (1 - perturbed_fidelity(np.zeros(8), d / 2 * dp))
        assert 3.5 <= r <= 4.5
