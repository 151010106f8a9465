"""Amplitudes, entangling phases and error measures of simulated gates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evolver import Trajectory, evolve
from .quantum_core import Operator, StateVector
from .rydberg_model import COMPUTATIONAL, DIMS, PulseParams, SystemParams

BITS = np.array(list(itertools.product((0, 1), repeat=3)))
WEIGHT = BITS.sum(axis=1)
IDX = {"".join(map(str, b)): k for k, b in enumerate(BITS)}
AMP = 1 / (2 * np.sqrt(2))


class DegenerateOutcomeError(ValueError):
    """The reference amplitude c_100 vanished, so entangling phases are undefined."""


class DecompositionError(ValueError):
    """The outcome is not a CCZ / C1Z3 mixture within the requested threshold."""


@dataclass(frozen=True)
class GateSpec:
    kind: str  # "CCZ" or "C1Z3"

    def __post_init__(self) -> None:
        if self.kind not in ("CCZ", "C1Z3"):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def flips(self) -> np.ndarray:
        """1 where the target applies a pi phase."""
        if self.kind == "CCZ":
            return BITS[:, 0] & BITS[:, 1] & BITS[:, 2]
        return BITS[:, 0] & BITS[:, 2]

    @property
    def signs(self) -> np.ndarray:
        return 1 - 2 * self.flips

    def target_state(self) -> np.ndarray:
        return AMP * self.signs.astype(complex)

    def target_unitary(self) -> Operator:
        return Operator(np.diag(self.signs.astype(complex)))


CCZ = GateSpec("CCZ")
C1Z3 = GateSpec("C1Z3")


def wrap_phase(phi):
    """Map angles into (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


@dataclass(frozen=True, eq=False)
class GateOutcome:
    c: np.ndarray
    phi: np.ndarray
    phi_ent: np.ndarray
    leakage: float

    def ent(self, bits: str) -> float:
        return float(self.phi_ent[IDX[bits]])


def computational_amplitudes(final: StateVector) -> np.ndarray:
    if final.dims == DIMS:
        return np.asarray(final.amps[COMPUTATIONAL])
    if final.dims == (2, 2, 2):
        return np.asarray(final.amps)
    raise ValueError(f"expected an ion register {DIMS} or three qubits, got {final.dims}")


def extract_outcome(final: StateVector) -> GateOutcome:
    a = computational_amplitudes(final)
    c = np.abs(a)
    if c[IDX["100"]] < 1e-12:
        raise DegenerateOutcomeError("c_100 = 0; entangling phases undefined")
    phi = np.angle(a)
    phi_ent = wrap_phase(phi - WEIGHT * phi[IDX["100"]])
    leakage = float(1.0 - np.sum(c**2))
    return GateOutcome(c, wrap_phase(phi), phi_ent, leakage)


def state_fidelity(final: StateVector, spec: GateSpec = CCZ, correct_local_phases: bool = True) -> float:
    """|<Psi_T|Psi>|^2 over the computational amplitudes.

    With ``correct_local_phases`` the single-ion phase phi_100 (a virtual Z
    rotation on every ion) is removed first, which is the figure of merit the
    optimizer uses. Without it the bare overlap is returned.
    """
    a = computational_amplitudes(final)
    if correct_local_phases:
        o = extract_outcome(final)
        a = o.c * np.exp(1j * o.phi_ent)
    return float(abs(np.vdot(spec.target_state(), a)) ** 2)


def population_error(o: GateOutcome) -> float:
    return float(1.0 - np.sum(o.c) ** 2 / 8.0)


def phase_error(o: GateOutcome, spec: GateSpec = CCZ) -> float:
    """1 - |sum_abc s_abc exp(i phi_ent_abc)|^2 / 64.

    For CCZ and an ion-1/3 symmetric outcome this is
    1 - |4 + 2 e^{i phi_110} + e^{i phi_101} - e^{i phi_111}|^2 / 64.
    """
    return float(1.0 - abs(np.sum(spec.signs * np.exp(1j * o.phi_ent))) ** 2 / 64.0)


def phase_error_101(o: GateOutcome) -> float:
    return float(1.0 - abs(7.0 + np.exp(1j * o.ent("101"))) ** 2 / 64.0)


def decay_integral(traj: Trajectory) -> float:
    """Trapezoidal time integral of the total dressed-state population."""
    return float(np.trapezoid(traj.rydberg_pop, traj.times))


def decay_estimate(traj: Trajectory, gamma: float) -> float:
    if gamma == 0:
        return 0.0
    return float(1.0 - abs(1.0 - 0.5 * gamma * decay_integral(traj)) ** 2)


def approximate_fidelity(o: GateOutcome, traj: Trajectory, gamma: float, rule: str = "product") -> float:
    e_phase = phase_error_101(o)
    e_decay = decay_estimate(traj, gamma)
    if rule == "product":
        return (1.0 - e_phase) * (1.0 - e_decay)
    if rule == "sum":
        return 1.0 - e_phase - e_decay
    raise ValueError(f"unknown combination rule {rule!r}")


@dataclass(frozen=True)
class ErrorBreakdown:
    p_bar: float
    phi_bar: float
    phi_bar_101: float
    p_bar_dec: float
    fidelity: float
    approx_fidelity: float


def error_breakdown(traj: Trajectory, gamma: float, spec: GateSpec = CCZ) -> ErrorBreakdown:
    o = extract_outcome(traj.final_state)
    return ErrorBreakdown(
        p_bar=population_error(o),
        phi_bar=phase_error(o, spec),
        phi_bar_101=phase_error_101(o),
        p_bar_dec=decay_estimate(traj, gamma),
        fidelity=state_fidelity(traj.final_state, spec),
        approx_fidelity=approximate_fidelity(o, traj, gamma),
    )


def gate_unitary(pulse: PulseParams, system: SystemParams, steps: int | None = None) -> Operator:
    """Evolve each computational basis state and keep the 8x8 computational block."""
    u = np.zeros((8, 8), dtype=complex)
    for k, b in enumerate(BITS):
        init = StateVector.basis(DIMS, tuple(int(x) for x in b))
        final = evolve(init, pulse, system, steps).final_state
        u[:, k] = final.amps[COMPUTATIONAL]
    off = np.abs(u - np.diag(np.diag(u)))
    if off.max() > 1e-8:
        raise RuntimeError(f"computational block not diagonal (max off-diagonal {off.max():.2e})")
    return Operator(u)


def gate_fidelity(u: Operator, u_target: Operator) -> float:
    """|Tr(U_T^dagger U)| / d."""
    return float(abs(np.trace(u_target.entries.conj().T @ u.entries)) / u.dim)


def plus_state_fidelity(u: Operator, spec: GateSpec = CCZ) -> float:
    """Bare overlap fidelity of U|+++> with the target state."""
    psi = u.entries @ np.full(8, AMP, dtype=complex)
    return state_fidelity(StateVector((2, 2, 2), psi), spec, correct_local_phases=False)


def perturbed_fidelity(dc: np.ndarray, dphi: np.ndarray, spec: GateSpec = CCZ) -> float:
    """Fidelity of the target state with amplitude and phase deviations added."""
    amps = (AMP + np.asarray(dc)) * spec.signs * np.exp(1j * np.asarray(dphi))
    return float(abs(np.vdot(spec.target_state(), amps)) ** 2)


def mixture_decomposition(o: GateOutcome, threshold: float = 1e-3) -> tuple[float, float]:
    """Weights (cos^2, sin^2) of phi_101/2 for a CCZ / C1Z3 superposition."""
    residuals = [
        abs(wrap_phase(o.ent("110"))),
        abs(wrap_phase(o.ent("011"))),
        abs(wrap_phase(o.ent("111") - np.pi)),
        abs(wrap_phase(o.ent("010"))),
        abs(wrap_phase(o.ent("001"))),
    ]
    worst = float(max(residuals))
    if worst > threshold:
        raise DecompositionError(
            f"phase error not confined to phi_101: residual {worst:.3e} > {threshold:.1e}"
        )
    half = o.ent("101") / 2
    return float(np.cos(half) ** 2), float(np.sin(half) ** 2)


def compose_decomposition(
    gates: Sequence[tuple[float, float]], sq_layers: int, sq_time: float = 1.0
) -> tuple[float, float]:
    """Fidelity product and total duration of a gate sequence with error-free single-qubit layers."""
    fid = 1.0
    duration = 0.0
    for f, d in gates:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"gate fidelity {f} outside (0, 1]")
        fid *= f
        duration += d
    return fid, duration + sq_layers * sq_time


# gate fidelities and durations (us) at 300 K and 0 K
TABLE_I = {
    "300K": {
        "C1Z2": (0.9922, 0.2),
        "C1Z3": (0.9554, 0.7),
        "C1Z3_global": (0.9031, 2.0),
        "CCZ_global": (0.9385, 1.5),
    },
    "0K": {
        "C1Z2": (0.9975, 0.2),
        "C1Z3": (0.9861, 0.8),
        "C1Z3_global": (0.9653, 2.0),
        "CCZ_global": (0.9742, 2.0),
    },
}

# (gate counts, single-qubit layers)
DECOMPOSITIONS = {
    "TB": ({"C1Z2": 4, "C1Z3": 2}, 7),
    "NN": ({"C1Z2": 8}, 9),
}


def decomposition_benchmark(name: str, temperature: str) -> tuple[float, float]:
    counts, layers = DECOMPOSITIONS[name]
    table = TABLE_I[temperature]
    gates = [table[g] for g, n in counts.items() for _ in range(n)]
    return compose_decomposition(gates, layers)
