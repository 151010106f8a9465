"""Fixed-step RK4 propagation of the three-ion Schrodinger equation.

The default method integrates in the interaction picture of the diagonal part
of H(t). The diagonal phases have a closed form (the detuning envelope
integrates analytically), so RK4 only has to resolve the laser and exchange
couplings. Plain RK4 on the lab-frame equation is kept as ``method="lab"``;
it needs far more steps at the large dressed-state energies of this model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .quantum_core import StateVector
from .rydberg_model import (
    DIMS,
    PulseParams,
    SystemParams,
    build_hamiltonian,
    hamiltonian_terms,
)

TWO_PI = 2.0 * np.pi

# steps per unit of tau (2*pi/V); see default_steps
DEFAULT_DENSITY = 4096
SEARCH_DENSITY = 256
MIN_STEPS = 4096
_RESYNC = 512


class IntegrationError(RuntimeError):
    """Raised when the propagated state stops being finite."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    rydberg_pop: np.ndarray
    norms: np.ndarray
    final_state: StateVector
    snapshot_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None  # (len(snapshot_times), 64) register amplitudes


@dataclass(frozen=True)
class ConvergenceReport:
    steps: int
    error: float  # |psi(steps) - psi(2 steps)|
    refined_error: float  # |psi(2 steps) - psi(4 steps)|

    @property
    def ratio(self) -> float:
        return self.error / self.refined_error if self.refined_error > 0 else np.inf


def default_steps(tau: float, density: int = DEFAULT_DENSITY) -> int:
    """Step count used when none is given: ``density`` per unit of tau, at least MIN_STEPS."""
    return max(MIN_STEPS, int(np.ceil(density * tau)))


@numba.njit(cache=True, nogil=True, fastmath=True)
def _ip_rk4(
    psi0, n_dressed, static, lrows, lcols, lvals, frows, fcols, fvals,
    omega0, delta0, Delta0, tau, steps, frozen, t_frozen, stride,
):
    n = psi0.size
    snaps = np.empty((steps // stride + 1, n), dtype=np.complex128)
    snaps[0] = psi0
    h = tau / steps
    y = psi0.copy()
    pops = np.empty(steps + 1)
    norms = np.empty(steps + 1)
    # static phases e_k(t) = exp(-2 pi i s_k t) advanced on the half-step grid
    half = np.exp(-1j * TWO_PI * static * (h / 2))
    ihalf = 1.0 / half
    e = np.ones(n, dtype=np.complex128)
    ie = np.ones(n, dtype=np.complex128)
    u = np.ones((3, n), dtype=np.complex128)
    iu = np.ones((3, n), dtype=np.complex128)
    ks = np.empty((4, n), dtype=np.complex128)
    src = np.empty(n, dtype=np.complex128)
    x = np.empty(n, dtype=np.complex128)
    acc = np.empty(n, dtype=np.complex128)
    c1 = tau / (4 * np.pi)
    s2f = np.sin(np.pi * t_frozen / tau) ** 2
    om_f = omega0 * s2f
    dl_f = delta0 - Delta0 * s2f

    p = 0.0
    nn = 0.0
    for k in range(n):
        a2 = y[k].real ** 2 + y[k].imag ** 2
        p += n_dressed[k] * a2
        nn += a2
    pops[0] = p
    norms[0] = np.sqrt(nn)

    for s in range(steps):
        t = s * h
        resync = (s + 1) % _RESYNC == 0
        for sub in range(1, 3):
            tt = t + sub * h / 2
            if frozen:
                phase = dl_f * tt
            else:
                phase = delta0 * tt - Delta0 * (tt / 2 - c1 * np.sin(2 * np.pi * tt / tau))
            w = np.exp(-1j * TWO_PI * phase)
            wc = w.conjugate()
            w2 = w * w
            wc2 = wc * wc
            if resync:
                for k in range(n):
                    e[k] = np.exp(-1j * TWO_PI * static[k] * tt)
                    ie[k] = 1.0 / e[k]
            else:
                for k in range(n):
                    e[k] = e[k] * half[k]
                    ie[k] = ie[k] * ihalf[k]
            for k in range(n):
                nd = n_dressed[k]
                if nd == 0:
                    f = 1.0 + 0j
                    fi = 1.0 + 0j
                elif nd == 1:
                    f = w
                    fi = wc
                elif nd == 2:
                    f = w2
                    fi = wc2
                else:
                    f = w2 * w
                    fi = wc2 * wc
                u[sub, k] = f * e[k]
                iu[sub, k] = fi * ie[k]

        for stage in range(4):
            if stage == 0:
                tt = t
                slot = 0
                for k in range(n):
                    src[k] = y[k]
            elif stage == 3:
                tt = t + h
                slot = 2
                for k in range(n):
                    src[k] = y[k] + h * ks[2, k]
            else:
                tt = t + h / 2
                slot = 1
                for k in range(n):
                    src[k] = y[k] + (h / 2) * ks[stage - 1, k]
            om = om_f if frozen else omega0 * np.sin(np.pi * tt / tau) ** 2
            for k in range(n):
                x[k] = u[slot, k] * src[k]
                acc[k] = 0.0
            for j in range(lrows.size):
                acc[lrows[j]] += lvals[j] * x[lcols[j]]
            for k in range(n):
                acc[k] = acc[k] * om
            for j in range(frows.size):
                acc[frows[j]] += fvals[j] * x[fcols[j]]
            for k in range(n):
                ks[stage, k] = -1j * TWO_PI * acc[k] * iu[slot, k]

        p = 0.0
        nn = 0.0
        for k in range(n):
            y[k] = y[k] + (h / 6) * (ks[0, k] + 2 * ks[1, k] + 2 * ks[2, k] + ks[3, k])
            u[0, k] = u[2, k]
            iu[0, k] = iu[2, k]
            z = u[0, k] * y[k]
            a2 = z.real ** 2 + z.imag ** 2
            p += n_dressed[k] * a2
            nn += a2
        pops[s + 1] = p
        norms[s + 1] = np.sqrt(nn)
        if (s + 1) % stride == 0:
            for k in range(n):
                snaps[(s + 1) // stride, k] = u[0, k] * y[k]

    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        out[k] = u[0, k] * y[k]
    return out, pops, norms, snaps


def _check_initial(initial: StateVector) -> None:
    if initial.dims != DIMS:
        raise ValueError(f"initial state must live on dims {DIMS}, got {initial.dims}")
    if abs(initial.norm() - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")


def evolve(
    initial: StateVector,
    pulse: PulseParams,
    system: SystemParams,
    steps: int | None = None,
    method: str = "interaction",
    frozen_time: float | None = None,
    snapshots: int = 0,
) -> Trajectory:
    """Propagate ``initial`` over [0, tau] with fixed-step RK4.

    ``frozen_time`` freezes the pulse envelopes at that instant, giving a
    constant Hamiltonian (used to compare against exact exponentials).
    ``snapshots`` > 0 also stores the state on that many equal intervals
    (interaction method; ``steps`` must be a multiple of it).
    """
    _check_initial(initial)
    if steps is None:
        steps = default_steps(system.tau)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    times = np.linspace(0.0, system.tau, steps + 1)
    stride = steps
    if snapshots:
        if method != "interaction":
            raise ValueError("snapshots need the interaction method")
        steps = -(-steps // snapshots) * snapshots
        times = np.linspace(0.0, system.tau, steps + 1)
        stride = steps // snapshots
    snaps = None
    if method == "interaction":
        terms = hamiltonian_terms(system)
        lists = _coupling_cache(system)
        psi, pops, norms, snaps = _ip_rk4(
            np.ascontiguousarray(initial.amps),
            terms.n_dressed.astype(np.int64),
            terms.static,
            *lists,
            float(pulse.omega0), float(pulse.delta0), float(pulse.Delta0),
            float(system.tau), int(steps),
            frozen_time is not None,
            0.0 if frozen_time is None else float(frozen_time),
            int(stride),
        )
    elif method == "lab":
        psi, pops, norms = _lab_rk4(initial.amps, pulse, system, steps, frozen_time)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(psi)):
        raise IntegrationError(
            f"non-finite amplitudes after {steps} steps; increase the step count"
        )
    if snapshots:
        return Trajectory(times, pops, norms, StateVector(DIMS, psi), times[::stride], snaps)
    return Trajectory(times, pops, norms, StateVector(DIMS, psi))


_COUPLINGS: dict = {}


def _coupling_cache(system: SystemParams):
    key = (system.omega_mw, system.gamma, system.alpha, system.pair_convention)
    if key not in _COUPLINGS:
        rows, cols, vals, kinds = hamiltonian_terms(system).coupling_lists()
        laser = kinds == 1
        _COUPLINGS[key] = (
            rows[laser], cols[laser], vals[laser].real.copy(),
            rows[~laser], cols[~laser], vals[~laser],
        )
    return _COUPLINGS[key]


def _lab_rk4(psi0, pulse, system, steps, frozen_time):
    """Textbook RK4 with the dense Hamiltonian rebuilt at every stage."""
    tau = system.tau
    h = tau / steps
    nd = hamiltonian_terms(system).n_dressed

    def rhs(t, y):
        tt = t if frozen_time is None else frozen_time
        return -1j * TWO_PI * (build_hamiltonian(min(tt, tau), pulse, system).entries @ y)

    y = np.array(psi0, dtype=np.complex128)
    pops = np.empty(steps + 1)
    norms = np.empty(steps + 1)
    pops[0] = float(np.sum(nd * np.abs(y) ** 2))
    norms[0] = np.linalg.norm(y)
    for s in range(steps):
        t = s * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        pops[s + 1] = float(np.sum(nd * np.abs(y) ** 2))
        norms[s + 1] = np.linalg.norm(y)
        if not np.isfinite(norms[s + 1]):
            break
    return y, pops, norms


def convergence_check(
    initial: StateVector,
    pulse: PulseParams,
    system: SystemParams,
    steps: int,
    method: str = "interaction",
) -> ConvergenceReport:
    """Step-halving study: errors at ``steps`` and ``2*steps`` against the next refinement."""
    if steps % 2:
        raise ValueError("steps must be even")
    psi = [evolve(initial, pulse, system, m * steps, method).final_state.amps for m in (1, 2, 4)]
    return ConvergenceReport(
        steps, float(np.linalg.norm(psi[0] - psi[1])), float(np.linalg.norm(psi[1] - psi[2]))
    )


def exact_constant_evolution(initial: StateVector, pulse: PulseParams, system: SystemParams, t_frozen: float) -> StateVector:
    """Matrix-exponential propagation with the envelopes frozen at ``t_frozen``."""
    from scipy.linalg import expm

    h = build_hamiltonian(t_frozen, pulse, system).entries
    return StateVector(DIMS, expm(-1j * TWO_PI * system.tau * h) @ initial.amps)


def magnus_reference(initial: StateVector, pulse: PulseParams, system: SystemParams, steps: int) -> StateVector:
    """Second-order exponential-midpoint propagation, an independent oracle."""
    from scipy.linalg import expm

    h = system.tau / steps
    psi = np.array(initial.amps)
    for s in range(steps):
        hm = build_hamiltonian((s + 0.5) * h, pulse, system).entries
        psi = expm(-1j * TWO_PI * h * hm) @ psi
    return StateVector(DIMS, psi)


__all__ = [
    "Trajectory",
    "ConvergenceReport",
    "IntegrationError",
    "evolve",
    "convergence_check",
    "default_steps",
    "exact_constant_evolution",
    "magnus_reference",
]
