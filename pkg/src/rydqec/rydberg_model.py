"""Three-ion Hamiltonian for microwave-dressed Rydberg ions.

Units: energies in V (the nearest-neighbour dressed interaction), time in
2*pi/V. The Schrodinger equation therefore reads d psi/dt = -2*pi*i H psi and
a decay rate gamma quoted in V/2*pi removes population at rate gamma per unit
of code time.

Per-ion levels are ordered (|0>, |1>, |D->, |D+>) and labelled 0..3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quantum_core import Operator, StateVector

GROUND, ONE, D_MINUS, D_PLUS = 0, 1, 2, 3
N_IONS = 3
DIMS = (4, 4, 4)
DIM = 64

# interaction-pair weight: ordered-pair reading of the i != j sum gives each
# unordered pair a net V_ij/2; the unordered reading gives V_ij/4
PAIR_WEIGHTS = {"ordered": 0.5, "unordered": 0.25}

LEVELS = np.array(list(itertools.product(range(4), repeat=N_IONS)), dtype=np.int64)
COMPUTATIONAL = np.array(
    [int(np.ravel_multi_index(b, DIMS)) for b in itertools.product((0, 1), repeat=N_IONS)]
)
BITSTRINGS = [
    "".join(map(str, b)) for b in itertools.product((0, 1), repeat=N_IONS)
]


@dataclass(frozen=True)
class PulseParams:
    """Optimizable pulse triple, all in units of V."""

    omega0: float
    delta0: float
    Delta0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.omega0, self.delta0, self.Delta0], dtype=float)

    @classmethod
    def from_array(cls, x) -> PulseParams:
        return cls(float(x[0]), float(x[1]), float(x[2]))


BOUNDS = ((0.0, 4.0), (0.0, 10.0), (-10.0, 10.0))


@dataclass(frozen=True)
class SystemParams:
    """Fixed physical context of a gate.

    tau is in 2*pi/V, omega_mw in V, gamma in V/2*pi and alpha = V13/V.
    """

    tau: float
    omega_mw: float = 20.0
    gamma: float = 0.0
    alpha: float = 0.125
    n_ions: int = N_IONS
    pair_convention: str = field(default="ordered")

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.n_ions != N_IONS:
            raise ValueError("only three-ion chains are modelled")
        if self.pair_convention not in PAIR_WEIGHTS:
            raise ValueError(f"unknown pair convention {self.pair_convention!r}")


def interaction_matrix(alpha: float) -> np.ndarray:
    """Symmetric V_ij in units of V: V12 = V23 = 1, V13 = alpha."""
    v = np.zeros((3, 3))
    v[0, 1] = v[1, 0] = 1.0
    v[1, 2] = v[2, 1] = 1.0
    v[0, 2] = v[2, 0] = alpha
    return v


def pulse_envelope(t: float, p: PulseParams, sys: SystemParams) -> tuple[float, float]:
    """Laser Rabi frequency and detuning at time t."""
    if t < 0 or t > sys.tau * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {sys.tau}]")
    s2 = np.sin(np.pi * t / sys.tau) ** 2
    return p.omega0 * s2, p.delta0 - p.Delta0 * s2


def integrated_detuning(t, p: PulseParams, tau: float):
    """Closed form of the integral of delta_L from 0 to t."""
    return p.delta0 * t - p.Delta0 * (t / 2 - tau / (4 * np.pi) * np.sin(2 * np.pi * t / tau))


@dataclass(frozen=True, eq=False)
class HamiltonianTerms:
    """Time-independent pieces of H(t).

    H(t) = diag(n_dressed * Delta_L(t) + static) + Omega_L(t) * laser + flip.
    """

    n_dressed: np.ndarray  # number of ions in D+ or D- per basis state
    static: np.ndarray  # microwave splitting, sigma_z sigma_z and decay (complex)
    laser: np.ndarray  # coefficient of Omega_L(t)
    flip: np.ndarray  # sigma_y sigma_y exchange, constant in time

    def coupling_lists(self):
        """Sparse (rows, cols, vals, is_laser) of the off-diagonal part."""
        rows, cols, vals, kinds = [], [], [], []
        for mat, kind in ((self.laser, 1), (self.flip, 0)):
            r, c = np.nonzero(mat)
            rows.append(r)
            cols.append(c)
            vals.append(mat[r, c])
            kinds.append(np.full(r.size, kind, dtype=np.int64))
        return (
            np.concatenate(rows).astype(np.int64),
            np.concatenate(cols).astype(np.int64),
            np.concatenate(vals).astype(np.complex128),
            np.concatenate(kinds),
        )


def decay_rate_in_v(gamma: float) -> float:
    """Convert gamma from V/2pi units to the gamma_R entering H (units of V)."""
    return gamma / (2 * np.pi)


def _sigma_z_values() -> np.ndarray:
    return np.where(LEVELS == D_PLUS, 1.0, np.where(LEVELS == D_MINUS, -1.0, 0.0))


@lru_cache(maxsize=64)
def _terms(omega_mw: float, gamma: float, alpha: float, pair_weight: float) -> HamiltonianTerms:
    n_dressed = np.sum(LEVELS >= D_MINUS, axis=1).astype(float)
    zv = _sigma_z_values()
    v = interaction_matrix(alpha)
    pairs = [(0, 1), (1, 2), (0, 2)]

    static = (omega_mw / 2) * zv.sum(axis=1) + 0j
    for i, j in pairs:
        static += pair_weight * v[i, j] * zv[:, i] * zv[:, j]
    # gamma in V/2pi is gamma/(2pi) in units of V
    static -= 0.5j * decay_rate_in_v(gamma) * n_dressed

    laser = np.zeros((DIM, DIM))
    flip = np.zeros((DIM, DIM), dtype=np.complex128)
    g = 1.0 / (2 * np.sqrt(2.0))
    strides = (16, 4, 1)
    for k, lv in enumerate(LEVELS):
        for i in range(N_IONS):
            if lv[i] == ONE:
                for d in (D_MINUS, D_PLUS):
                    m = k + (d - ONE) * strides[i]
                    laser[k, m] = laser[m, k] = g
        for i, j in pairs:
            if lv[i] >= D_MINUS and lv[j] >= D_MINUS:
                # sigma_y = i|D-><D+| - i|D+><D-| flips D+ <-> D-
                m = k + (5 - 2 * lv[i]) * strides[i] + (5 - 2 * lv[j]) * strides[j]
                fi = 1j if lv[i] == D_PLUS else -1j
                fj = 1j if lv[j] == D_PLUS else -1j
                flip[m, k] += pair_weight * v[i, j] * fi * fj
    for arr in (n_dressed, static, laser, flip):
        arr.setflags(write=False)
    return HamiltonianTerms(n_dressed, static, laser, flip)


def hamiltonian_terms(sys: SystemParams) -> HamiltonianTerms:
    return _terms(
        float(sys.omega_mw), float(sys.gamma), float(sys.alpha), PAIR_WEIGHTS[sys.pair_convention]
    )


def build_hamiltonian(t: float, p: PulseParams, sys: SystemParams) -> Operator:
    """Dense 64x64 H(t), non-Hermitian when gamma > 0."""
    omega_l, delta_l = pulse_envelope(t, p, sys)
    terms = hamiltonian_terms(sys)
    h = np.diag(terms.n_dressed * delta_l + terms.static) + omega_l * terms.laser + terms.flip
    return Operator(h)


def anti_hermitian_part(h: Operator) -> Operator:
    return Operator((h.entries - h.entries.conj().T) / 2)


def register_index(levels) -> int:
    return int(np.ravel_multi_index(tuple(levels), DIMS))


def plus_state() -> StateVector:
    """|+++> restricted to the qubit levels of each ion."""
    v = np.zeros(4, dtype=np.complex128)
    v[GROUND] = v[ONE] = 1 / np.sqrt(2)
    return StateVector.product([v, v, v])


def swap_outer_ions() -> np.ndarray:
    """Permutation matrix exchanging ions 1 and 3."""
    perm = np.array([register_index((lv[2], lv[1], lv[0])) for lv in LEVELS])
    p = np.zeros((DIM, DIM))
    p[perm, np.arange(DIM)] = 1.0
    return p


def tau_to_us(tau: float, v_mhz: float = 25.0) -> float:
    """Gate time in microseconds for V = 2*pi * v_mhz MHz."""
    return tau / v_mhz


def us_to_tau(t_us: float, v_mhz: float = 25.0) -> float:
    return t_us * v_mhz


def gamma_to_mhz(gamma: float, v_mhz: float = 25.0) -> float:
    """Decay rate in MHz for gamma given in units of V/2*pi."""
    return gamma * v_mhz
