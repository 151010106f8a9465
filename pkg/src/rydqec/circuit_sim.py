"""Qubit circuits, dense state-vector execution and Pauli fault machinery.

States are held as arrays of shape ``(B, 2, ..., 2)``: a batch of B
register states, qubit 0 on the first register axis. Gates act in place on
strided views, so no operator is ever materialized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .quantum_core import StateVector

ARITY = {
    "H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1,
    "CNOT": 2, "CZ": 2, "SWAP": 2,
    "CCZ": 3,
    "RESET0": 1, "RESETplus": 1,
}
RESETS = ("RESET0", "RESETplus")
NOISE_CLASSES = ("none", "two_nn", "two_nnn", "three")
INV_SQRT2 = 1 / np.sqrt(2.0)


class CircuitError(ValueError):
    """Malformed circuit or an illegal reset."""


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[int, ...]
    noise_class: str = "none"

    def __post_init__(self) -> None:
        if self.kind not in ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        q = tuple(int(x) for x in self.qubits)
        object.__setattr__(self, "qubits", q)
        if len(q) != ARITY[self.kind]:
            raise CircuitError(f"{self.kind} takes {ARITY[self.kind]} qubits, got {q}")
        if len(set(q)) != len(q):
            raise CircuitError(f"{self.kind} addresses a qubit twice: {q}")
        if self.noise_class not in NOISE_CLASSES:
            raise CircuitError(f"unknown noise class {self.noise_class!r}")

    def to_text(self) -> str:
        return " ".join([self.kind, *map(str, self.qubits), self.noise_class])


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()
    labels: tuple[tuple[str, int], ...] = ()
    ancillas: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "labels", tuple((str(k), int(v)) for k, v in self.labels))
        object.__setattr__(self, "ancillas", tuple(sorted(int(a) for a in self.ancillas)))
        anc = set(self.ancillas)
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"qubit {q} out of range in {op}")
            if op.kind in RESETS and op.qubits[0] not in anc:
                raise CircuitError(f"RESET on non-ancilla qubit {op.qubits[0]}")

    @property
    def label_map(self) -> dict[str, int]:
        return dict(self.labels)

    def count(self, kind: str) -> int:
        return sum(op.kind == kind for op in self.ops)

    def noisy_indices(self) -> list[int]:
        return [k for k, op in enumerate(self.ops) if op.noise_class != "none"]

    def without_noise(self) -> Circuit:
        return replace(self, ops=tuple(replace(op, noise_class="none") for op in self.ops))

    def __add__(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise CircuitError("register sizes differ")
        labels = dict(self.labels)
        labels.update(dict(other.labels))
        return Circuit(
            self.n_qubits, self.ops + other.ops, tuple(labels.items()),
            tuple(set(self.ancillas) | set(other.ancillas)),
        )

    def to_text(self) -> str:
        lines = [f"# qubits {self.n_qubits}"]
        lines += [f"# label {k} {v}" for k, v in self.labels]
        if self.ancillas:
            lines.append("# ancillas " + " ".join(map(str, self.ancillas)))
        lines += [op.to_text() for op in self.ops]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        n = None
        labels: list[tuple[str, int]] = []
        ancillas: list[int] = []
        ops: list[GateOp] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "#":
                if parts[1] == "qubits":
                    n = int(parts[2])
                elif parts[1] == "label":
                    labels.append((parts[2], int(parts[3])))
                elif parts[1] == "ancillas":
                    ancillas = [int(x) for x in parts[2:]]
                continue
            if len(parts) < 3:
                raise CircuitError(f"line {lineno}: expected 'KIND q.. NOISECLASS'")
            ops.append(GateOp(parts[0], tuple(int(x) for x in parts[1:-1]), parts[-1]))
        if n is None:
            raise CircuitError("missing '# qubits N' header")
        return cls(n, tuple(ops), tuple(labels), tuple(ancillas))


# --- noise ----------------------------------------------------------------


def fidelity_to_error_prob(fidelity: float, n: int) -> float:
    """Pauli-error probability of an n-qubit depolarizing gate with the given fidelity."""
    if not 0 < fidelity <= 1:
        raise ValueError(f"fidelity {fidelity} outside (0, 1]")
    return (2**n + 1) / 2**n * (1 - fidelity)


@dataclass(frozen=True)
class NoiseModel:
    p2_nn: float = 3.125e-3
    p2_nnn: float = 1.738e-2
    p3: float = 2.903e-2
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.lam <= 1:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        for p in (self.p2_nn, self.p2_nnn, self.p3):
            if not 0 <= self.lam * p <= 1:
                raise ValueError("scaled error probability outside [0, 1]")

    def prob(self, noise_class: str) -> float:
        base = {"none": 0.0, "two_nn": self.p2_nn, "two_nnn": self.p2_nnn, "three": self.p3}[noise_class]
        return self.lam * base

    def scaled(self, lam: float) -> NoiseModel:
        return replace(self, lam=lam)


def nontrivial_paulis(n: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n) if set(p) != {"I"}]


@dataclass(frozen=True)
class FaultLocation:
    op_index: int
    pauli: str

    def __post_init__(self) -> None:
        if set(self.pauli) <= {"I"}:
            raise ValueError("fault Pauli must be nontrivial")


def enumerate_faults(circuit: Circuit) -> list[FaultLocation]:
    out = []
    for k in circuit.noisy_indices():
        for p in nontrivial_paulis(len(circuit.ops[k].qubits)):
            out.append(FaultLocation(k, p))
    return out


def pauli_ops(pauli: str, qubits: Sequence[int]) -> list[GateOp]:
    return [GateOp(p, (q,)) for p, q in zip(pauli, qubits) if p != "I"]


def inject(circuit: Circuit, fault: FaultLocation) -> Circuit:
    """Noise-free copy of ``circuit`` with the fault Pauli right after its gate."""
    if not 0 <= fault.op_index < len(circuit.ops):
        raise IndexError(f"op index {fault.op_index} out of range")
    op = circuit.ops[fault.op_index]
    if len(fault.pauli) != len(op.qubits):
        raise ValueError(f"Pauli {fault.pauli} does not match arity of {op}")
    ops = list(circuit.without_noise().ops)
    ops[fault.op_index + 1:fault.op_index + 1] = pauli_ops(fault.pauli, op.qubits)
    return replace(circuit, ops=tuple(ops))


# --- dense execution ------------------------------------------------------


def _ix(n: int, fixed: dict[int, int]) -> tuple:
    return (slice(None),) + tuple(fixed.get(q, slice(None)) for q in range(n))


def _swap_slices(state: np.ndarray, a: tuple, b: tuple) -> None:
    tmp = state[a].copy()
    state[a] = state[b]
    state[b] = tmp


def apply_gate(state: np.ndarray, kind: str, qubits: Sequence[int]) -> None:
    """Apply a unitary gate in place to a batch of register states."""
    n = state.ndim - 1
    q = qubits
    if kind == "X":
        _swap_slices(state, _ix(n, {q[0]: 0}), _ix(n, {q[0]: 1}))
    elif kind == "Z":
        state[_ix(n, {q[0]: 1})] *= -1
    elif kind == "Y":
        i0, i1 = _ix(n, {q[0]: 0}), _ix(n, {q[0]: 1})
        tmp = state[i0].copy()
        state[i0] = -1j * state[i1]
        state[i1] = 1j * tmp
    elif kind == "S":
        state[_ix(n, {q[0]: 1})] *= 1j
    elif kind == "H":
        i0, i1 = _ix(n, {q[0]: 0}), _ix(n, {q[0]: 1})
        a = state[i0].copy()
        b = state[i1]
        state[i0] = (a + b) * INV_SQRT2
        state[i1] = (a - state[i1]) * INV_SQRT2
    elif kind == "CNOT":
        _swap_slices(state, _ix(n, {q[0]: 1, q[1]: 0}), _ix(n, {q[0]: 1, q[1]: 1}))
    elif kind == "CZ":
        state[_ix(n, {q[0]: 1, q[1]: 1})] *= -1
    elif kind == "CCZ":
        state[_ix(n, {q[0]: 1, q[1]: 1, q[2]: 1})] *= -1
    elif kind == "SWAP":
        _swap_slices(state, _ix(n, {q[0]: 0, q[1]: 1}), _ix(n, {q[0]: 1, q[1]: 0}))
    else:
        raise CircuitError(f"{kind} is not a unitary gate")


def apply_pauli_rows(state: np.ndarray, rows: np.ndarray, pauli: str, qubits: Sequence[int]) -> None:
    """Apply a Pauli string to selected batch rows only."""
    if len(rows) == 0:
        return
    sub = state[rows]
    for p, q in zip(pauli, qubits):
        if p != "I":
            apply_gate(sub, p, (q,))
    state[rows] = sub


def reset_branches(state: np.ndarray, qubit: int, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """The two Kraus branches of a reset: (P0 psi, X P1 psi) or (P+ psi, Z P- psi)."""
    n = state.ndim - 1
    i0, i1 = _ix(n, {qubit: 0}), _ix(n, {qubit: 1})
    a = state.copy()
    b = np.zeros_like(state)
    if kind == "RESET0":
        a[i1] = 0
        b[i0] = state[i1]
    else:
        plus = (state[i0] + state[i1]) * INV_SQRT2
        minus = (state[i0] - state[i1]) * INV_SQRT2
        a[i0] = plus * INV_SQRT2
        a[i1] = plus * INV_SQRT2
        b[i0] = minus * INV_SQRT2
        b[i1] = minus * INV_SQRT2
    return a, b


def _norms2(state: np.ndarray) -> np.ndarray:
    flat = state.reshape(state.shape[0], -1)
    return np.einsum("ij,ij->i", flat.conj(), flat).real


def _to_batch(initial: StateVector, n: int) -> np.ndarray:
    if initial.dims != (2,) * n:
        raise CircuitError(f"initial state dims {initial.dims} do not match {n} qubits")
    return np.array(initial.amps, dtype=np.complex128).reshape((1,) + (2,) * n)


def _reduced_purity(state: np.ndarray, qubit: int) -> float:
    t = np.moveaxis(state[0], qubit, 0).reshape(2, -1)
    rho = t @ t.conj().T
    rho = rho / np.trace(rho).real
    return float(np.real(np.trace(rho @ rho)))


def run(circuit: Circuit, initial: StateVector, purity_tol: float = 1e-9) -> StateVector:
    """Noise-free execution; a RESET must meet an unentangled ancilla."""
    n = circuit.n_qubits
    state = _to_batch(initial, n)
    for op in circuit.ops:
        if op.kind in RESETS:
            q = op.qubits[0]
            if _reduced_purity(state, q) < 1 - purity_tol:
                raise CircuitError(f"RESET on entangled ancilla {q}")
            a, b = reset_branches(state, q, op.kind)
            na, nb = _norms2(a)[0], _norms2(b)[0]
            # product state: both branches carry the same register state up to scale
            keep = a if na >= nb else b
            total = na + nb
            state = keep * np.sqrt(total / max(na, nb))
        else:
            apply_gate(state, op.kind, op.qubits)
    return StateVector((2,) * n, state.reshape(-1))


def run_noisy(circuit: Circuit, initial: StateVector, noise: NoiseModel, seed) -> StateVector:
    """One Monte Carlo trajectory of the per-gate depolarizing channel.

    After each noisy gate a uniformly drawn nontrivial Pauli string hits its
    qubits with probability lambda * p. Resets measure and re-initialize.
    """
    rng = np.random.default_rng(seed)
    n = circuit.n_qubits
    state = _to_batch(initial, n)
    for op in circuit.ops:
        if op.kind in RESETS:
            a, b = reset_branches(state, op.qubits[0], op.kind)
            na, nb = _norms2(a)[0], _norms2(b)[0]
            pick_a = rng.random() * (na + nb) < na
            state = a / np.sqrt(na) if pick_a else b / np.sqrt(nb)
            continue
        apply_gate(state, op.kind, op.qubits)
        p = noise.prob(op.noise_class)
        if p > 0 and rng.random() < p:
            paulis = nontrivial_paulis(len(op.qubits))
            apply_pauli_rows(state, np.array([0]), paulis[rng.integers(len(paulis))], op.qubits)
    return StateVector((2,) * n, state.reshape(-1))


@dataclass
class BranchState:
    """Unnormalized Kraus branches; ``owner[i]`` is the trajectory branch i belongs to."""

    state: np.ndarray
    owner: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def run_branching(
    circuit: Circuit,
    bs: BranchState,
    start: int = 0,
    injections: dict[int, list[tuple[np.ndarray, str]]] | None = None,
    prune: float = 1e-14,
) -> BranchState:
    """Exact execution with resets expanded into Kraus branches.

    ``injections`` maps an op index to (owners, pauli) pairs applied right
    after that op to every branch whose owner is listed.
    """
    state, owner = bs.state, bs.owner
    ops = circuit.ops
    for k in range(start, len(ops)):
        op = ops[k]
        if op.kind in RESETS:
            a, b = reset_branches(state, op.qubits[0], op.kind)
            state = np.concatenate([a, b])
            owner = np.concatenate([owner, owner])
            keep = _norms2(state) > prune
            state, owner = state[keep], owner[keep]
        else:
            apply_gate(state, op.kind, op.qubits)
        if injections and k in injections:
            for owners, pauli in injections[k]:
                rows = np.nonzero(np.isin(owner, owners))[0]
                apply_pauli_rows(state, rows, pauli, op.qubits)
    return BranchState(state, owner)


def parity_signs(n: int, qubits: Iterable[int]) -> np.ndarray:
    """(-1)^(sum of bits on ``qubits``) as a register-shaped array."""
    sign = np.ones((2,) * n)
    for q in qubits:
        shape = [1] * n
        shape[q] = 2
        sign = sign * np.array([1.0, -1.0]).reshape(shape)
    return sign


def expectation_z(state: np.ndarray, n: int, qubits: Iterable[int]) -> np.ndarray:
    """Unnormalized <psi|Z..Z|psi> per batch row."""
    s = parity_signs(n, qubits).reshape(-1)
    return (np.abs(state.reshape(state.shape[0], -1)) ** 2) @ s


def expectation_x(state: np.ndarray, n: int, qubits: Iterable[int]) -> np.ndarray:
    flipped = state.copy()
    for q in qubits:
        apply_gate(flipped, "X", (q,))
    flat = state.reshape(state.shape[0], -1)
    return np.einsum("ij,ij->i", flat.conj(), flipped.reshape(state.shape[0], -1)).real


# --- density-matrix oracle (small registers) -----------------------------


def _pauli_matrix(p: str) -> np.ndarray:
    from .quantum_core import PAULIS

    m = np.ones((1, 1), dtype=complex)
    for c in p:
        m = np.kron(m, PAULIS[c])
    return m


def depolarize_density(rho: np.ndarray, n: int, qubits: Sequence[int], p: float) -> np.ndarray:
    """(1-p) rho + p/(4^k-1) sum_P P rho P over nontrivial Paulis P on ``qubits``."""
    if n > 6:
        raise ValueError("density-matrix oracle limited to 6 qubits")
    from .quantum_core import embed_local

    acc = np.zeros_like(rho)
    paulis = nontrivial_paulis(len(qubits))
    for ps in paulis:
        full = embed_local(_pauli_matrix(ps), qubits, (2,) * n).entries
        acc += full @ rho @ full.conj().T
    return (1 - p) * rho + p / len(paulis) * acc


def gate_matrix(op: GateOp, n: int) -> np.ndarray:
    eye = np.eye(2**n, dtype=complex).reshape((2**n,) + (2,) * n)
    apply_gate(eye, op.kind, op.qubits)
    return eye.reshape(2**n, 2**n).T


def run_density(circuit: Circuit, rho: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Exact density-matrix execution of a reset-free circuit."""
    n = circuit.n_qubits
    if n > 6:
        raise ValueError("density-matrix oracle limited to 6 qubits")
    for op in circuit.ops:
        if op.kind in RESETS:
            raise CircuitError("density oracle does not model resets")
        u = gate_matrix(op, n)
        rho = u @ rho @ u.conj().T
        p = noise.prob(op.noise_class)
        if p > 0:
            rho = depolarize_density(rho, n, op.qubits, p)
    return rho


# --- Pauli frames ------------------------------------------------------------
#
# A frame is the Pauli that separates the actual state from the noise-free
# one. Clifford gates conjugate it. CCZ is handled exactly when its first two
# qubits hold |0> in the noise-free run (syndrome controls): the controls are
# then in definite basis states and CCZ adds Z to the third qubit iff both
# controls are flipped. Resets must likewise meet a definite basis state, and
# then simply clear the frame on that qubit. check_frame_preconditions
# verifies both conditions on a dense noise-free run.


def frame_step(x: np.ndarray, z: np.ndarray, op: GateOp) -> None:
    """Conjugate frames of shape (n_qubits, batch) through one op, in place."""
    q = op.qubits
    k = op.kind
    if k == "H":
        x[q[0]], z[q[0]] = z[q[0]].copy(), x[q[0]].copy()
    elif k == "S":
        z[q[0]] ^= x[q[0]]
    elif k == "CNOT":
        c, t = q
        x[t] ^= x[c]
        z[c] ^= z[t]
    elif k == "CZ":
        a, b = q
        z[a] ^= x[b]
        z[b] ^= x[a]
    elif k == "SWAP":
        a, b = q
        x[[a, b]] = x[[b, a]]
        z[[a, b]] = z[[b, a]]
    elif k == "CCZ":
        a, b, t = q
        z[t] ^= x[a] & x[b]
    elif k in RESETS:
        x[q[0]] = False
        z[q[0]] = False
    elif k in ("X", "Y", "Z"):
        pass
    else:
        raise CircuitError(f"no frame rule for {k}")


def pauli_bits(index: np.ndarray, arity: int) -> tuple[np.ndarray, np.ndarray]:
    """Map codes 1..4^arity-1 to per-qubit (x, z) bits, shape (arity, len(index))."""
    v = np.asarray(index)
    xs, zs = [], []
    for j in range(arity):
        d = (v >> (2 * (arity - 1 - j))) & 3
        xs.append((d & 1).astype(bool))
        zs.append((d >> 1).astype(bool))
    return np.array(xs), np.array(zs)


def pauli_letters(code: int, arity: int) -> str:
    x, z = pauli_bits(np.array([code]), arity)
    return "".join("IXZY"[int(a) + 2 * int(b)] for a, b in zip(x[:, 0], z[:, 0]))


def letters_code(pauli: str) -> int:
    code = 0
    for c in pauli:
        code = 4 * code + "IXZY".index(c)
    return code


def run_frames(
    circuit: Circuit,
    x: np.ndarray,
    z: np.ndarray,
    injections: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> None:
    """Propagate a batch of frames through ``circuit``.

    ``injections[k] = (columns, xbits, zbits)`` XORs fixed faults after op k.
    With ``noise`` every noisy op draws depolarizing faults per column.
    """
    batch = x.shape[1]
    for k, op in enumerate(circuit.ops):
        frame_step(x, z, op)
        if injections and k in injections:
            cols, xb, zb = injections[k]
            for j, qq in enumerate(op.qubits):
                x[qq, cols] ^= xb[j]
                z[qq, cols] ^= zb[j]
        if noise is not None:
            p = noise.prob(op.noise_class)
            if p <= 0:
                continue
            hit = np.nonzero(rng.random(batch) < p)[0]
            if hit.size == 0:
                continue
            a = len(op.qubits)
            xb, zb = pauli_bits(rng.integers(1, 4**a, size=hit.size), a)
            for j, qq in enumerate(op.qubits):
                x[qq, hit] ^= xb[j]
                z[qq, hit] ^= zb[j]


def check_frame_preconditions(circuit: Circuit, initial: StateVector, tol: float = 1e-9) -> None:
    """Raise unless CCZ controls hold |0> and resets meet basis states in the noise-free run."""
    n = circuit.n_qubits
    state = _to_batch(initial, n)
    for k, op in enumerate(circuit.ops):
        if op.kind == "CCZ":
            for qq in op.qubits[:2]:
                if _norms2(state[_ix(n, {qq: 1})][None])[0] > tol:
                    raise CircuitError(f"op {k}: CCZ control {qq} not in |0>")
        if op.kind in RESETS:
            p1 = _norms2(state[_ix(n, {op.qubits[0]: 1})][None])[0]
            if tol < p1 < 1 - tol:
                raise CircuitError(f"op {k}: reset on qubit {op.qubits[0]} not in a basis state")
            a, b = reset_branches(state, op.qubits[0], op.kind)
            state = a if _norms2(a)[0] >= _norms2(b)[0] else b
        else:
            apply_gate(state, op.kind, op.qubits)
