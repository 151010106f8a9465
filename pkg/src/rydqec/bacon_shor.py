"""Nine-qubit Bacon-Shor code and its measurement-free QEC cycle on a linear chain.

Data qubits are numbered 1..9 row by row on a 3x3 lattice. Syndromes are
extracted onto ancillas and corrected coherently with CCZ gates, so the
cycle contains no measurements; ancillas are reset between the X and Z
rounds.

The cycle is routed onto a chain where two-qubit gates reach distance 2 and
CCZ acts on three consecutive sites. Only ancillas move. A syndrome ancilla
passing a data qubit is exchanged either with a plain SWAP or with the
helper-mediated FT gadget, as chosen by a per-exchange policy.
"""

from __future__ import annotations

import copy
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .circuit_sim import Circuit, CircuitError, GateOp, run
from .quantum_core import StateVector

# --- code definition -------------------------------------------------------

DATA = tuple(range(1, 10))
X_STABILIZERS = {
    "SX1": (1, 2, 4, 5, 7, 8),
    "SX2": (2, 3, 5, 6, 8, 9),
    "SX3": (1, 3, 4, 6, 7, 9),
}
Z_STABILIZERS = {
    "SZ1": (1, 2, 3, 4, 5, 6),
    "SZ2": (4, 5, 6, 7, 8, 9),
    "SZ3": (1, 2, 3, 7, 8, 9),
}
# data coupling order: gauge partners adjacent
READOUT_ORDER = {
    "SZ1": ((1, 4), (2, 5), (3, 6)),
    "SZ2": ((4, 7), (5, 8), (6, 9)),
    "SZ3": ((1, 7), (2, 8), (3, 9)),
    "SX1": ((1, 2), (4, 5), (7, 8)),
    "SX2": ((2, 3), (5, 6), (8, 9)),
    "SX3": ((1, 3), (4, 6), (7, 9)),
}
X_GAUGES = tuple((j, j + 1) for j in (1, 2, 4, 5, 7, 8))
Z_GAUGES = tuple((i, i + 3) for i in range(1, 7))
X_LOGICAL = (1, 4, 7)
Z_LOGICAL = (1, 2, 3)

# (syndrome pair, representative data qubit) per row (X corrections) or column (Z corrections)
X_CORRECTIONS = (((1, 3), 1), ((1, 2), 4), ((2, 3), 7))
Z_CORRECTIONS = (((1, 3), 1), ((1, 2), 2), ((2, 3), 3))

LAYOUT = ("d1", "d2", "d3", "A1", "s1", "d4", "d5", "d6", "A2", "s2", "d7", "d8", "d9", "A3", "s3")
SYNDROMES = ("s1", "s2", "s3")
HELPERS = ("A1", "A2", "A3")


def pauli_string(kind: str, support: Iterable[int], n: int = 9) -> str:
    s = ["I"] * n
    for q in support:
        s[q - 1] = kind
    return "".join(s)


def pauli_product(a: str, b: str) -> str:
    """Product of two Pauli strings, ignoring the global phase."""
    table = {
        ("I", "I"): "I", ("I", "X"): "X", ("I", "Y"): "Y", ("I", "Z"): "Z",
        ("X", "X"): "I", ("Y", "Y"): "I", ("Z", "Z"): "I",
        ("X", "Y"): "Z", ("Y", "Z"): "X", ("Z", "X"): "Y",
        ("Y", "X"): "Z", ("Z", "Y"): "X", ("X", "Z"): "Y",
    }
    return "".join(table.get((p, q)) or table[(q, p)] for p, q in zip(a, b))


def commutes(a: str, b: str) -> bool:
    anti = sum(p != "I" and q != "I" and p != q for p, q in zip(a, b))
    return anti % 2 == 0


@dataclass(frozen=True)
class CodeDefinition:
    stabilizers: dict = field(default_factory=lambda: {
        **{k: pauli_string("X", v) for k, v in X_STABILIZERS.items()},
        **{k: pauli_string("Z", v) for k, v in Z_STABILIZERS.items()},
    })
    gauges: tuple = field(default_factory=lambda: tuple(
        [pauli_string("X", g) for g in X_GAUGES] + [pauli_string("Z", g) for g in Z_GAUGES]
    ))
    x_logical: str = pauli_string("X", X_LOGICAL)
    z_logical: str = pauli_string("Z", Z_LOGICAL)


CODE = CodeDefinition()


# --- circuit fragments (connectivity-free) -------------------------------


def _positions(data: dict[int, int] | None) -> dict[int, int]:
    return {q: q - 1 for q in DATA} if data is None else dict(data)


def encode(state: str, n_qubits: int = 9, data: dict[int, int] | None = None, ancillas: Sequence[int] = ()) -> Circuit:
    """Noise-free encoder: row GHZ states plus transversal H for zero_L, column GHZ for plus_L."""
    pos = _positions(data)
    if state == "zero_L":
        groups = [(1, 2, 3), (4, 5, 6), (7, 8, 9)]
    elif state == "plus_L":
        groups = [(1, 4, 7), (2, 5, 8), (3, 6, 9)]
    else:
        raise ValueError(f"unknown logical state {state!r}")
    ops = []
    for a, b, c in groups:
        ops += [GateOp("H", (pos[a],)), GateOp("CNOT", (pos[a], pos[b])), GateOp("CNOT", (pos[a], pos[c]))]
    if state == "zero_L":
        ops += [GateOp("H", (pos[q],)) for q in DATA]
    return Circuit(n_qubits, tuple(ops), ancillas=tuple(ancillas))


def stabilizer_readout(which: str, ancilla: int, data: dict[int, int] | None = None,
                       n_qubits: int = 10, noise_class: str = "none") -> Circuit:
    """Parity of ``which`` onto an ancilla that starts in |0>; flagged means |1>."""
    if which not in READOUT_ORDER:
        raise ValueError(f"unknown stabilizer {which!r}")
    pos = _positions(data)
    order = [q for pair in READOUT_ORDER[which] for q in pair]
    ops = []
    if which.startswith("SX"):
        ops.append(GateOp("H", (ancilla,)))
        ops += [GateOp("CNOT", (ancilla, pos[q]), noise_class) for q in order]
        ops.append(GateOp("H", (ancilla,)))
    else:
        ops += [GateOp("CNOT", (pos[q], ancilla), noise_class) for q in order]
    return Circuit(n_qubits, tuple(ops), ancillas=(ancilla,))


def coherent_correction(error_type: str, syndromes: Sequence[int], data: dict[int, int] | None = None,
                        n_qubits: int = 12, noise_class: str = "none") -> Circuit:
    """CCZ-based feedback; ``syndromes`` holds the qubits of s1, s2, s3."""
    pos = _positions(data)
    ops = []
    if error_type == "Z_corr":
        for (a, b), rep in Z_CORRECTIONS:
            ops.append(GateOp("CCZ", (syndromes[a - 1], syndromes[b - 1], pos[rep]), noise_class))
    elif error_type == "X_corr":
        for (a, b), rep in X_CORRECTIONS:
            ops += [
                GateOp("H", (pos[rep],)),
                GateOp("CCZ", (syndromes[a - 1], syndromes[b - 1], pos[rep]), noise_class),
                GateOp("H", (pos[rep],)),
            ]
    else:
        raise ValueError(f"unknown correction type {error_type!r}")
    return Circuit(n_qubits, tuple(ops), ancillas=tuple(syndromes))


def swap_cnots(a: int, b: int) -> list[tuple[int, int]]:
    return [(a, b), (b, a), (a, b)]


def ft_swap_pairs(q1: int, q2: int, helper: int) -> list[tuple[int, int]]:
    """CNOT (control, target) list of the helper-mediated SWAP(q1, q2).

    The three SWAPs (helper,q1), (q1,q2), (q2,helper) compose to SWAP(q1,q2)
    whatever the helper holds. Each one starts on a blank qubit, so a
    correlated fault inside never copies onto both data carriers.
    """
    return swap_cnots(helper, q1) + swap_cnots(q1, q2) + swap_cnots(q2, helper)


def ft_swap(q1: int, q2: int, helper: int, n_qubits: int = 3, noise_class: str = "none") -> Circuit:
    ops = tuple(GateOp("CNOT", p, noise_class) for p in ft_swap_pairs(q1, q2, helper))
    circ = Circuit(n_qubits, ops, ancillas=(helper,))
    # the helper must come back as a product state on a clean input
    probe = StateVector.product([np.array([0.6, 0.8j])] * n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[:] = probe.amps
    t = amps.reshape((2,) * n_qubits)
    t = np.moveaxis(t, helper, 0).copy()
    t[1] = 0
    t = np.moveaxis(t, 0, helper)
    out = run(circ, StateVector((2,) * n_qubits, t.reshape(-1) / np.linalg.norm(t)))
    m = np.moveaxis(out.amps.reshape((2,) * n_qubits), helper, 0).reshape(2, -1)
    if np.linalg.matrix_rank(m, tol=1e-9) > 1:
        raise CircuitError("FT SWAP left the helper entangled")
    return circ


# --- chain routing ---------------------------------------------------------


def allowed(positions: Sequence[int]) -> bool:
    """Connectivity predicate: pairs at distance <= 2, triplets on consecutive sites."""
    if len(positions) == 1:
        return True
    if len(positions) == 2:
        return 1 <= abs(positions[0] - positions[1]) <= 2
    if len(positions) == 3:
        s = sorted(positions)
        return s[2] - s[0] == 2 and len(set(s)) == 3
    return False


def noise_class_for(positions: Sequence[int]) -> str:
    if len(positions) == 2:
        return "two_nn" if abs(positions[0] - positions[1]) == 1 else "two_nnn"
    if len(positions) == 3:
        return "three"
    return "none"


@dataclass(frozen=True)
class ChainLayout:
    order: tuple[str, ...] = LAYOUT

    def __post_init__(self) -> None:
        c = Counter(self.order)
        need = {f"d{q}" for q in DATA} | set(SYNDROMES)
        if any(v > 1 for v in c.values()) or not need <= set(c):
            raise ValueError("layout must contain d1..d9 and s1..s3 exactly once")
        if not any(lbl.startswith("A") for lbl in self.order):
            raise ValueError("layout needs at least one SWAP helper")

    @property
    def n_qubits(self) -> int:
        return len(self.order)

    @property
    def ancillas(self) -> tuple[int, ...]:
        return tuple(i for i, lbl in enumerate(self.order) if not lbl.startswith("d"))


@dataclass(frozen=True)
class QECCycle:
    circuit: Circuit
    initial: dict
    final: dict
    exchanges: dict  # key -> (first op index, end op index, ft)
    plain_keys: frozenset

    def cnot_count(self) -> int:
        return self.circuit.count("CNOT")

    def data_positions(self, final: bool = False) -> dict[int, int]:
        m = self.final if final else self.initial
        return {q: m[f"d{q}"] for q in DATA}

    def syndrome_positions(self, final: bool = False) -> list[int]:
        m = self.final if final else self.initial
        return [m[s] for s in SYNDROMES]

    def ancilla_positions(self, final: bool = False) -> list[int]:
        m = self.final if final else self.initial
        return sorted(v for k, v in m.items() if not k.startswith("d"))


class Router:
    """Tracks which label sits on which chain site and emits legal gates.

    ``plain`` holds the keys of syndrome/data exchanges done with a plain
    SWAP; ``plain_all`` makes every exchange plain (used for planning).
    """

    def __init__(self, layout: ChainLayout, plain: Iterable[str] = (), reach: int = 2, plain_all: bool = False):
        self.at = list(layout.order)
        self.layout = layout
        self.plain = frozenset(plain)
        self.plain_all = plain_all
        self.reach = reach
        self.ops: list[GateOp] = []
        self.exchanges: dict[str, tuple[int, int, bool]] = {}
        self._seen: Counter = Counter()
        self.stage = ""
        self.reset_sites: set[int] = set(layout.ancillas)

    def clone(self) -> Router:
        r = copy.copy(self)
        r.at = list(self.at)
        r.ops = list(self.ops)
        r.exchanges = dict(self.exchanges)
        r._seen = Counter(self._seen)
        r.reset_sites = set(self.reset_sites)
        return r

    def cost(self) -> tuple[int, int]:
        return len(self.ops), len(self.exchanges)

    def pos(self, label: str) -> int:
        return self.at.index(label)

    def emit(self, kind: str, labels: Sequence[str], noisy: bool = True) -> None:
        qs = tuple(self.pos(lbl) for lbl in labels)
        if not allowed(qs):
            raise CircuitError(f"connectivity violation: {kind} on sites {qs} ({labels})")
        self.ops.append(GateOp(kind, qs, noise_class_for(qs) if noisy else "none"))

    def _plain_swap(self, a: str, b: str) -> None:
        for c, t in swap_cnots(a, b):
            self.emit("CNOT", (c, t))
        i, j = self.pos(a), self.pos(b)
        self.at[i], self.at[j] = b, a

    def _nearest_helper(self, lo: int, hi: int) -> str:
        best = None
        for h in HELPERS:
            if h not in self.at:
                continue
            p = self.pos(h)
            d = lo - p if p < lo else p - hi
            if best is None or d < best[0]:
                best = (d, h)
        if best is None:
            raise CircuitError("no SWAP helper available")
        return best[1]

    def _bring_helper(self, lo: int, hi: int) -> str:
        """Move the nearest helper next to the sites lo..hi with plain SWAPs."""
        h = self._nearest_helper(lo, hi)
        while True:
            p = self.pos(h)
            if p == lo - 1 or p == hi + 1:
                return h
            step = 1 if p < lo else -1
            self._plain_swap(h, self.at[p + step])

    def ft_exchange(self, a: str, b: str) -> None:
        lo, hi = sorted((self.pos(a), self.pos(b)))
        if hi - lo != 1:
            raise CircuitError("FT exchange needs adjacent qubits")
        h = self._bring_helper(lo, hi)
        for c, t in ft_swap_pairs(a, b, h):
            self.emit("CNOT", (c, t))
        i, j = self.pos(a), self.pos(b)
        self.at[i], self.at[j] = b, a

    def exchange(self, s: str, d: str) -> None:
        """Exchange adjacent syndrome ancilla ``s`` and data qubit ``d``."""
        key = f"{self.stage}:{s}:{d}"
        self._seen[key] += 1
        key = f"{key}:{self._seen[key]}"
        ft = not self.plain_all and key not in self.plain
        if ft:
            lo, hi = sorted((self.pos(s), self.pos(d)))
            self._bring_helper(lo, hi)
            start = len(self.ops)
            self.ft_exchange(s, d)
        else:
            start = len(self.ops)
            self._plain_swap(s, d)
        self.exchanges[key] = (start, len(self.ops), ft)

    def step(self, mover: str, direction: int) -> None:
        other = self.at[self.pos(mover) + direction]
        if other.startswith("d"):
            if mover.startswith("d"):
                raise CircuitError("router never exchanges two data qubits")
            if mover.startswith("s"):
                self.exchange(mover, other)
                return
        self._plain_swap(mover, other)

    def approach(self, mover: str, target: str, reach: int) -> None:
        while True:
            d = self.pos(target) - self.pos(mover)
            if abs(d) <= reach:
                return
            self.step(mover, 1 if d > 0 else -1)

    def gather(self, a: str, b: str, target: str) -> None:
        """Place ``a``, ``b`` and ``target`` on three consecutive sites."""
        self.approach(a, target, 1)
        while True:
            lo, hi = sorted((self.pos(a), self.pos(target)))
            p = self.pos(b)
            if p == lo - 1 or p == hi + 1:
                return
            self.step(b, 1 if p < lo else -1)

    def circuit(self) -> Circuit:
        return Circuit(
            len(self.at), tuple(self.ops),
            tuple((lbl, i) for i, lbl in enumerate(self.layout.order)),
            tuple(self.reset_sites),
        )


def readout_sequences(which: str) -> list[tuple[int, ...]]:
    """All coupling orders that keep gauge partners adjacent."""
    out = []
    for perm in itertools.permutations(READOUT_ORDER[which]):
        for flips in itertools.product((False, True), repeat=3):
            seq = []
            for (a, b), f in zip(perm, flips):
                seq += [b, a] if f else [a, b]
            out.append(tuple(seq))
    return out


def _readout(r: Router, which: str, s: str, seq: Sequence[int]) -> None:
    r.stage = which
    xtype = which.startswith("SX")
    for k, q in enumerate(seq):
        d = f"d{q}"
        r.approach(s, d, r.reach)
        if xtype and k == 0:
            r.emit("H", (s,), noisy=False)
        r.emit("CNOT", (s, d) if xtype else (d, s))
    if xtype:
        r.emit("H", (s,), noisy=False)


def _ccz(r: Router, error_type: str, a: int, b: int, rep: int, first: int) -> None:
    r.stage = error_type
    sa, sb, d = f"s{a}", f"s{b}", f"d{rep}"
    if first == b:
        sa, sb = sb, sa
    r.gather(sa, sb, d)
    if error_type == "X_corr":
        r.emit("H", (d,), noisy=False)
    r.emit("CCZ", (f"s{a}", f"s{b}", d))
    if error_type == "X_corr":
        r.emit("H", (d,), noisy=False)


def _reset_ancillas(r: Router) -> None:
    for i, lbl in enumerate(r.at):
        if not lbl.startswith("d"):
            r.reset_sites.add(i)
            r.ops.append(GateOp("RESET0", (i,)))


@dataclass(frozen=True)
class CyclePlan:
    """Order of readouts (stabilizer, coupling sequence) and of corrections (pair, rep, first mover)."""

    x_round: tuple
    z_corr: tuple
    z_round: tuple
    x_corr: tuple


def _plan_round(r: Router, names: Sequence[str]) -> tuple:
    steps = []
    for which in names:
        s = SYNDROMES[int(which[-1]) - 1]
        best = None
        for seq in readout_sequences(which):
            trial = r.clone()
            _readout(trial, which, s, seq)
            if best is None or trial.cost() < best[0]:
                best = (trial.cost(), seq)
        _readout(r, which, s, best[1])
        steps.append((which, best[1]))
    return tuple(steps)


def _plan_correction(r: Router, error_type: str) -> tuple:
    table = Z_CORRECTIONS if error_type == "Z_corr" else X_CORRECTIONS
    best = None
    for order in itertools.permutations(table):
        trial = r.clone()
        chosen = []
        for (a, b), rep in order:
            pick = None
            for first in (a, b):
                t2 = trial.clone()
                _ccz(t2, error_type, a, b, rep, first)
                if pick is None or t2.cost() < pick[0]:
                    pick = (t2.cost(), first, t2)
            trial = pick[2]
            chosen.append((a, b, rep, pick[1]))
        if best is None or trial.cost() < best[0]:
            best = (trial.cost(), tuple(chosen), trial)
    r.__dict__.update(best[2].__dict__)
    return best[1]


def plan_cycle(layout: ChainLayout = ChainLayout(), reach: int = 2) -> CyclePlan:
    """Search readout and correction orders for the fewest gates with plain exchanges."""
    best = None
    for xs in itertools.permutations(("SX1", "SX2", "SX3")):
        r0 = Router(layout, reach=reach, plain_all=True)
        xr = _plan_round(r0, xs)
        zc = _plan_correction(r0, "Z_corr")
        _reset_ancillas(r0)
        for zs in itertools.permutations(("SZ1", "SZ2", "SZ3")):
            r = r0.clone()
            zr = _plan_round(r, zs)
            xc = _plan_correction(r, "X_corr")
            if best is None or r.cost() < best[0]:
                best = (r.cost(), CyclePlan(xr, zc, zr, xc))
    return best[1]


def build_qec_cycle(layout: ChainLayout = ChainLayout(), plain: Iterable[str] | None = None,
                    reach: int = 2, prefix: Sequence[tuple[str, str, bool]] = (),
                    plan: CyclePlan | None = None) -> QECCycle:
    """Route one full QEC round onto the chain.

    ``plain`` lists the syndrome/data exchanges done with plain SWAPs; None
    selects the certified default assignment. ``prefix`` holds extra
    (label, label, ft) data-data exchanges emitted first, which is how the
    negative control is built.
    """
    if plain is None:
        plain = default_plain_exchanges()
    if plan is None:
        plan = _cached_plan(layout, reach)
    r = Router(layout, plain, reach)
    initial = {lbl: i for i, lbl in enumerate(layout.order)}
    r.stage = "prefix"
    for a, b, ft in prefix:
        if ft:
            r.ft_exchange(a, b)
        else:
            r._plain_swap(a, b)
    for which, seq in plan.x_round:
        _readout(r, which, SYNDROMES[int(which[-1]) - 1], seq)
    for a, b, rep, first in plan.z_corr:
        _ccz(r, "Z_corr", a, b, rep, first)
    _reset_ancillas(r)
    for which, seq in plan.z_round:
        _readout(r, which, SYNDROMES[int(which[-1]) - 1], seq)
    for a, b, rep, first in plan.x_corr:
        _ccz(r, "X_corr", a, b, rep, first)
    final = {lbl: i for i, lbl in enumerate(r.at)}
    used = frozenset(k for k, v in r.exchanges.items() if not v[2])
    return QECCycle(r.circuit(), initial, final, dict(r.exchanges), used)


@lru_cache(maxsize=8)
def _cached_plan(layout: ChainLayout, reach: int) -> CyclePlan:
    return plan_cycle(layout, reach)


def baseline_cycle(layout: ChainLayout = ChainLayout(), reach: int = 2) -> QECCycle:
    """Every syndrome/data exchange done with the FT gadget."""
    return build_qec_cycle(layout, plain=(), reach=reach)


def all_plain_cycle(layout: ChainLayout = ChainLayout(), reach: int = 2) -> QECCycle:
    keys = baseline_cycle(layout, reach).exchanges
    return build_qec_cycle(layout, plain=keys, reach=reach)


def negative_control_cycle(layout: ChainLayout = ChainLayout(), ft: bool = False) -> QECCycle:
    """Default cycle preceded by a d2/d3 exchange; plain (ft=False) breaks fault tolerance."""
    return build_qec_cycle(layout, prefix=(("d2", "d3", ft),))


def default_plain_exchanges() -> frozenset[str]:
    """Relaxed exchange assignment certified by the single-fault scan."""
    text = resources.files(__package__).joinpath("data/plain_exchanges.json").read_text()
    return frozenset(json.loads(text)["plain"])


# --- ideal decoder ---------------------------------------------------------


def ideal_cycle(n_qubits: int, data: dict[int, int], syndromes: Sequence[int], ancillas: Sequence[int]) -> Circuit:
    """Noise-free, connectivity-free QEC round on the given sites (resets first)."""
    ops = [GateOp("RESET0", (a,)) for a in ancillas]
    for k, which in enumerate(("SX1", "SX2", "SX3")):
        ops += stabilizer_readout(which, syndromes[k], data, n_qubits).ops
    ops += coherent_correction("Z_corr", syndromes, data, n_qubits).ops
    ops += [GateOp("RESET0", (a,)) for a in ancillas]
    for k, which in enumerate(("SZ1", "SZ2", "SZ3")):
        ops += stabilizer_readout(which, syndromes[k], data, n_qubits).ops
    ops += coherent_correction("X_corr", syndromes, data, n_qubits).ops
    return Circuit(n_qubits, tuple(ops), ancillas=tuple(ancillas))


def decoder_for(cycle: QECCycle) -> Circuit:
    return ideal_cycle(
        cycle.circuit.n_qubits, cycle.data_positions(final=True),
        cycle.syndrome_positions(final=True), cycle.ancilla_positions(final=True),
    )


def encoded_state(state: str, cycle: QECCycle) -> StateVector:
    n = cycle.circuit.n_qubits
    circ = encode(state, n, cycle.data_positions())
    return run(circ, StateVector.basis((2,) * n, (0,) * n))


def logical_support(state: str, cycle: QECCycle, final: bool = True) -> tuple[str, list[int]]:
    """Observable measured for the given logical state: ('Z', sites) or ('X', sites)."""
    pos = cycle.data_positions(final)
    if state == "zero_L":
        return "Z", [pos[q] for q in Z_LOGICAL]
    if state == "plus_L":
        return "X", [pos[q] for q in X_LOGICAL]
    raise ValueError(f"unknown logical state {state!r}")


# --- Pauli propagation through Clifford fragments ------------------------


def propagate(pauli: dict[int, str], ops: Sequence[GateOp]) -> dict[int, str]:
    """Conjugate a Pauli through H/CNOT/SWAP/CZ gates (phases dropped)."""
    x = {q: p in "XY" for q, p in pauli.items()}
    z = {q: p in "ZY" for q, p in pauli.items()}

    def get(m, q):
        return m.get(q, False)

    for op in ops:
        q = op.qubits
        if op.kind == "H":
            x[q[0]], z[q[0]] = get(z, q[0]), get(x, q[0])
        elif op.kind == "CNOT":
            c, t = q
            x[t] = get(x, t) ^ get(x, c)
            z[c] = get(z, c) ^ get(z, t)
        elif op.kind == "CZ":
            a, b = q
            z[a] = get(z, a) ^ get(x, b)
            z[b] = get(z, b) ^ get(x, a)
        elif op.kind == "SWAP":
            a, b = q
            x[a], x[b] = get(x, b), get(x, a)
            z[a], z[b] = get(z, b), get(z, a)
        elif op.kind in ("X", "Y", "Z", "S"):
            if op.kind == "S":
                z[q[0]] = get(z, q[0]) ^ get(x, q[0])
        else:
            raise ValueError(f"cannot propagate through {op.kind}")
    out = {}
    for qq in set(x) | set(z):
        xx, zz = get(x, qq), get(z, qq)
        if xx or zz:
            out[qq] = "Y" if xx and zz else ("X" if xx else "Z")
    return out


def gauge_group_contains(pauli9: str) -> bool:
    """Membership of a phase-free Pauli string in the gauge group (which includes the stabilizers)."""
    gens = [_symplectic(g) for g in CODE.gauges]
    return _in_span(_symplectic(pauli9), gens)


def _symplectic(p: str) -> np.ndarray:
    v = np.zeros(18, dtype=np.uint8)
    for i, c in enumerate(p):
        if c in "XY":
            v[i] = 1
        if c in "ZY":
            v[9 + i] = 1
    return v


def _in_span(v: np.ndarray, gens: list[np.ndarray]) -> bool:
    rows = [g.copy() for g in gens]
    basis: list[np.ndarray] = []
    pivots: list[int] = []
    for r in rows:
        for b, p in zip(basis, pivots):
            if r[p]:
                r ^= b
        nz = np.nonzero(r)[0]
        if nz.size:
            basis.append(r)
            pivots.append(int(nz[0]))
    w = v.copy()
    for b, p in zip(basis, pivots):
        if w[p]:
            w ^= b
    return not w.any()


def weight_mod_gauge(pauli9: str) -> int:
    """Smallest weight of ``pauli9`` times any gauge-group element."""
    best = 10
    gens = [_symplectic(g) for g in CODE.gauges]
    target = _symplectic(pauli9)
    for w in range(0, 10):
        if w >= best:
            break
        for support in _supports(w):
            for letters in _letters(w):
                cand = ["I"] * 9
                for q, c in zip(support, letters):
                    cand[q] = c
                v = target ^ _symplectic("".join(cand))
                if _in_span(v, gens):
                    return w
    return best


def _supports(w: int):
    from itertools import combinations

    return combinations(range(9), w)


def _letters(w: int):
    from itertools import product

    return product("XYZ", repeat=w)


def stabilizer_product(a: str, b: str) -> str:
    return reduce(pauli_product, (CODE.stabilizers[a], CODE.stabilizers[b]))
