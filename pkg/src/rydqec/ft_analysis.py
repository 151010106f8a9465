"""Single-fault certification, logical error rates and power-law fits.

Faults are Pauli, every gate except CCZ is Clifford, and the CCZ controls
are syndrome ancillas that sit in definite basis states. A Pauli frame
therefore tracks a faulty run exactly, and a fault configuration either
flips the logical observable or leaves it alone. The dense simulator
(``method="dense"``) computes the same quantities from state vectors and
serves as the cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .bacon_shor import QECCycle, decoder_for, encoded_state, logical_support
from .circuit_sim import (
    RESETS,
    BranchState,
    Circuit,
    FaultLocation,
    NoiseModel,
    apply_gate,
    apply_pauli_rows,
    check_frame_preconditions,
    expectation_x,
    expectation_z,
    letters_code,
    nontrivial_paulis,
    pauli_bits,
    reset_branches,
    run_branching,
    run_frames,
)

FAIL_TOL = 1e-9
STATES = ("zero_L", "plus_L")


@dataclass
class FaultReport:
    state: str
    total_locations: int
    failures: list[tuple[FaultLocation, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "total_locations": self.total_locations,
            "pass": self.passed,
            "failures": [
                {"op_index": f.op_index, "pauli": f.pauli, "p_fail": p} for f, p in self.failures
            ],
        }


def _full_circuit(cycle: QECCycle) -> Circuit:
    return cycle.circuit + decoder_for(cycle)


def _logical_flip(x: np.ndarray, z: np.ndarray, kind: str, sites: Sequence[int]) -> np.ndarray:
    """True where the frame anticommutes with the measured logical operator."""
    bits = x if kind == "Z" else z
    return np.bitwise_xor.reduce(bits[list(sites)], axis=0)


def _verified(cycle: QECCycle, state: str) -> Circuit:
    full = _full_circuit(cycle)
    check_frame_preconditions(full, encoded_state(state, cycle))
    return full


def frame_failures(cycle: QECCycle, state: str, faults: Sequence[Sequence[tuple[int, str]]],
                   full: Circuit | None = None) -> np.ndarray:
    """Logical flip (0 or 1) for each configuration of (op index, Pauli) faults."""
    full = _verified(cycle, state) if full is None else full
    n, m = full.n_qubits, len(faults)
    x = np.zeros((n, m), dtype=bool)
    z = np.zeros((n, m), dtype=bool)
    per_op: dict[int, list[tuple[int, str]]] = {}
    for j, cfg in enumerate(faults):
        for k, p in cfg:
            per_op.setdefault(k, []).append((j, p))
    inj = {}
    for k, items in per_op.items():
        arity = len(full.ops[k].qubits)
        cols = np.array([j for j, _ in items])
        xb, zb = pauli_bits(np.array([letters_code(p) for _, p in items]), arity)
        inj[k] = (cols, xb, zb)
    _run_grouped(full, x, z, inj)
    kind, sites = logical_support(state, cycle)
    return _logical_flip(x, z, kind, sites).astype(float)


def _run_grouped(full: Circuit, x, z, inj) -> None:
    # several faults may share an op and a column; apply them one group at a time
    simple = {}
    extra = []
    for k, (cols, xb, zb) in inj.items():
        _, first = np.unique(cols, return_index=True)
        mask = np.zeros(cols.size, dtype=bool)
        mask[first] = True
        simple[k] = (cols[mask], xb[:, mask], zb[:, mask])
        if not mask.all():
            extra.append((k, cols[~mask], xb[:, ~mask], zb[:, ~mask]))
    if extra:
        raise ValueError("at most one fault per op and configuration")
    run_frames(full, x, z, simple)


def dense_failures(cycle: QECCycle, state: str, faults: Sequence[Sequence[tuple[int, str]]]) -> np.ndarray:
    """Exact failure probability per configuration from state vectors (slow oracle)."""
    circ = cycle.circuit
    n = circ.n_qubits
    kind, sites = logical_support(state, cycle)
    init = np.array(encoded_state(state, cycle).amps).reshape((1,) + (2,) * n)
    inj: dict[int, list[tuple[np.ndarray, str]]] = {}
    for owner, cfg in enumerate(faults):
        for k, p in cfg:
            inj.setdefault(k, []).append((np.array([owner]), p))
    bs = BranchState(np.repeat(init, len(faults), axis=0), np.arange(len(faults)))
    bs = run_branching(circ, bs, injections=inj)
    bs = run_branching(decoder_for(cycle), bs)
    return np.clip(failure_probability(bs, len(faults), n, kind, sites), 0.0, 1.0)


def failure_probability(bs: BranchState, n_owners: int, n: int, kind: str, sites: Sequence[int]) -> np.ndarray:
    """Probability per owner that the logical observable reads -1."""
    flat = bs.state.reshape(bs.state.shape[0], -1)
    norms = np.einsum("ij,ij->i", flat.conj(), flat).real
    ev = expectation_z(bs.state, n, sites) if kind == "Z" else expectation_x(bs.state, n, sites)
    return np.bincount(bs.owner, weights=(norms - ev) / 2, minlength=n_owners)


def _advance(state: np.ndarray, op) -> np.ndarray:
    if op.kind in RESETS:
        a, b = reset_branches(state, op.qubits[0], op.kind)
        return a if np.vdot(a, a).real >= np.vdot(b, b).real else b
    apply_gate(state, op.kind, op.qubits)
    return state


def _dense_scan(cycle: QECCycle, state: str, wanted: set[int]) -> list[tuple[FaultLocation, float]]:
    circ = cycle.circuit
    n = circ.n_qubits
    decoder = decoder_for(cycle)
    kind, sites = logical_support(state, cycle)
    out = []
    prefix = np.array(encoded_state(state, cycle).amps).reshape((1,) + (2,) * n)
    for k, op in enumerate(circ.ops):
        prefix = _advance(prefix, op)
        if k not in wanted:
            continue
        paulis = nontrivial_paulis(len(op.qubits))
        batch = np.repeat(prefix, len(paulis), axis=0)
        for i, p in enumerate(paulis):
            apply_pauli_rows(batch, np.array([i]), p, op.qubits)
        bs = run_branching(circ, BranchState(batch, np.arange(len(paulis))), start=k + 1)
        bs = run_branching(decoder, bs)
        pf = failure_probability(bs, len(paulis), n, kind, sites)
        out += [(FaultLocation(k, p), float(v)) for p, v in zip(paulis, pf)]
    return out


def single_fault_scan(
    cycle: QECCycle, state: str, tol: float = FAIL_TOL,
    locations: Sequence[int] | None = None, method: str = "frame",
) -> FaultReport:
    """Inject every nontrivial Pauli after every noisy gate and decode ideally.

    ``locations`` restricts the scan to some op indices; the default is
    exhaustive over ``enumerate_faults``.
    """
    noisy = cycle.circuit.noisy_indices()
    wanted = noisy if locations is None else [k for k in locations if k in set(noisy)]
    if method == "frame":
        faults = [
            FaultLocation(k, p) for k in wanted for p in nontrivial_paulis(len(cycle.circuit.ops[k].qubits))
        ]
        probs = frame_failures(cycle, state, [[(f.op_index, f.pauli)] for f in faults]) if faults else []
        results = list(zip(faults, probs))
    elif method == "dense":
        results = _dense_scan(cycle, state, set(wanted))
    else:
        raise ValueError(f"unknown scan method {method!r}")
    report = FaultReport(state, len(results))
    report.failures = [(f, float(p)) for f, p in results if p > tol]
    return report


# --- logical error rate ------------------------------------------------------


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    zc = norm.ppf(0.5 + confidence / 2)
    ph = k / n
    den = 1 + zc * zc / n
    centre = (ph + zc * zc / (2 * n)) / den
    half = zc * math.sqrt(ph * (1 - ph) / n + zc * zc / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class RateEstimate:
    lam: float
    state: str
    trials: int
    failures: int
    p_L: float
    ci_low: float
    ci_high: float

    def row(self) -> dict:
        return {
            "lambda": self.lam, "state": self.state, "trials": self.trials, "failures": self.failures,
            "p_L": self.p_L, "ci_low": self.ci_low, "ci_high": self.ci_high,
        }


def sample_failures(cycle: QECCycle, state: str, noise: NoiseModel, trials: int,
                    rng: np.random.Generator, full: Circuit | None = None) -> int:
    """Logical failures among ``trials`` noisy cycles followed by ideal decoding."""
    full = _verified(cycle, state) if full is None else full
    n = full.n_qubits
    x = np.zeros((n, trials), dtype=bool)
    z = np.zeros((n, trials), dtype=bool)
    # only the cycle is noisy: the decoder ops carry no noise class
    run_frames(full, x, z, noise=noise, rng=rng)
    kind, sites = logical_support(state, cycle)
    return int(_logical_flip(x, z, kind, sites).sum())


def logical_error_rate(
    cycle: QECCycle,
    state: str,
    noise: NoiseModel,
    lam: float,
    trials: int,
    seed: int = 0,
    target_failures: int | None = None,
    max_trials: int = 2_000_000,
    chunk: int = 100_000,
) -> RateEstimate:
    """Monte Carlo p_L with a Wilson 95% interval.

    Each trajectory draws depolarizing faults after every noisy gate at rate
    lambda * p. With ``target_failures`` the run keeps adding chunks of
    trajectories until that many failures are seen or ``max_trials`` is hit.
    Chunks use seeds derived from (seed, lambda, state, chunk index).
    """
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    scaled = noise.scaled(lam)
    full = _verified(cycle, state)
    done = fails = 0
    goal = trials
    i = 0
    while done < goal:
        m = min(chunk, goal - done)
        rng = np.random.default_rng([seed, int(round(lam * 1e9)), STATES.index(state), i])
        fails += sample_failures(cycle, state, scaled, m, rng, full)
        done += m
        i += 1
        if target_failures and done >= goal and fails < target_failures and goal < max_trials:
            rate = max(fails, 1) / done
            goal = min(max_trials, max(goal + chunk, int(1.3 * target_failures / rate)))
    lo, hi = wilson_interval(fails, done)
    return RateEstimate(lam, state, done, fails, fails / done, lo, hi)


def default_lambda_grid(n: int = 8, lo: float = 0.02, hi: float = 1.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def lambda_sweep(
    cycle: QECCycle,
    state: str,
    noise: NoiseModel = NoiseModel(),
    lambdas: Sequence[float] | None = None,
    trials: int = 100_000,
    target_failures: int | None = 100,
    seed: int = 0,
    max_trials: int = 2_000_000,
) -> list[RateEstimate]:
    lams = default_lambda_grid() if lambdas is None else lambdas
    return [
        logical_error_rate(cycle, state, noise, float(lam), trials, seed, target_failures, max_trials)
        for lam in lams
    ]


# --- power-law fit -----------------------------------------------------------


class FitError(ValueError):
    """Too few usable points for a power-law fit."""


@dataclass(frozen=True)
class ScalingFit:
    lambdas: np.ndarray
    p_L: np.ndarray
    used: np.ndarray  # points entering the regression
    C: float
    alpha: float
    alpha_stderr: float


def fit_power_law(lambdas, p_L, exclude_largest: int = 2) -> ScalingFit:
    """OLS of log p_L on log lambda, leaving out the largest lambdas."""
    lam = np.asarray(lambdas, dtype=float)
    pl = np.asarray(p_L, dtype=float)
    used = np.ones(lam.size, dtype=bool)
    if exclude_largest:
        used[np.argsort(lam)[::-1][:exclude_largest]] = False
    used &= pl > 0
    if used.sum() < 3:
        raise FitError("need at least three points with p_L > 0 after exclusions")
    xs = np.log(lam[used])
    ys = np.log(pl[used])
    a = np.vstack([np.ones_like(xs), xs]).T
    coef, *_ = np.linalg.lstsq(a, ys, rcond=None)
    resid = ys - a @ coef
    cov = np.linalg.inv(a.T @ a) * (resid @ resid) / max(1, xs.size - 2)
    return ScalingFit(lam, pl, used, float(np.exp(coef[0])), float(coef[1]), float(np.sqrt(cov[1, 1])))


# --- SWAP relaxation ---------------------------------------------------------


def relax_exchanges(layout=None, reach: int = 2, log=None) -> tuple[frozenset, QECCycle]:
    """Greedy plain-SWAP assignment, starting from all-FT.

    Exchanges are tried in circuit order; a plain SWAP is kept only if the
    exhaustive single-fault scan passes for both logical states.
    """
    from .bacon_shor import ChainLayout, build_qec_cycle

    layout = ChainLayout() if layout is None else layout
    plain: frozenset = frozenset()
    cycle = build_qec_cycle(layout, plain=plain, reach=reach)
    tried: set[str] = set()
    while True:
        pending = [k for k in cycle.exchanges if k not in tried and k not in plain]
        if not pending:
            return plain, cycle
        key = pending[0]
        tried.add(key)
        cand = build_qec_cycle(layout, plain=plain | {key}, reach=reach)
        ok = all(single_fault_scan(cand, s).passed for s in STATES)
        if log:
            log(f"{key}: {'plain' if ok else 'FT'} ({cand.cnot_count()} CNOTs)")
        if ok:
            plain = plain | {key}
            cycle = cand
