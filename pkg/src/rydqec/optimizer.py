"""Bounded differential evolution and the gate-parameter scans built on it."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .evolver import SEARCH_DENSITY, IntegrationError, default_steps, evolve
from .gate_metrics import CCZ, DegenerateOutcomeError, GateSpec, error_breakdown, state_fidelity
from .rydberg_model import BOUNDS, PulseParams, SystemParams, plus_state

log = logging.getLogger(__name__)

Bounds = Sequence[tuple[float, float]]


STRATEGIES = ("rand1bin", "best1bin")


@dataclass(frozen=True)
class DEConfig:
    population_size: int = 45
    mutation: tuple[float, float] = (0.5, 1.0)
    crossover: float = 0.7
    max_generations: int = 300
    tol: float = 1e-8
    seed: int = 0
    strategy: str = "rand1bin"

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        lo, hi = self.mutation
        if not 0 < lo <= hi <= 2:
            raise ValueError(f"invalid mutation range {self.mutation}")
        if not 0 <= self.crossover <= 1:
            raise ValueError("crossover must lie in [0, 1]")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")


@dataclass
class OptimizationResult:
    best: np.ndarray
    best_cost: float
    history: list[float]
    evaluations: int
    generations: int
    converged: bool


def _evaluate(cost: Callable, xs: np.ndarray, executor: Executor | None) -> np.ndarray:
    if executor is None:
        vals = [cost(x) for x in xs]
    else:
        vals = list(executor.map(cost, xs))
    out = np.array(vals, dtype=float)
    out[~np.isfinite(out)] = np.inf
    return out


def _safe(cost: Callable) -> Callable:
    def wrapped(x):
        try:
            return float(cost(x))
        except (ArithmeticError, IntegrationError, DegenerateOutcomeError):
            return math.inf

    return wrapped


def minimize(
    cost: Callable[[np.ndarray], float],
    bounds: Bounds,
    config: DEConfig = DEConfig(),
    executor: Executor | None = None,
) -> OptimizationResult:
    """rand/1/bin (or best/1/bin) differential evolution with dithered F and bounce-back bounds.

    A generation is evaluated as one batch, so ``executor`` can spread the
    cost calls over threads. Results only depend on ``config.seed``.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi >= lo)):
        raise ValueError(f"invalid bounds {bounds}")
    dim = lo.size
    n = config.population_size
    rng = np.random.default_rng(config.seed)
    f = _safe(cost)

    # Latin hypercube start
    strata = np.array([rng.permutation(n) for _ in range(dim)]).T
    pop = lo + (strata + rng.random((n, dim))) / n * (hi - lo)
    costs = _evaluate(f, pop, executor)
    evals = n
    history = [float(costs.min())]
    converged = False
    gen = 0
    for gen in range(1, config.max_generations + 1):
        fscale = rng.uniform(*config.mutation)
        trials = np.empty_like(pop)
        best = int(np.argmin(costs))
        for i in range(n):
            r1, r2, r3 = rng.choice(np.delete(np.arange(n), i), 3, replace=False)
            if config.strategy == "best1bin":
                r1 = best
            mutant = pop[r1] + fscale * (pop[r2] - pop[r3])
            cross = rng.random(dim) < config.crossover
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            # bounce back between the violated bound and the base vector
            low = trial < lo
            high = trial > hi
            if low.any():
                trial[low] = lo[low] + rng.random(low.sum()) * (pop[r1][low] - lo[low])
            if high.any():
                trial[high] = hi[high] - rng.random(high.sum()) * (hi[high] - pop[r1][high])
            trials[i] = trial
        tcost = _evaluate(f, trials, executor)
        evals += n
        better = tcost <= costs
        pop[better] = trials[better]
        costs[better] = tcost[better]
        history.append(float(costs.min()))
        finite = costs[np.isfinite(costs)]
        if finite.size == n and finite.max() - finite.min() < config.tol:
            converged = True
            break
    k = int(np.argmin(costs))
    return OptimizationResult(pop[k].copy(), float(costs[k]), history, evals, gen, converged)


# --- gate optimization ---------------------------------------------------


@dataclass(frozen=True)
class GateSearch:
    """Settings for optimizing one gate."""

    de: DEConfig = DEConfig()
    seeds: tuple[int, ...] = (0, 1, 2)
    search_density: int = SEARCH_DENSITY
    final_steps: int | None = None
    polish: bool = True
    bounds: tuple[tuple[float, float], ...] = BOUNDS


@dataclass
class GateResult:
    pulse: PulseParams
    system: SystemParams
    fidelity: float
    p_bar: float
    phi_bar: float
    phi_bar_101: float
    p_dec: float
    approx_fidelity: float
    seed: int
    search_cost: float
    evaluations: int
    runs: list[OptimizationResult] = field(default_factory=list, repr=False)


def gate_infidelity(x, system: SystemParams, spec: GateSpec, steps: int) -> float:
    traj = evolve(plus_state(), PulseParams.from_array(x), system, steps)
    return 1.0 - state_fidelity(traj.final_state, spec)


def score_gate(pulse: PulseParams, system: SystemParams, spec: GateSpec = CCZ, steps: int | None = None) -> dict:
    traj = evolve(plus_state(), pulse, system, steps)
    e = error_breakdown(traj, system.gamma, spec)
    return asdict(e)


def optimize_gate(
    system: SystemParams,
    spec: GateSpec = CCZ,
    search: GateSearch = GateSearch(),
    executor: Executor | None = None,
) -> GateResult:
    """Multi-start DE over (Omega0, delta0, Delta0), then local polish and a fine re-score."""
    steps = default_steps(system.tau, search.search_density)

    def cost(x):
        return gate_infidelity(x, system, spec, steps)

    runs = []
    for seed in search.seeds:
        r = minimize(cost, search.bounds, replace(search.de, seed=seed), executor)
        if search.polish:
            r = _polish(cost, r, search.bounds)
        runs.append(r)
        log.info("seed %d: search infidelity %.3e after %d evaluations", seed, r.best_cost, r.evaluations)
    k = int(np.argmin([r.best_cost for r in runs]))
    best = runs[k]
    pulse = PulseParams.from_array(best.best)
    s = score_gate(pulse, system, spec, search.final_steps)
    return GateResult(
        pulse=pulse,
        system=system,
        fidelity=s["fidelity"],
        p_bar=s["p_bar"],
        phi_bar=s["phi_bar"],
        phi_bar_101=s["phi_bar_101"],
        p_dec=s["p_bar_dec"],
        approx_fidelity=s["approx_fidelity"],
        seed=search.seeds[k],
        search_cost=best.best_cost,
        evaluations=sum(r.evaluations for r in runs),
        runs=runs,
    )


def _polish(cost, r: OptimizationResult, bounds: Bounds) -> OptimizationResult:
    res = scipy_minimize(
        _safe(cost), r.best, method="Nelder-Mead", bounds=bounds,
        options={"xatol": 1e-6, "fatol": 1e-10, "maxfev": 300},
    )
    if res.fun < r.best_cost:
        return OptimizationResult(
            np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds]),
            float(res.fun), r.history + [float(res.fun)], r.evaluations + res.nfev,
            r.generations, r.converged,
        )
    return OptimizationResult(r.best, r.best_cost, r.history, r.evaluations + res.nfev, r.generations, r.converged)


SCAN_COLUMNS = [
    "tau", "gamma", "alpha", "fidelity", "p_bar", "phi_bar", "p_dec",
    "omega0", "delta0", "Delta0", "seed", "status",
]


def _row(system: SystemParams, res: GateResult | None, seed: int, status: str) -> dict:
    row = {"tau": system.tau, "gamma": system.gamma, "alpha": system.alpha, "seed": seed, "status": status}
    if res is None:
        row.update({k: math.nan for k in SCAN_COLUMNS if k not in row})
    else:
        row.update(
            fidelity=res.fidelity, p_bar=res.p_bar, phi_bar=res.phi_bar, p_dec=res.p_dec,
            omega0=res.pulse.omega0, delta0=res.pulse.delta0, Delta0=res.pulse.Delta0, seed=res.seed,
        )
    return row


def scan_tau(
    taus: Iterable[float],
    gamma: float,
    spec: GateSpec = CCZ,
    search: GateSearch = GateSearch(),
    alpha: float = 0.125,
    omega_mw: float = 20.0,
    executor: Executor | None = None,
) -> list[dict]:
    """Independent optimization per gate time; failures are recorded, not raised."""
    rows = []
    for tau in taus:
        system = SystemParams(float(tau), omega_mw=omega_mw, gamma=gamma, alpha=alpha)
        try:
            res = optimize_gate(system, spec, search, executor)
            rows.append(_row(system, res, res.seed, "ok"))
        except Exception as exc:  # noqa: BLE001 - scans keep going
            log.warning("tau=%s failed: %s", tau, exc)
            rows.append(_row(system, None, search.seeds[0], f"error: {exc}"))
    return rows


def scan_alpha(
    alphas: Iterable[float],
    taus: Iterable[float],
    gamma: float = 1.64e-3,
    spec: GateSpec = CCZ,
    search: GateSearch = GateSearch(),
    omega_mw: float = 20.0,
    executor: Executor | None = None,
) -> list[dict]:
    taus = list(taus)
    rows = []
    for alpha in alphas:
        rows.extend(scan_tau(taus, gamma, spec, search, float(alpha), omega_mw, executor))
    return rows


def write_csv(rows: Sequence[dict], path, columns: Sequence[str] = SCAN_COLUMNS, comments: Sequence[str] = ()) -> None:
    """CSV with a header row; ``comments`` go first as '#' lines."""
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def make_executor(threads: int) -> Executor | None:
    """Thread pool for cost evaluation; the evolution kernel releases the GIL."""
    return ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else None
