"""Command-line front end: optimize, scan, qec and report.

Every run reads one JSON config, fills in defaults, validates the result
against a versioned schema and writes outputs that embed the resolved config
as a provenance block. Re-running an identical config reproduces the files
byte for byte.
"""

from __future__ import annotations

import argparse
import copy
from contextlib import nullcontext
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bacon_shor import ChainLayout, baseline_cycle, build_qec_cycle, negative_control_cycle
from .circuit_sim import NoiseModel
from .evolver import IntegrationError, evolve
from .ft_analysis import STATES, FitError, default_lambda_grid, fit_power_law, lambda_sweep, logical_error_rate, single_fault_scan
from .gate_metrics import C1Z3, CCZ, BITS, DegenerateOutcomeError, extract_outcome
from .optimizer import SCAN_COLUMNS, STRATEGIES, DEConfig, GateSearch, make_executor, optimize_gate, scan_tau, score_gate, write_csv
from .rydberg_model import COMPUTATIONAL, PulseParams, SystemParams, gamma_to_mhz, pulse_envelope, plus_state, tau_to_us
from .quantum_core import StateVector

log = logging.getLogger("rydqec")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_FT, EXIT_NUMERIC = 0, 2, 3, 4
GATES = {"CCZ": CCZ, "C1Z3": C1Z3}
SWEEP_COLUMNS = ["lambda", "state", "trials", "failures", "p_L", "ci_low", "ci_high"]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_seed = {"type": "integer", "minimum": 0}
_bound = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["optimize", "scan", "qec"]},
        "seed": _seed,
        "threads": {"type": "integer", "minimum": 1},
        "V_MHz": _pos,
        "figures": {"type": "boolean"},
        "gate": {"enum": list(GATES)},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau": _pos,
                "omega_mw": _num,
                "gamma": {"type": "number", "minimum": 0},
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "pair_convention": {"enum": ["ordered", "unordered"]},
            },
        },
        "pulse": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["omega0", "delta0", "Delta0"],
            "properties": {"omega0": _num, "delta0": _num, "Delta0": _num},
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bounds": {"type": "array", "items": _bound, "minItems": 3, "maxItems": 3},
                "starts": {"type": "integer", "minimum": 1},
                "population_size": {"type": "integer", "minimum": 4},
                "max_generations": {"type": "integer", "minimum": 0},
                "mutation": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "crossover": {"type": "number", "minimum": 0, "maximum": 1},
                "strategy": {"enum": list(STRATEGIES)},
                "tol": {"type": "number", "minimum": 0},
                "search_density": {"type": "integer", "minimum": 1},
                "polish": {"type": "boolean"},
            },
        },
        "final_steps": {"type": ["integer", "null"], "minimum": 1},
        "snapshots": {"type": "integer", "minimum": 1},
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "taus": {"type": "array", "items": _pos, "minItems": 1},
                "gammas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "alphas": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}, "minItems": 1},
            },
        },
        "qec": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambdas": {
                    "type": ["array", "null"],
                    "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "minItems": 1,
                },
                "grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "lo": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "hi": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    },
                },
                "states": {"type": "array", "items": {"enum": list(STATES)}, "minItems": 1, "uniqueItems": True},
                "trials": {"type": "integer", "minimum": 1},
                "target_failures": {"type": ["integer", "null"], "minimum": 1},
                "max_trials": {"type": "integer", "minimum": 1},
                "exclude_largest": {"type": "integer", "minimum": 0},
                "ratio_check": {"type": "boolean"},
                "ratio_lambda": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "negative_control": {"type": "boolean"},
                "reach": {"type": "integer", "minimum": 1},
                "layout": {"type": "array", "items": {"type": "string"}, "minItems": 13},
                "noise": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "p2_nn": {"type": "number", "minimum": 0, "maximum": 1},
                        "p2_nnn": {"type": "number", "minimum": 0, "maximum": 1},
                        "p3": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                },
            },
        },
    },
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "threads": 1,
    "V_MHz": 25.0,
    "figures": True,
    "gate": "CCZ",
    "system": {"tau": 87.5, "omega_mw": 20.0, "gamma": 0.0, "alpha": 0.125, "pair_convention": "ordered"},
    "pulse": None,
    "search": {
        "bounds": [[0.0, 4.0], [0.0, 10.0], [-10.0, 10.0]],
        "starts": 3,
        "population_size": 45,
        "max_generations": 300,
        "mutation": [0.5, 1.0],
        "crossover": 0.7,
        "strategy": "rand1bin",
        "tol": 1e-8,
        "search_density": 256,
        "polish": True,
    },
    "final_steps": None,
    "snapshots": 200,
    "scan": {"taus": [25.0, 50.0, 87.5], "gammas": None, "alphas": None},
    "qec": {
        "lambdas": None,
        "grid": {"n": 8, "lo": 0.02, "hi": 1.0},
        "states": list(STATES),
        "trials": 100_000,
        "target_failures": 100,
        "max_trials": 2_000_000,
        "exclude_largest": 2,
        "ratio_check": True,
        "ratio_lambda": 1.0,
        "negative_control": False,
        "reach": 2,
        "layout": list(ChainLayout().order),
        "noise": {"p2_nn": 3.125e-3, "p2_nnn": 1.738e-2, "p3": 2.903e-2},
    },
}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# --- config ------------------------------------------------------------------


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def resolve_config(raw: dict, command: str, seed: int | None = None, threads: int | None = None) -> dict:
    """Validate the user config, fill defaults and apply CLI overrides."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _validate(raw)
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    cfg = _merge(DEFAULTS, raw)
    cfg["command"] = command
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    # null nested blocks fall back to defaults so the provenance is explicit
    scan = cfg["scan"]
    scan["gammas"] = scan["gammas"] or [cfg["system"]["gamma"]]
    scan["alphas"] = scan["alphas"] or [cfg["system"]["alpha"]]
    q = cfg["qec"]
    if q["lambdas"] is None:
        g = q["grid"]
        q["lambdas"] = [float(x) for x in default_lambda_grid(g["n"], g["lo"], g["hi"])]
    _validate(cfg)
    for lo, hi in cfg["search"]["bounds"]:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError(f"search/bounds: need finite lo < hi, got [{lo}, {hi}]")
    lo, hi = cfg["search"]["mutation"]
    if lo > hi:
        raise ConfigError("search/mutation: need lo <= hi")
    try:
        _system(cfg)
        if command == "qec":
            ChainLayout(tuple(q["layout"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | None) -> dict:
    if path is None:
        return {"schema_version": SCHEMA_VERSION}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def provenance(cfg: dict) -> dict:
    return {"package": "rydqec", "version": __version__, "seed": cfg["seed"], "config": cfg}


def _prov_line(cfg: dict) -> str:
    return "provenance " + json.dumps(provenance(cfg), sort_keys=True, separators=(",", ":"))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_json(path: Path, payload: dict, cfg: dict) -> Path:
    body = {"provenance": provenance(cfg), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n")
    return path


# --- shared pieces -------------------------------------------------------------


def _system(cfg: dict, **over) -> SystemParams:
    s = {**cfg["system"], **over}
    return SystemParams(
        float(s["tau"]), omega_mw=float(s["omega_mw"]), gamma=float(s["gamma"]),
        alpha=float(s["alpha"]), pair_convention=s["pair_convention"],
    )


def _search(cfg: dict) -> GateSearch:
    s = cfg["search"]
    de = DEConfig(
        population_size=s["population_size"], mutation=tuple(s["mutation"]), crossover=s["crossover"], strategy=s["strategy"],
        max_generations=s["max_generations"], tol=s["tol"],
    )
    seeds = tuple(cfg["seed"] + k for k in range(s["starts"]))
    return GateSearch(
        de=de, seeds=seeds, search_density=s["search_density"], final_steps=cfg["final_steps"],
        polish=s["polish"], bounds=tuple(tuple(b) for b in s["bounds"]),
    )


def _units(system: SystemParams, v_mhz: float) -> dict:
    return {
        "V_MHz": v_mhz,
        "tau_us": tau_to_us(system.tau, v_mhz),
        "gamma_MHz": gamma_to_mhz(system.gamma, v_mhz),
    }


def _finite(d: dict) -> bool:
    return all(math.isfinite(v) for v in d.values() if isinstance(v, float))


def trajectory_rows(pulse: PulseParams, system: SystemParams, snapshots: int, v_mhz: float,
                    steps: int | None = None) -> list[dict]:
    """Pulse, basis populations and entangling phases on a uniform time grid."""
    traj = evolve(plus_state(), pulse, system, steps, snapshots=snapshots)
    stride = (len(traj.times) - 1) // snapshots
    rows = []
    for k, t in enumerate(traj.snapshot_times):
        amps = traj.snapshots[k]
        om, de = pulse_envelope(min(float(t), system.tau), pulse, system)
        row = {"t": float(t), "t_us": tau_to_us(float(t), v_mhz), "omega_L": float(om), "delta_L": float(de),
               "rydberg": float(traj.rydberg_pop[k * stride])}
        comp = amps[COMPUTATIONAL]
        for b, a in zip(BITS, comp):
            row["pop_" + "".join(map(str, b))] = float(abs(a) ** 2)
        try:
            o = extract_outcome(StateVector(traj.final_state.dims, amps))
            ent = {b: o.ent(b) for b in ("110", "101", "111")}
        except DegenerateOutcomeError:
            ent = dict.fromkeys(("110", "101", "111"), math.nan)
        for b, v in ent.items():
            row["phi_ent_" + b] = v
        rows.append(row)
    return rows


TRAJECTORY_COLUMNS = (
    ["t", "t_us", "omega_L", "delta_L", "rydberg"]
    + ["pop_" + "".join(map(str, b)) for b in BITS]
    + ["phi_ent_110", "phi_ent_101", "phi_ent_111"]
)


# --- commands ------------------------------------------------------------------


def cmd_optimize(cfg: dict, out: Path) -> int:
    system = _system(cfg)
    spec = GATES[cfg["gate"]]
    v = cfg["V_MHz"]
    if cfg["pulse"] is not None:
        pulse = PulseParams(**cfg["pulse"])
        mode = "replay"
        extra = {}
    else:
        search = _search(cfg)
        with make_executor(cfg["threads"]) or nullcontext() as ex:
            res = optimize_gate(system, spec, search, ex)
        pulse = res.pulse
        mode = "optimize"
        extra = {
            "search": {
                "best_seed": res.seed, "search_infidelity": res.search_cost, "evaluations": res.evaluations,
                "runs": [
                    {"seed": s, "best": r.best.tolist(), "best_cost": r.best_cost, "generations": r.generations,
                     "history": r.history}
                    for s, r in zip(search.seeds, res.runs)
                ],
            }
        }
    score = score_gate(pulse, system, spec, cfg["final_steps"])
    if not _finite(score):
        raise NumericalFailure(f"non-finite gate metrics: {score}")
    payload = {
        "mode": mode,
        "gate": cfg["gate"],
        "params": {"omega0": pulse.omega0, "delta0": pulse.delta0, "Delta0": pulse.Delta0},
        "fidelity": score["fidelity"],
        "errors": {k: score[k] for k in ("p_bar", "phi_bar", "phi_bar_101", "p_bar_dec", "approx_fidelity")},
        "units": _units(system, v),
        **extra,
    }
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "result.json", payload, cfg)
    rows = trajectory_rows(pulse, system, cfg["snapshots"], v, cfg["final_steps"])
    write_csv(rows, out / "trajectory.csv", TRAJECTORY_COLUMNS, [_prov_line(cfg)])
    if cfg["figures"]:
        from .figures import plot_trajectory

        plot_trajectory(out / "trajectory.csv", out / "trajectory.png", _prov_line(cfg))
    print(f"{mode}: F = {score['fidelity']:.6f}  (1-F = {1 - score['fidelity']:.3e})  "
          f"Omega0={pulse.omega0:.6g} delta0={pulse.delta0:.6g} Delta0={pulse.Delta0:.6g}")
    return EXIT_OK


def cmd_scan(cfg: dict, out: Path) -> int:
    sc = cfg["scan"]
    spec = GATES[cfg["gate"]]
    search = _search(cfg)
    rows = []
    with make_executor(cfg["threads"]) or nullcontext() as ex:
        for alpha in sc["alphas"]:
            for gamma in sc["gammas"]:
                rows += scan_tau(sc["taus"], float(gamma), spec, search, float(alpha), cfg["system"]["omega_mw"], ex)
    for r in rows:
        r["tau_us"] = tau_to_us(r["tau"], cfg["V_MHz"])
        r["gamma_MHz"] = gamma_to_mhz(r["gamma"], cfg["V_MHz"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "scan.csv", SCAN_COLUMNS + ["tau_us", "gamma_MHz"], [_prov_line(cfg)])
    if cfg["figures"]:
        from .figures import plot_scan

        plot_scan(out / "scan.csv", out / "scan.png", _prov_line(cfg))
    bad = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"alpha={r['alpha']:g} gamma={r['gamma']:g} tau={r['tau']:g}: F={r['fidelity']:.5f} [{r['status']}]")
    if rows and len(bad) == len(rows):
        return EXIT_NUMERIC
    return EXIT_OK


def _build_cycle(cfg: dict):
    q = cfg["qec"]
    layout = ChainLayout(tuple(q["layout"]))
    if q["negative_control"]:
        return negative_control_cycle(layout), layout
    return build_qec_cycle(layout, reach=q["reach"]), layout


def cmd_qec(cfg: dict, out: Path) -> int:
    q = cfg["qec"]
    out.mkdir(parents=True, exist_ok=True)
    cycle, layout = _build_cycle(cfg)
    base = baseline_cycle(layout, q["reach"])
    (out / "cycle.txt").write_text("# " + _prov_line(cfg) + "\n" + cycle.circuit.to_text())
    reports = {s: single_fault_scan(cycle, s) for s in q["states"]}
    cycle_info = {
        "n_qubits": cycle.circuit.n_qubits,
        "cnots": cycle.cnot_count(),
        "baseline_cnots": base.cnot_count(),
        "cnot_ratio": cycle.cnot_count() / base.cnot_count(),
        "noisy_ops": len(cycle.circuit.noisy_indices()),
        "plain_exchanges": sorted(cycle.plain_keys),
        "negative_control": q["negative_control"],
    }
    write_json(out / "fault_scan.json", {"cycle": cycle_info, "reports": {s: r.to_dict() for s, r in reports.items()}}, cfg)
    for s, r in reports.items():
        print(f"fault scan {s}: {r.total_locations} faults, {len(r.failures)} logical failures -> "
              f"{'PASS' if r.passed else 'FAIL'}")
    if not all(r.passed for r in reports.values()):
        write_json(out / "summary.json", {"cycle": cycle_info, "certified": False, "sweep": None}, cfg)
        return EXIT_FT

    noise = NoiseModel(**q["noise"])
    rows, fits = [], {}
    for i, s in enumerate(q["states"]):
        est = lambda_sweep(cycle, s, noise, q["lambdas"], q["trials"], q["target_failures"],
                           cfg["seed"], q["max_trials"])
        rows += [e.row() for e in est]
        try:
            f = fit_power_law([e.lam for e in est], [e.p_L for e in est], q["exclude_largest"])
            fits[s] = {"C": f.C, "alpha": f.alpha, "alpha_stderr": f.alpha_stderr,
                       "used_lambdas": [float(x) for x in f.lambdas[f.used]],
                       "min_failures_used": int(min(e.failures for e, u in zip(est, f.used) if u))}
            print(f"{s}: p_L = {f.C:.4g} * lambda^{f.alpha:.3f} (+/- {f.alpha_stderr:.3f})")
        except FitError as exc:
            fits[s] = None
            print(f"{s}: fit refused ({exc})")
    write_csv(rows, out / "lambda_sweep.csv", SWEEP_COLUMNS, [_prov_line(cfg)])
    ratio = {}
    if q["ratio_check"]:
        for s in q["states"]:
            lam = q["ratio_lambda"]
            args = (q["trials"], cfg["seed"], q["target_failures"], q["max_trials"])
            hi = logical_error_rate(cycle, s, noise, lam, *args)
            mid = logical_error_rate(cycle, s, noise, lam / 2, *args)
            low = hi.ci_low / mid.ci_high if mid.ci_high else None
            high = hi.ci_high / mid.ci_low if mid.ci_low else None
            ratio[s] = {"lambda": lam, "p_L": hi.p_L, "p_L_half": mid.p_L,
                        "ratio": hi.p_L / mid.p_L if mid.p_L else None, "ratio_low": low, "ratio_high": high,
                        "brackets_4": bool(low is not None and high is not None and low <= 4 <= high)}
    summary = {
        "cycle": cycle_info,
        "certified": True,
        "fits": fits,
        "fit_refused": [s for s, f in fits.items() if f is None],
        "ratio_check": ratio or None,
    }
    write_json(out / "summary.json", summary, cfg)
    if cfg["figures"]:
        from .figures import plot_sweep

        plot_sweep(out / "lambda_sweep.csv", out / "lambda_sweep.png", fits, _prov_line(cfg))
    return EXIT_OK


def cmd_report(out: Path) -> int:
    """Re-render figures for every known CSV found in ``out``."""
    from .figures import plot_scan, plot_sweep, plot_trajectory

    done = []
    if (out / "trajectory.csv").exists():
        done.append(plot_trajectory(out / "trajectory.csv", out / "trajectory.png", _stored_prov(out / "trajectory.csv")))
    if (out / "scan.csv").exists():
        done.append(plot_scan(out / "scan.csv", out / "scan.png", _stored_prov(out / "scan.csv")))
    if (out / "lambda_sweep.csv").exists():
        fits = None
        if (out / "summary.json").exists():
            fits = json.loads((out / "summary.json").read_text()).get("fits")
        done.append(plot_sweep(out / "lambda_sweep.csv", out / "lambda_sweep.png", fits,
                               _stored_prov(out / "lambda_sweep.csv")))
    if not done:
        raise ConfigError(f"no trajectory.csv, scan.csv or lambda_sweep.csv in {out}")
    for p in done:
        print(f"wrote {p}")
    return EXIT_OK


def _stored_prov(path: Path) -> str | None:
    with open(path) as fh:
        first = fh.readline()
    return first[2:].strip() if first.startswith("# provenance") else None


# --- entry point ---------------------------------------------------------------


COMMANDS = {"optimize": cmd_optimize, "scan": cmd_scan, "qec": cmd_qec}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydqec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rydqec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("optimize", "optimize or replay one gate; writes result.json and trajectory.csv"),
        ("scan", "tau/gamma/alpha grid of independent optimizations; writes scan.csv"),
        ("qec", "build, certify and lambda-sweep the QEC cycle"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", metavar="PATH", help="JSON config (defaults are used when omitted)")
        sp.add_argument("--seed", type=int, metavar="N", help="override the master seed")
        sp.add_argument("--out", metavar="DIR", default=f"out/{name}", help="output directory")
        sp.add_argument("--threads", type=int, metavar="N", help="worker threads for cost evaluation")
        sp.add_argument("-v", "--verbose", action="store_true")
    rp = sub.add_parser("report", help="re-render PNG figures from the CSVs in a run directory")
    rp.add_argument("--out", metavar="DIR", required=True)
    rp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        if args.command == "report":
            return cmd_report(out)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = resolve_config(load_config(args.config), args.command, args.seed, args.threads)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, IntegrationError, DegenerateOutcomeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
