"""Command-line front end.

Every command writes its outputs atomically into ``--out`` together with
``config.json`` (the resolved inputs) and ``manifest.json`` (every file
written).  Series go to CSV with full-precision floats; figure commands
also render a PNG next to each CSV unless ``--no-plots`` is given.

Exit status: 0 ok, 1 usage error, 2 infeasible optimization, 3 integration
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .drive import PERIOD, PulseSpec, monochromatic_reference
from .effective import ALL_LABELS, C_OPERATORS, assemble, coefficients, constraint_residuals, \
    full_constraint_residuals
from .fock import BasisIndex, SpaceConfig
from .functionals import (
    cycle_infidelity,
    cycle_length,
    g_integrals,
    gate_infidelity_asymptotic,
    gate_infidelity_truncated,
    state_infidelity,
    timing_sensitivity,
)
from .magnus import alpha_numeric_all
from .optimizer import OptimizationProblem, improvement_sweep, solve
from .propagate import IntegrationError, propagate_effective, simulate, target_propagator, trace_from_propagators

log = logging.getLogger("polysideband")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTEGRATION = 0, 1, 2, 3
SCHEMA = 1
FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
PULSE_COMMANDS = ("simulate", "evaluate", "coeffs", "verify-magnus", "timing-scan")
PROBLEM_COMMANDS = ("optimize", "sweep-n") + FIGURES

# run options per command, on top of the pulse or problem fields
RUN_OPTIONS = {
    "simulate": {"initial": "g1", "cycles": 2.0},
    "evaluate": {"initial": "g1", "d": 2, "cycle": True},
    "coeffs": {},
    "verify-magnus": {"rtol": 1e-8},
    "timing-scan": {"initial": "g1", "q_max": 10},
    "optimize": {},
    "sweep-n": {"n_min": 3, "n_max": 9},
    "fig1": {"cycles": 1.0},
    "fig2": {"n_min": 3, "n_max": 9},
    "fig3": {"q": 8, "half_width": 0.2},
    "fig4": {"cycles": 1.0},
    "fig5": {"cycles": 2.0, "delta": 0.2, "f0": 2.0},
    "fig6": {"n_min": 3, "n_max": 9},
    "fig7": {"n_min": 3, "n_max": 9},
}


class UsageError(Exception):
    pass


class InfeasibleError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- output ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class Artifacts:
    """Atomic writer that records every file in the manifest."""

    def __init__(self, out_dir: Path, command: str, plots: bool = True):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.plots = plots
        self.entries: list[dict] = []

    def _atomic(self, name: str, data: bytes):
        path = self.out / name
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return path

    def _record(self, name, kind, params):
        self.entries = [e for e in self.entries if e["path"] != name]
        self.entries.append({"path": name, "kind": kind, "params": params or {}})

    def text(self, name: str, text: str, kind: str, params=None):
        self._atomic(name, text.encode())
        self._record(name, kind, params)
        return self.out / name

    def json(self, name: str, obj, kind: str = "report", params=None):
        return self.text(name, json.dumps(obj, indent=2, default=_json_default) + "\n", kind, params)

    def csv(self, name: str, header, rows, params=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
        return self.text(name, buf.getvalue(), "series", params)

    def figure(self, name: str, x, panels, xlabel, title="", markers=False, vlines=(), params=None):
        if not self.plots:
            return None
        from .plotting import render_panels

        render_panels(self.out / name, x, panels, xlabel, title, markers, vlines)
        self._record(name, "plot", params)
        return self.out / name

    def finalize(self, status: int):
        manifest = {"schema": SCHEMA, "command": self.command, "status": status,
                    "artifacts": sorted(self.entries, key=lambda e: e["path"])}
        self._atomic("manifest.json", (json.dumps(manifest, indent=2, default=_json_default) + "\n").encode())


# -- configuration ----------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = _parse_value(value.strip())
    return out


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"spec file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"spec file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("spec file must contain a JSON object")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise UsageError(f"unsupported schema {data.get('schema')!r}; expected {SCHEMA}")
    return data


def _split(command: str, data: dict, overrides: dict, declared: set):
    options = dict(RUN_OPTIONS[command])
    for key, value in overrides.items():
        if key in options:
            options[key] = value
        elif key in declared:
            data[key] = value
        else:
            raise UsageError(f"unknown key {key!r} for {command}")
    for key in list(data):
        if key == "schema":
            data.pop(key)
        elif key in options and key not in declared:
            options[key] = data.pop(key)
    return data, options


def load_pulse(command: str, spec_path, overrides: dict):
    data = _read_json(spec_path) if spec_path else monochromatic_reference(0.1, 0.05, 10).to_dict()
    declared = {"m", "n", "delta", "f", "eta", "f_tg"}
    data, options = _split(command, data, overrides, declared)
    unknown = set(data) - declared
    if unknown:
        raise UsageError(f"unknown key {sorted(unknown)[0]!r} in pulse spec")
    if "n" in overrides and "f" not in overrides:
        raise UsageError("overriding n requires a matching f")
    try:
        return PulseSpec.from_dict(data), options
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid pulse spec: {exc}") from None


def load_problem(command: str, spec_path, overrides: dict):
    data = _read_json(spec_path) if spec_path else {}
    declared = {f.name for f in fields(OptimizationProblem)}
    data, options = _split(command, data, overrides, declared)
    unknown = set(data) - declared
    if unknown:
        raise UsageError(f"unknown key {sorted(unknown)[0]!r} in problem spec")
    try:
        return OptimizationProblem.from_dict(data), options
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid problem spec: {exc}") from None


# -- commands ---------------------------------------------------------------------------

def _time_grid(t_end: float, grid: int) -> np.ndarray:
    points = max(2, int(np.ceil(t_end / PERIOD * grid)) + 1)
    return np.linspace(0.0, t_end, points)


def _complex_pair(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _solve_or_raise(problem: OptimizationProblem):
    res = solve(problem)
    if not res.feasible:
        raise InfeasibleError(f"no feasible pulse for n={problem.n} (max residual {res.max_residual:.3g})")
    return res


def _target_population(f_tg, cfg, times, label):
    idx = BasisIndex.parse(label)
    col = 2 * 1 + 0  # |g,1>
    row = 2 * idx.k + int(idx.electronic)
    return np.array([abs(target_propagator(f_tg, cfg, t)[row, col]) ** 2 for t in times])


def cmd_optimize(problem, options, art, grid):
    res = solve(problem)
    art.json("result.json", res.to_dict(), "result", {"n": problem.n})
    if res.feasible:
        art.json("pulse.json", {"schema": SCHEMA, **res.spec(problem).to_dict()}, "pulse", {"n": problem.n})
    art.csv("delta_profile.csv", ["delta", "objective"], res.delta_profile)
    print(json.dumps({"delta_opt": res.delta_opt, "objective_value": res.objective_value,
                      "feasible": res.feasible, "max_residual": res.max_residual}, indent=2))
    if not res.feasible:
        raise InfeasibleError(res.message)


def cmd_simulate(spec, options, art, grid):
    init = str(BasisIndex.parse(options["initial"]))
    times = _time_grid(float(options["cycles"]) * cycle_length(spec.f_tg), grid)
    trace = simulate(spec, init, times)
    art.text("trace.csv", trace.to_csv(), "series", {"initial": init, "points": len(times)})
    if trace.flagged:
        log.warning("trace flagged: defect %.3g, leakage %.3g", trace.unitarity_defect, trace.leakage)
    print(json.dumps({"points": len(times), "defect": trace.unitarity_defect, "leakage": trace.leakage}))


def cmd_evaluate(spec, options, art, grid):
    init = str(BasisIndex.parse(options["initial"]))
    k = BasisIndex.parse(init).k + (0 if init.startswith("g") else 1)
    report = {
        "g_integrals": g_integrals(spec, max(k, 1)).as_dict(),
        "state_infidelity": state_infidelity(spec, init).value,
        "gate_infidelity_truncated": gate_infidelity_truncated(spec, int(options["d"])).value,
        "gate_infidelity_asymptotic": gate_infidelity_asymptotic(spec).value,
        "constraint_residuals": constraint_residuals(spec).r,
        "full_constraint_residuals": full_constraint_residuals(spec).r,
    }
    if options["cycle"] and init.startswith("g") and k >= 1:
        report["cycle_infidelity"] = cycle_infidelity(spec, init).value
    art.json("functionals.json", report, params={"initial": init})
    print(json.dumps(report, indent=2, default=_json_default))


def cmd_coeffs(spec, options, art, grid):
    co = coefficients(spec)
    asm = assemble(spec)
    report = {
        "branch": co.branch.value,
        "alpha11_branch": co.alpha11_branch,
        "alpha": {k: _complex_pair(v) for k, v in co.as_dict().items()},
        "c": {name: _complex_pair(v) for name, v in zip(C_OPERATORS, asm.c)},
    }
    art.json("coeffs.json", report)
    print(json.dumps(report, indent=2))


def cmd_verify_magnus(spec, options, art, grid):
    oracle = alpha_numeric_all(spec)
    closed = coefficients(spec).as_dict()
    labels = [k for k in ALL_LABELS if k in oracle]
    # coefficients that vanish identically are compared against the family scale
    floor = 1e-6 * max(abs(oracle[k]) for k in labels)
    rows = {}
    for label in labels:
        c, o = closed[label], oracle[label]
        rows[label] = {"closed_form": _complex_pair(c), "oracle": _complex_pair(o),
                       "rel_err": abs(c - o) / max(abs(o), floor)}
    worst = max(r["rel_err"] for r in rows.values())
    art.json("verify_magnus.json", {"coefficients": rows, "max_rel_err": worst})
    print(json.dumps({"max_rel_err": worst, "count": len(rows)}))
    if worst >= float(options["rtol"]):
        raise RuntimeError(f"closed forms disagree with the oracle (max rel err {worst:.3g})")


def cmd_timing_scan(spec, options, art, grid):
    init = str(BasisIndex.parse(options["initial"]))
    mono = monochromatic_reference(spec.f_tg, spec.eta0, spec.m)
    qs = list(range(1, int(options["q_max"]) + 1))
    rows = [(q, timing_sensitivity(spec, init, q), timing_sensitivity(mono, init, q)) for q in qs]
    art.csv("timing.csv", ["q", "dPdt_pulse", "dPdt_mono"], rows, {"initial": init})
    art.figure("timing.png", qs, [("|dP/dt| at t=qT", {"pulse": [r[1] for r in rows], "mono": [r[2] for r in rows]})],
               "q", markers=True)


def cmd_sweep(problem, options, art, grid, name="sweep"):
    ns = range(int(options["n_min"]), int(options["n_max"]) + 1)
    rows = improvement_sweep(problem, ns)
    art.csv(f"{name}.csv", ["n", "R_cycle", "R_theory", "I_mono", "I_poly", "delta_opt", "feasible"],
            [(r.n, r.R_cycle, r.R_theory, r.I_mono, r.I_poly, r.delta_opt, r.feasible) for r in rows],
            {"objective": problem.objective, "constraints": problem.constraints})
    art.figure(f"{name}.png", [r.n for r in rows],
               [("improvement R", {"theory": [r.R_theory for r in rows], "one cycle": [r.R_cycle for r in rows]})],
               "n", markers=True)
    return rows


def _compare_pulses(problem, options, art, grid, name, constraints):
    problem = problem.replace(constraints=constraints)
    res = _solve_or_raise(problem)
    poly = res.spec(problem)
    mono = monochromatic_reference(problem.f_tg, problem.eta, problem.m)
    times = _time_grid(float(options["cycles"]) * cycle_length(problem.f_tg), grid)
    cfg = SpaceConfig.for_level(1)
    traces = {key: simulate(s, "g1", times, cfg) for key, s in (("mono", mono), ("poly", poly))}
    cols = {}
    for label in ("g1", "e1"):
        for key in ("mono", "poly"):
            cols[f"P_{label}_{key}"] = traces[key].population(label)
        cols[f"P_{label}_target"] = _target_population(problem.f_tg, cfg, times, label)
    art.csv(f"{name}.csv", ["t"] + list(cols), zip(times, *cols.values()), {"n": problem.n, "constraints": constraints})
    art.json(f"{name}_pulse.json", {"schema": SCHEMA, **poly.to_dict()}, "pulse")
    art.figure(f"{name}.png", times / PERIOD,
               [(f"P_{lab}", {k.rsplit("_", 1)[1]: v for k, v in cols.items() if k.startswith(f"P_{lab}_")})
                for lab in ("g1", "e1")], "t / T")


def cmd_fig1(problem, options, art, grid):
    _compare_pulses(problem, options, art, grid, "fig1", "five")


def cmd_fig4(problem, options, art, grid):
    _compare_pulses(problem, options, art, grid, "fig4", "seven")


def cmd_fig2(problem, options, art, grid):
    cmd_sweep(problem.replace(objective="state"), options, art, grid, "fig2")


def cmd_fig3(problem, options, art, grid):
    res = _solve_or_raise(problem)
    poly = res.spec(problem)
    mono = monochromatic_reference(problem.f_tg, problem.eta, problem.m)
    q, hw = int(options["q"]), float(options["half_width"])
    window = np.linspace((q - hw) * PERIOD, (q + hw) * PERIOD, grid + 1)
    times = np.concatenate([[0.0], window])
    cfg = SpaceConfig.for_level(1)
    cols = {
        "P_g1_mono": simulate(mono, "g1", times, cfg).population("g1")[1:],
        "P_g1_target": _target_population(problem.f_tg, cfg, window, "g1"),
        "P_g1_poly": simulate(poly, "g1", times, cfg).population("g1")[1:],
    }
    art.csv("fig3.csv", ["t"] + list(cols), zip(window, *cols.values()), {"q": q, "n": problem.n})
    art.figure("fig3.png", window / PERIOD, [("P_g1", {k.rsplit("_", 1)[1]: v for k, v in cols.items()})], "t / T",
               vlines=[q])


def cmd_fig5(problem, options, art, grid):
    f0, delta = float(options["f0"]), float(options["delta"])
    spec = PulseSpec(m=problem.m, n=0, delta=delta, f=[f0], eta=problem.eta, f_tg=problem.f_tg)
    cfg = SpaceConfig.for_level(1)
    times = _time_grid(float(options["cycles"]) * cycle_length(problem.f_tg), grid)
    exact = simulate(spec, "g1", times, cfg)
    psi0 = np.zeros(cfg.dim)
    psi0[2] = 1.0
    cols = {}
    for label in ("g1", "e0"):
        cols[f"P_{label}_exact"] = exact.population(label)
        for order, name in enumerate(("zeroth", "first", "second")):
            H = assemble(spec, cfg, max_order=order).H_eff
            cols[f"P_{label}_{name}"] = trace_from_propagators(propagate_effective(H, times), psi0, cfg).population(label)
    art.csv("fig5.csv", ["t"] + list(cols), zip(times, *cols.values()), {"delta": delta, "f0": f0})
    art.figure("fig5.png", times / PERIOD,
               [(f"P_{lab}", {k.rsplit("_", 1)[1]: v for k, v in cols.items() if k.startswith(f"P_{lab}_")})
                for lab in ("g1", "e0")], "t / T")


def _objective_comparison(problem, options, art, grid, name, other, column):
    ns = range(int(options["n_min"]), int(options["n_max"]) + 1)
    base = improvement_sweep(problem.replace(objective="state"), ns)
    alt = improvement_sweep(problem.replace(objective=other), ns)
    art.csv(f"{name}.csv", ["n", "R_state", column], [(a.n, a.R_cycle, b.R_cycle) for a, b in zip(base, alt)],
            {"objective": other, "d": problem.d})
    art.figure(f"{name}.png", [a.n for a in base],
               [("improvement R", {"state": [a.R_cycle for a in base], column[2:]: [b.R_cycle for b in alt]})],
               "n", markers=True)


def cmd_fig6(problem, options, art, grid):
    _objective_comparison(problem, options, art, grid, "fig6", "gate_truncated", "R_truncated")


def cmd_fig7(problem, options, art, grid):
    _objective_comparison(problem, options, art, grid, "fig7", "gate_asymptotic", "R_asymptotic")


COMMANDS = {
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "coeffs": cmd_coeffs,
    "verify-magnus": cmd_verify_magnus,
    "sweep-n": cmd_sweep,
    "timing-scan": cmd_timing_scan,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
    "fig6": cmd_fig6,
    "fig7": cmd_fig7,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polysideband", description="Polychromatic sideband pulse synthesis and verification.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", help="pulse JSON (pulse commands) or problem JSON (optimizer commands)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        p.add_argument("--grid", type=int, default=200, help="time points per drive period (default 200)")
        p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None) -> int:
    art = None
    status = EXIT_OK
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.grid < 2:
            raise UsageError("--grid must be at least 2")
        overrides = parse_overrides(args.set)
        if args.command in PULSE_COMMANDS:
            config, options = load_pulse(args.command, args.spec, overrides)
            resolved = config.to_dict()
        else:
            config, options = load_problem(args.command, args.spec, overrides)
            resolved = asdict(config)
        art = Artifacts(Path(args.out), args.command, plots=not args.no_plots)
        art.json("config.json", {"schema": SCHEMA, "command": args.command, "spec": resolved, "options": options,
                                 "overrides": overrides, "grid": args.grid}, "config")
        COMMANDS[args.command](config, options, art, args.grid)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        status = EXIT_INFEASIBLE
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        status = EXIT_INTEGRATION
    except (ValueError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    finally:
        if art is not None:
            art.finalize(status)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
