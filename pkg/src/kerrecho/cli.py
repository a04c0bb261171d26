"""Scenario runner: every engine behind one command-line front end.

Subcommands (each reads one scenario file, writes CSV traces plus JSON
reports into --out, and always leaves a run manifest behind):

    classical-ensemble   Monte Carlo free + kicked <q(t)> and phase-space snapshots
    quantum-evolve       Fock-space free + kicked coherent-state traces
    cat-evolve           free + kicked two-component cat traces
    echo-sweep           first-echo amplitudes over a (theta, N+) grid
    lindblad-evolve      damped vs undamped cat dynamics with diagnostics
    revival-decompose    fractional-revival decompositions and Gauss-sum tables
    oracle-check         battery of closed-form vs brute-force comparisons

Exit codes: 0 success, 2 usage error, 3 validation/config error, 4 engine or
I/O failure.  Flags mirror environment variables with the KERRECHO_ prefix
(KERRECHO_OUT, KERRECHO_SEED, KERRECHO_THREADS, KERRECHO_FORCE,
KERRECHO_LONG); command-line flags win.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np
import scipy

from . import __version__, analysis, classical, csvio, lindblad, quantum
from .model import (
    CatSpec,
    CoherentSpec,
    EnsembleSpec,
    FockSpaceSpec,
    OscillatorParams,
    Scenario,
    ScenarioValidationError,
    TimeGrid,
    validate_config,
)
from .scenario import dump_scenario, load_scenario, parse_overrides

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_ENGINE = 4

LONG_RUN_N_MAX = 64  # larger cutoffs require --long


class _Gate(Exception):
    """Internal control-flow error carrying an exit code."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _env(name, default=None):
    return os.environ.get("KERRECHO_" + name, default)


def _env_flag(name) -> bool:
    val = _env(name)
    return val is not None and val.strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrecho",
        description="kicked Kerr-oscillator echo simulator",
    )
    parser.add_argument("--version", action="version", version=f"kerrecho {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario file (INI format)")
        p.add_argument("--out", default=_env("OUT"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override ensemble seed")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one scenario value (repeatable)",
        )
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--long", action="store_true", help="allow reference-scale runs")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker pool size for sweeps (default: hardware parallelism)",
        )

    common(sub.add_parser("classical-ensemble", help="Monte Carlo ensemble traces + snapshots"))
    common(sub.add_parser("quantum-evolve", help="coherent-state free/kicked traces"))
    common(sub.add_parser("cat-evolve", help="cat-state free/kicked traces"))
    p = sub.add_parser("echo-sweep", help="echo amplitudes over (theta, N+)")
    common(p)
    p.add_argument("--grid-points", type=int, default=9, help="points per sweep axis")
    common(sub.add_parser("lindblad-evolve", help="damped vs undamped cat dynamics"))
    p = sub.add_parser("revival-decompose", help="fractional-revival tables")
    common(p)
    p.add_argument(
        "--nu",
        default="3,5,7,19,23",
        help="comma-separated fractional-revival orders",
    )
    common(sub.add_parser("oracle-check", help="closed-form vs numeric battery"), config_required=False)
    return parser


# ---------------------------------------------------------------------------
# helpers shared by the handlers
# ---------------------------------------------------------------------------

def _load(args) -> tuple[Scenario, str]:
    if not args.config:
        raise _Gate(EXIT_VALIDATION, "missing --config")
    if not os.path.exists(args.config):
        raise _Gate(EXIT_VALIDATION, f"config file not found: {args.config}")
    overrides = parse_overrides(args.overrides)
    scenario = load_scenario(args.config, overrides)
    seed = args.seed if args.seed is not None else _env("SEED")
    if seed is not None:
        ens = scenario.ensemble or EnsembleSpec()
        scenario = replace(scenario, ensemble=replace(ens, seed=int(seed)))
    scenario = validate_config(scenario)
    return scenario, dump_scenario(scenario)


def _prepare_out(args) -> str:
    out = args.out
    if not out:
        raise _Gate(EXIT_VALIDATION, "missing --out (or KERRECHO_OUT)")
    os.makedirs(out, exist_ok=True)
    manifest = os.path.join(out, "manifest.json")
    force = args.force or _env_flag("FORCE")
    if os.path.exists(manifest) and not force:
        raise _Gate(EXIT_ENGINE, f"refusing to overwrite {manifest} (use --force)")
    return out


def _carrier(scenario) -> float:
    a2 = abs(complex(scenario.state.alpha0)) ** 2
    return 1.0 + scenario.oscillator.chi * 2.0 * a2


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = _env("THREADS")
    if env is not None:
        return max(1, int(env))
    return os.cpu_count() or 1


def _is_long(args) -> bool:
    return args.long or _env_flag("LONG")


def _echo_expectations(scenario, cat: bool):
    """Default detection windows for the scenario's kick timing."""
    chi = scenario.oscillator.chi
    tau = scenario.pulse.tau
    t_end = scenario.grid.t_end
    expected = []
    widths = []
    for n in (1, 2, 3):
        t = analysis.classical_echo_time(n, tau)
        if t + tau / 2.0 <= t_end:
            expected.append(analysis.ExpectedEcho(analysis.KIND_CLASSICAL, n, t))
            widths.append(tau / 2.0)
    t_q = analysis.quantum_echo_time(1, chi, tau, cat=cat)
    if 0 < t_q - tau / 2.0 and t_q + tau / 2.0 <= t_end:
        expected.append(analysis.ExpectedEcho(analysis.KIND_QUANTUM, 1, t_q))
        widths.append(tau / 2.0)
    revival = math.pi / (2.0 * chi) if cat else math.pi / chi
    kind = analysis.KIND_QUARTER_REVIVAL if cat else analysis.KIND_HALF_REVIVAL
    if revival + tau / 4.0 <= t_end:
        expected.append(analysis.ExpectedEcho(kind, 1, revival))
        widths.append(tau / 4.0)
    if cat and math.pi / chi + tau / 4.0 <= t_end:
        expected.append(analysis.ExpectedEcho(analysis.KIND_HALF_REVIVAL, 1, math.pi / chi))
        widths.append(tau / 4.0)
    # drop overlapping windows, keeping earlier-listed (lower-order) events
    kept, kept_w = [], []
    for e, w in zip(expected, widths):
        if all(abs(e.time - k.time) > w + kw for k, kw in zip(kept, kept_w)):
            kept.append(e)
            kept_w.append(w)
    return kept, kept_w


# ---------------------------------------------------------------------------
# subcommand handlers (each returns a dict of panel -> filename)
# ---------------------------------------------------------------------------

def _run_classical(scenario, out, args, timings):
    if scenario.ensemble is None:
        raise _Gate(EXIT_VALIDATION, "classical-ensemble requires an [ensemble] section")
    if scenario.pulse is None:
        raise _Gate(EXIT_VALIDATION, "classical-ensemble requires a [pulse] section")
    chi = scenario.oscillator.chi
    tau = scenario.pulse.tau
    state = scenario.state
    if not isinstance(state, CoherentSpec):
        raise _Gate(EXIT_VALIDATION, "classical-ensemble expects a coherent initial state")

    t0 = time.perf_counter()
    points = classical.sample_initial_ensemble(state, scenario.ensemble)
    timings["sampling"] = time.perf_counter() - t0

    snaps = scenario.extras.get("snapshots")
    free_snaps = list(snaps) if snaps else [0.1, tau, 2.0 * tau]
    kicked_snaps = list(snaps) if snaps else [2.0 * tau]
    free_snaps = [t for t in free_snaps if scenario.grid.t_start <= t <= scenario.grid.t_end]
    kicked_snaps = [t for t in kicked_snaps if scenario.grid.t_start <= t <= scenario.grid.t_end]
    hist_bins = scenario.extras.get("hist_bins", 240)
    hist_range = scenario.extras.get("hist_range")

    t0 = time.perf_counter()
    free = classical.ensemble_mean_q(
        points, chi, scenario.grid, pulse=None,
        snapshot_times=free_snaps, hist_bins=hist_bins, hist_range=hist_range,
    )
    timings["free_propagation"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    kicked = classical.ensemble_mean_q(
        points, chi, scenario.grid, pulse=scenario.pulse,
        snapshot_times=kicked_snaps, hist_bins=hist_bins, hist_range=hist_range,
    )
    timings["kicked_propagation"] = time.perf_counter() - t0

    panels = {}
    path = os.path.join(out, "mean_q_free.csv")
    csvio.write_trace_csv(path, free.mean_q.times, free.mean_q.values, stderr=free.mean_q.stderr)
    panels["mean_q_free"] = path
    path = os.path.join(out, "mean_q_kicked.csv")
    csvio.write_trace_csv(path, kicked.mean_q.times, kicked.mean_q.values, stderr=kicked.mean_q.stderr)
    panels["mean_q_kicked"] = path
    for hist in free.snapshots:
        path = os.path.join(out, f"phase_space_free_t{hist.time:g}.csv")
        csvio.write_histogram_csv(path, hist)
        panels[f"phase_space_free_t{hist.time:g}"] = path
    for hist in kicked.snapshots:
        path = os.path.join(out, f"phase_space_kicked_t{hist.time:g}.csv")
        csvio.write_histogram_csv(path, hist)
        panels[f"phase_space_kicked_t{hist.time:g}"] = path

    expected, widths = _echo_expectations(scenario, cat=False)
    pairs = [(e, w) for e, w in zip(expected, widths) if e.kind == analysis.KIND_CLASSICAL]
    expected = [e for e, _ in pairs]
    widths = [w for _, w in pairs]
    q0 = state.q0
    models = {
        (analysis.KIND_CLASSICAL, 1): abs(q0) * abs(classical.first_echo_amplitude(abs(q0), chi, scenario.pulse.g0, tau))
    }
    events = analysis.detect_echoes(
        kicked.mean_q, expected, widths, carrier_omega=_carrier(scenario)
    )
    report = analysis.compare_to_prediction(events, models)
    path = os.path.join(out, "echo_report.json")
    csvio.write_echo_report(path, events, report)
    panels["echo_report"] = path
    return panels


def _quantum_initial(scenario):
    if isinstance(scenario.state, CatSpec):
        return quantum.cat_state_vector(scenario.state, scenario.fock)
    return quantum.coherent_state_vector(scenario.state.alpha0, scenario.fock)


def _run_quantum(scenario, out, args, timings, cat: bool):
    if scenario.pulse is None:
        raise _Gate(EXIT_VALIDATION, "this subcommand requires a [pulse] section")
    if cat and not isinstance(scenario.state, CatSpec):
        raise _Gate(EXIT_VALIDATION, "cat-evolve expects state.kind = cat")
    if not cat and isinstance(scenario.state, CatSpec):
        raise _Gate(EXIT_VALIDATION, "quantum-evolve expects state.kind = coherent")
    chi = scenario.oscillator.chi
    ops = quantum.build_operators(chi, scenario.fock)
    psi0 = _quantum_initial(scenario)

    t0 = time.perf_counter()
    free = quantum.free_expectation_trace(psi0, chi, scenario.grid)
    timings["free_trace"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    kicked = quantum.kicked_expectation_trace(psi0, ops, chi, scenario.pulse, scenario.grid)
    timings["kicked_trace"] = time.perf_counter() - t0

    panels = {}
    path = os.path.join(out, "mean_q_free.csv")
    csvio.write_trace_csv(path, free.times, free.values, mean_a=free.mean_a)
    panels["mean_q_free"] = path
    path = os.path.join(out, "mean_q_kicked.csv")
    csvio.write_trace_csv(path, kicked.times, kicked.values, mean_a=kicked.mean_a)
    panels["mean_q_kicked"] = path

    final = quantum.kicked_state_at(
        psi0, ops, chi, scenario.pulse, scenario.grid.t_end, t_start=scenario.grid.t_start
    )
    path = os.path.join(out, "final_state.csv")
    csvio.write_state_csv(path, final)
    panels["final_state"] = path

    expected, widths = _echo_expectations(scenario, cat=cat)
    models = {}
    if not cat:
        models.update(_coherent_echo_models(scenario))
    events = analysis.detect_echoes(
        analysis.TimeSeries(kicked.times, kicked.values),
        expected,
        widths,
        carrier_omega=_carrier(scenario),
    )
    report = analysis.compare_to_prediction(events, models)
    path = os.path.join(out, "echo_report.json")
    csvio.write_echo_report(path, events, report)
    panels["echo_report"] = path
    return panels


def _coherent_echo_models(scenario):
    """Closed-form echo amplitudes when tau matches T_rev/nu with nu odd,
    nu mod 4 = 3 (the validity class of the Bessel-factor trace)."""
    chi = scenario.oscillator.chi
    tau = scenario.pulse.tau
    alpha0 = complex(scenario.state.alpha0)
    q0 = math.sqrt(2.0) * abs(alpha0)
    nu = round(2.0 * math.pi / (chi * tau))
    if nu < 3 or abs(2.0 * math.pi / (chi * nu) - tau) > 1e-9 * tau:
        return {}
    if nu % 2 == 0 or nu % 4 != 3:
        return {}
    models = {}
    for r_star, kind in ((1, analysis.KIND_CLASSICAL), (-1, analysis.KIND_QUANTUM)):
        pred = quantum.kicked_echo_prediction(
            alpha0, chi, scenario.pulse.g0, nu, r_star, np.array([tau * 2.0 + 1e-9])
        )
        models[(kind, 1)] = q0 * pred.amplitude
    return models


def _run_sweep(scenario, out, args, timings):
    if not isinstance(scenario.state, CatSpec):
        raise _Gate(EXIT_VALIDATION, "echo-sweep expects state.kind = cat")
    n = args.grid_points
    theta = np.linspace(0.0, 2.0 * math.pi, n)
    n_plus = np.sqrt(np.linspace(0.05, 0.95, n))
    t0 = time.perf_counter()
    grid = analysis.sweep_cat_echo_amplitudes(
        scenario, theta, n_plus, engine="fock", n_workers=_threads(args)
    )
    timings["sweep"] = time.perf_counter() - t0
    panels = {}
    for name, matrix in (
        ("classical_echo_amplitude", grid.classical_amplitude),
        ("quantum_echo_amplitude", grid.quantum_amplitude),
        ("classical_echo_noise_floor", grid.classical_noise_floor),
        ("quantum_echo_noise_floor", grid.quantum_noise_floor),
    ):
        path = os.path.join(out, f"{name}.csv")
        csvio.write_sweep_csv(path, "theta", grid.theta_values, "n_plus", grid.n_plus_values, matrix)
        panels[name] = path
    return panels


def _run_lindblad(scenario, out, args, timings):
    if scenario.oscillator.gamma <= 0:
        raise _Gate(EXIT_VALIDATION, "lindblad-evolve requires oscillator.gamma > 0")
    if scenario.fock.n_max > LONG_RUN_N_MAX and not _is_long(args):
        raise _Gate(
            EXIT_VALIDATION,
            f"n_max={scenario.fock.n_max} exceeds {LONG_RUN_N_MAX}; pass --long for reference-scale runs",
        )
    chi = scenario.oscillator.chi
    ops = quantum.build_operators(chi, scenario.fock)
    psi0 = _quantum_initial(scenario)
    closed = OscillatorParams(chi=chi, gamma=0.0)

    panels = {}
    t0 = time.perf_counter()
    free_damped = lindblad.propagate_density(
        lindblad.state_to_density(psi0), ops, scenario.oscillator, scenario.grid, pulse=None
    )
    timings["free_damped"] = time.perf_counter() - t0
    free_undamped = quantum.free_expectation_trace(psi0, chi, scenario.grid)

    t0 = time.perf_counter()
    kicked_damped = None
    if scenario.pulse is not None:
        kicked_damped = lindblad.propagate_density(
            lindblad.state_to_density(psi0),
            ops,
            scenario.oscillator,
            scenario.grid,
            pulse=scenario.pulse,
        )
        kicked_undamped = quantum.kicked_expectation_trace(
            psi0, ops, chi, scenario.pulse, scenario.grid
        )
        timings["kicked_damped"] = time.perf_counter() - t0

    path = os.path.join(out, "mean_q_free_damped.csv")
    csvio.write_trace_csv(path, free_damped.mean_q.times, free_damped.mean_q.values, mean_a=free_damped.mean_a)
    panels["mean_q_free_damped"] = path
    path = os.path.join(out, "mean_q_free_undamped.csv")
    csvio.write_trace_csv(path, free_undamped.times, free_undamped.values, mean_a=free_undamped.mean_a)
    panels["mean_q_free_undamped"] = path
    path = os.path.join(out, "diagnostics_free.json")
    csvio.write_diagnostics(path, free_damped.diagnostics)
    panels["diagnostics_free"] = path

    if kicked_damped is not None:
        path = os.path.join(out, "mean_q_kicked_damped.csv")
        csvio.write_trace_csv(path, kicked_damped.mean_q.times, kicked_damped.mean_q.values, mean_a=kicked_damped.mean_a)
        panels["mean_q_kicked_damped"] = path
        path = os.path.join(out, "mean_q_kicked_undamped.csv")
        csvio.write_trace_csv(path, kicked_undamped.times, kicked_undamped.values, mean_a=kicked_undamped.mean_a)
        panels["mean_q_kicked_undamped"] = path
        path = os.path.join(out, "diagnostics_kicked.json")
        csvio.write_diagnostics(path, kicked_damped.diagnostics)
        panels["diagnostics_kicked"] = path

        cat = isinstance(scenario.state, CatSpec)
        expected, widths = _echo_expectations(scenario, cat=cat)
        events = analysis.detect_echoes(
            kicked_damped.mean_q, expected, widths, carrier_omega=_carrier(scenario)
        )
        path = os.path.join(out, "echo_report.json")
        csvio.write_echo_report(path, events, analysis.compare_to_prediction(events))
        panels["echo_report"] = path
    return panels


def _run_decompose(scenario, out, args, timings):
    chi = scenario.oscillator.chi
    alpha0 = complex(scenario.state.alpha0)
    nus = [int(tok) for tok in str(args.nu).replace(",", " ").split()]
    panels = {}
    records = []
    fock = scenario.fock
    psi0 = quantum.coherent_state_vector(alpha0, fock)
    for nu in nus:
        decomp = quantum.fractional_revival_decomposition(alpha0, chi, nu)
        path = os.path.join(out, f"decomposition_nu{nu}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("k,re_c,im_c,abs_c,re_alpha,im_alpha\n")
            for k in range(nu):
                c, a = decomp.coefficients[k], decomp.amplitudes[k]
                fh.write(
                    f"{k},{c.real!r},{c.imag!r},{abs(c)!r},{a.real!r},{a.imag!r}\n"
                )
        panels[f"decomposition_nu{nu}"] = path
        recon = quantum.reconstruct_decomposition_state(decomp, fock)
        target = quantum.evolve_free(psi0, chi, 2.0 * math.pi / (chi * nu))
        fidelity = abs(np.vdot(recon, target)) / np.linalg.norm(recon)
        records.append({"nu": nu, "reconstruction_fidelity": float(fidelity)})
    path = os.path.join(out, "reconstruction_report.json")
    csvio._write_json(path, {"schema": "kerrecho/revival-decompose/1", "records": records})
    panels["reconstruction_report"] = path
    return panels


def _run_oracle_check(scenario, out, args, timings):
    checks = []

    def check(name, deviation, tol):
        checks.append({"name": name, "deviation": float(deviation), "tolerance": tol, "ok": bool(deviation < tol)})

    chi, alpha0 = 1.0, 2.0
    fock = FockSpaceSpec(36)
    psi0 = quantum.coherent_state_vector(alpha0, fock)
    ts = np.linspace(0.0, 2.0 * math.pi, 200)
    numeric = np.array([quantum.expectation_a(quantum.evolve_free(psi0, chi, t)) for t in ts])
    check(
        "free coherent trace vs closed form",
        np.max(np.abs(numeric - quantum.analytic_mean_a_coherent(alpha0, chi, ts))),
        1e-8,
    )

    cat = CatSpec(alpha0=alpha0, n_plus=math.sqrt(0.8), n_minus=math.sqrt(0.2), theta=math.pi / 2)
    psi_cat = quantum.cat_state_vector(cat, fock)
    numeric = np.array([quantum.expectation_a(quantum.evolve_free(psi_cat, chi, t)) for t in ts])
    check(
        "free cat trace vs closed form",
        np.max(np.abs(numeric - quantum.analytic_mean_a_cat(cat, chi, ts))),
        1e-8,
    )

    worst = 0.0
    for nu in (3, 5, 7, 11, 13, 15, 17, 19, 21, 23):
        direct = quantum.fractional_revival_decomposition(1.0, 1.0, nu).coefficients
        if nu % 2 == 1:
            closed = np.array([quantum.gauss_sum_closed_form(nu, k) for k in range(nu)])
            worst = max(worst, float(np.max(np.abs(direct - closed))))
    check("Gauss-sum closed form vs direct sum", worst, 1e-12)

    grid = TimeGrid(0.0, math.pi, 0.01)
    params = OscillatorParams(chi=chi, gamma=0.03)
    ops = quantum.build_operators(chi, fock)
    result = lindblad.propagate_density(lindblad.state_to_density(psi0), ops, params, grid)
    analytic = lindblad.damped_mean_a_analytic(CoherentSpec(alpha0), chi, params.gamma, grid.times)
    check(
        "damped coherent trace vs closed form",
        np.max(np.abs(result.mean_a - analytic)),
        1e-4,
    )

    q0 = math.sqrt(2.0) * alpha0
    ts_cl = np.linspace(0.0, 0.5, 26)
    quad = classical.mean_q_free_quadrature(ts_cl, q0, chi)
    points = classical.sample_initial_ensemble(CoherentSpec(alpha0), EnsembleSpec(20000, 7))
    worst = 0.0
    for t, ref in zip(ts_cl, quad):
        qt, _ = classical.free_rotation(np.asarray(points.q), np.asarray(points.p), chi, t)
        se = qt.std(ddof=1) / math.sqrt(len(qt))
        worst = max(worst, abs(qt.mean() - ref) / (5.0 * se + 1e-30))
    check("classical Monte Carlo vs radial quadrature (5 SE units)", worst, 1.0)

    panels = {}
    path = os.path.join(out, "oracle_report.json")
    csvio._write_json(path, {"schema": "kerrecho/oracle-check/1", "checks": checks})
    panels["oracle_report"] = path
    for c in checks:
        status = "PASS" if c["ok"] else "FAIL"
        print(f"{status}: {c['name']} (deviation {c['deviation']:.3e}, tolerance {c['tolerance']:g})")
    if not all(c["ok"] for c in checks):
        raise _Gate(EXIT_ENGINE, "oracle check failed")
    return panels


_HANDLERS = {
    "classical-ensemble": _run_classical,
    "quantum-evolve": lambda s, o, a, t: _run_quantum(s, o, a, t, cat=False),
    "cat-evolve": lambda s, o, a, t: _run_quantum(s, o, a, t, cat=True),
    "echo-sweep": _run_sweep,
    "lindblad-evolve": _run_lindblad,
    "revival-decompose": _run_decompose,
    "oracle-check": _run_oracle_check,
}

_DEFAULT_ORACLE_SCENARIO = """
[oscillator]
chi = 1.0
[state]
kind = coherent
alpha0 = 2
[grid]
t_start = 0.0
t_end = 3.2
dt_out = 0.01
"""


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK

    started = time.time()
    timings: dict[str, float] = {}
    status, error, panels = "ok", None, {}
    scenario_text = None
    out = None
    code = EXIT_OK
    try:
        if args.subcommand == "oracle-check" and not args.config:
            from .scenario import scenario_from_text

            scenario = validate_config(scenario_from_text(_DEFAULT_ORACLE_SCENARIO))
            scenario_text = dump_scenario(scenario)
        else:
            scenario, scenario_text = _load(args)
        out = _prepare_out(args)
        panels = _HANDLERS[args.subcommand](scenario, out, args, timings)
        csvio.write_index(os.path.join(out, "index.json"), panels)
    except _Gate as exc:
        status, error, code = "error", str(exc), exc.code
    except ScenarioValidationError as exc:
        status, error, code = "error", "; ".join(exc.errors), EXIT_VALIDATION
    except Exception as exc:  # engine failure
        status, error, code = "error", f"{type(exc).__name__}: {exc}", EXIT_ENGINE
    finally:
        if out:
            try:
                seed = scenario.ensemble.seed if scenario_text and scenario.ensemble else None
            except NameError:
                seed = None
            manifest = {
                "subcommand": args.subcommand,
                "status": status,
                "error": error,
                "seed": seed,
                "resolved_scenario": scenario_text,
                "scenario_sha256": csvio.scenario_hash(scenario_text) if scenario_text else None,
                "engine_versions": {
                    "kerrecho": __version__,
                    "numpy": np.__version__,
                    "scipy": scipy.__version__,
                },
                "outputs": sorted(os.path.basename(p) for p in panels.values()),
                "timings_seconds": {**timings, "total": time.time() - started},
            }
            try:
                csvio.write_manifest(os.path.join(out, "manifest.json"), manifest)
            except OSError:
                code = code or EXIT_ENGINE
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
