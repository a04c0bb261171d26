"""Scenario files: flat INI-style documents describing one run.

A scenario groups oscillator constants, the optional kick pulse, the initial
state, the output grid and engine sizing into named sections::

    [oscillator]
    chi = 1.0
    gamma = 0.0
    # epsilon = 1.0          # inverse temperature; omit for T = 0

    [pulse]                   # omit the whole section for free evolution
    g0 = 0.01
    tau = 0.5
    sigma_g = 1e-3            # optional, defaults to 1e-3
    shape = gaussian          # or "square" (area-invariance checks)

    [state]
    kind = coherent           # or "cat"
    alpha0 = 6                # complex accepted, e.g. "2+1j"
    # cat states add:  n_plus, n_minus, theta

    [grid]
    t_start = 0.0
    t_end = 3.5
    dt_out = 0.005
    # snapshots = 0.1, 0.5, 1.0   # phase-space histogram times (classical)
    # hist_bins = 240             # histogram resolution
    # hist_range = 12.0           # histogram half-extent

    [ensemble]                # classical Monte Carlo only
    n_samples = 200000
    seed = 12345

    [fock]                    # Fock-space engines only; omitted -> auto cutoff
    n_max = 128

Unknown sections or keys are rejected, so typos fail loudly instead of
silently running with defaults.
"""
from __future__ import annotations

import configparser
import io

from .model import (
    CatSpec,
    CoherentSpec,
    EnsembleSpec,
    FockSpaceSpec,
    KickPulse,
    OscillatorParams,
    Scenario,
    ScenarioValidationError,
    TimeGrid,
)

_KNOWN_KEYS = {
    "oscillator": {"chi", "gamma", "epsilon"},
    "pulse": {"g0", "tau", "sigma_g", "shape"},
    "state": {"kind", "alpha0", "n_plus", "n_minus", "theta"},
    "grid": {"t_start", "t_end", "dt_out", "snapshots", "hist_bins", "hist_range"},
    "ensemble": {"n_samples", "seed"},
    "fock": {"n_max"},
}


def _parse_complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


def _check_unknown(parser: configparser.ConfigParser):
    errors = []
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            errors.append(f"{section}: unknown section")
            continue
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                errors.append(f"{section}.{key}: unknown key")
    if errors:
        raise ScenarioValidationError(errors)


def scenario_from_text(text: str, overrides: dict[str, str] | None = None) -> Scenario:
    """Parse a scenario document; `overrides` maps dotted paths to raw values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioValidationError([f"config: {exc}"]) from exc

    for path, value in (overrides or {}).items():
        section, _, key = path.partition(".")
        if not key:
            raise ScenarioValidationError([f"override {path!r}: expected section.key=value"])
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = value

    _check_unknown(parser)
    errors = []

    def fget(section, key, default=None, conv=float):
        if not parser.has_section(section) or key not in parser[section]:
            return default
        raw = parser[section][key]
        try:
            return conv(raw)
        except ValueError:
            errors.append(f"{section}.{key}: cannot parse {raw!r}")
            return default

    if not parser.has_section("oscillator"):
        errors.append("oscillator: section is required")
    if not parser.has_section("state"):
        errors.append("state: section is required")
    if not parser.has_section("grid"):
        errors.append("grid: section is required")
    if errors:
        raise ScenarioValidationError(errors)

    osc = OscillatorParams(
        chi=fget("oscillator", "chi", 0.0),
        gamma=fget("oscillator", "gamma", 0.0),
        epsilon=fget("oscillator", "epsilon", None),
    )

    pulse = None
    if parser.has_section("pulse"):
        pulse = KickPulse(
            g0=fget("pulse", "g0", 0.0),
            tau=fget("pulse", "tau", 0.0),
            sigma_g=fget("pulse", "sigma_g", KickPulse.sigma_g),
            shape=fget("pulse", "shape", "gaussian", conv=str).strip().lower(),
        )

    kind = fget("state", "kind", "coherent", conv=str).strip().lower()
    alpha0 = fget("state", "alpha0", 0j, conv=_parse_complex)
    if kind == "coherent":
        state = CoherentSpec(alpha0=alpha0)
    elif kind == "cat":
        state = CatSpec(
            alpha0=alpha0,
            n_plus=fget("state", "n_plus", 1.0),
            n_minus=fget("state", "n_minus", 0.0),
            theta=fget("state", "theta", 0.0),
        )
    else:
        errors.append(f"state.kind: unknown kind {kind!r}")
        state = CoherentSpec(alpha0=alpha0)

    grid = TimeGrid(
        t_start=fget("grid", "t_start", 0.0),
        t_end=fget("grid", "t_end", 0.0),
        dt_out=fget("grid", "dt_out", 0.0),
    )

    ensemble = None
    if parser.has_section("ensemble"):
        ensemble = EnsembleSpec(
            n_samples=fget("ensemble", "n_samples", EnsembleSpec.n_samples, conv=lambda s: int(float(s))),
            seed=fget("ensemble", "seed", 0, conv=lambda s: int(s, 0)),
        )

    fock = None
    if parser.has_section("fock"):
        fock = FockSpaceSpec(n_max=fget("fock", "n_max", 0, conv=lambda s: int(float(s))))

    if errors:
        raise ScenarioValidationError(errors)
    return Scenario(
        oscillator=osc,
        state=state,
        grid=grid,
        pulse=pulse,
        ensemble=ensemble,
        fock=fock,
        extras=_grid_extras(parser),
    )


def _grid_extras(parser) -> dict:
    extras = {}
    g = parser["grid"]
    if "snapshots" in g:
        extras["snapshots"] = tuple(float(tok) for tok in g["snapshots"].replace(",", " ").split())
    if "hist_bins" in g:
        extras["hist_bins"] = int(float(g["hist_bins"]))
    if "hist_range" in g:
        extras["hist_range"] = float(g["hist_range"])
    return extras


def load_scenario(path, overrides: dict[str, str] | None = None) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_text(fh.read(), overrides)


def parse_overrides(pairs) -> dict[str, str]:
    """Turn ["pulse.g0=0.02", ...] into an override mapping."""
    out = {}
    for pair in pairs or ():
        path, sep, value = pair.partition("=")
        if not sep:
            raise ScenarioValidationError([f"override {pair!r}: expected section.key=value"])
        out[path.strip()] = value.strip()
    return out


def dump_scenario(scenario: Scenario) -> str:
    """Serialize a scenario back to the INI document format."""
    parser = configparser.ConfigParser()
    osc = {"chi": repr(scenario.oscillator.chi), "gamma": repr(scenario.oscillator.gamma)}
    if scenario.oscillator.epsilon is not None:
        osc["epsilon"] = repr(scenario.oscillator.epsilon)
    parser["oscillator"] = osc

    if scenario.pulse is not None:
        parser["pulse"] = {
            "g0": repr(scenario.pulse.g0),
            "tau": repr(scenario.pulse.tau),
            "sigma_g": repr(scenario.pulse.sigma_g),
            "shape": scenario.pulse.shape,
        }

    state = scenario.state
    if isinstance(state, CatSpec):
        parser["state"] = {
            "kind": "cat",
            "alpha0": repr(complex(state.alpha0)).strip("()"),
            "n_plus": repr(state.n_plus),
            "n_minus": repr(state.n_minus),
            "theta": repr(state.theta),
        }
    else:
        parser["state"] = {"kind": "coherent", "alpha0": repr(complex(state.alpha0)).strip("()")}

    grid = {
        "t_start": repr(scenario.grid.t_start),
        "t_end": repr(scenario.grid.t_end),
        "dt_out": repr(scenario.grid.dt_out),
    }
    extras = scenario.extras
    if "snapshots" in extras:
        grid["snapshots"] = ", ".join(repr(t) for t in extras["snapshots"])
    if "hist_bins" in extras:
        grid["hist_bins"] = str(extras["hist_bins"])
    if "hist_range" in extras:
        grid["hist_range"] = repr(extras["hist_range"])
    parser["grid"] = grid

    if scenario.ensemble is not None:
        parser["ensemble"] = {
            "n_samples": str(scenario.ensemble.n_samples),
            "seed": str(scenario.ensemble.seed),
        }
    if scenario.fock is not None:
        parser["fock"] = {"n_max": str(scenario.fock.n_max)}

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
