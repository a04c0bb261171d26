"""Signal analysis: envelopes, echo/revival detection, parameter sweeps.

The position signal of a displaced Kerr oscillator is a fast carrier at
roughly 1 + chi*q0^2 under a slowly varying envelope.  Echoes and revivals
are detected as envelope maxima inside windows centered on the predicted
times

    classical echo   t = 2 n tau
    quantum echo     t = T_rev/2 - 2 n tau   (coherent state)
                     t = T_rev/4 - 2 n tau   (two-component cat)
    half revival     t = T_rev/2 = pi/chi
    quarter revival  t = T_rev/4 = pi/(2 chi)

with the local baseline and noise floor estimated from flanking buffer
regions, so that Monte Carlo ripple does not register as an event.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import hilbert

KIND_CLASSICAL = "classical-echo"
KIND_QUANTUM = "quantum-echo"
KIND_HALF_REVIVAL = "half-revival"
KIND_QUARTER_REVIVAL = "quarter-revival"


@dataclass(frozen=True)
class TimeSeries:
    """Sampled real observable; stderr is per-sample when present."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))


@dataclass(frozen=True)
class ExpectedEcho:
    """A predicted event to look for: kind, order n, center time, and an
    optional model amplitude to compare the measurement against."""

    kind: str
    order: int
    time: float
    prediction: float | None = None


@dataclass(frozen=True)
class EchoEvent:
    kind: str
    order: int
    t_predicted: float
    t_detected: float
    amplitude: float
    baseline: float
    noise_floor: float
    detected: bool
    prediction: float | None = None


@dataclass(frozen=True)
class SweepGrid:
    """First classical- and quantum-echo amplitudes over (theta, N+) axes."""

    theta_values: np.ndarray
    n_plus_values: np.ndarray
    classical_amplitude: np.ndarray  # shape (len(n_plus), len(theta))
    quantum_amplitude: np.ndarray
    classical_noise_floor: np.ndarray
    quantum_noise_floor: np.ndarray


class UndersampledSignal(ValueError):
    pass


class WindowConfigError(ValueError):
    pass


def classical_echo_time(n, tau):
    return 2.0 * n * tau


def quantum_echo_time(n, chi, tau, cat=False):
    """Center of the n-th quantum echo, ahead of the first (half or quarter)
    revival of the underlying state."""
    revival = math.pi / (2.0 * chi) if cat else math.pi / chi
    return revival - 2.0 * n * tau


def _estimate_carrier(times, values):
    """Dominant angular frequency from the FFT of the demeaned signal."""
    dt = times[1] - times[0]
    x = values - np.mean(values)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    freqs = np.fft.rfftfreq(len(x), dt)
    k = int(np.argmax(spec[1:])) + 1
    return 2.0 * math.pi * freqs[k]


def envelope(series: TimeSeries, carrier_omega: float | None = None) -> TimeSeries:
    """Magnitude envelope via the analytic signal.

    The series must resolve the carrier with at least 8 samples per period;
    violating that raises UndersampledSignal naming the required dt_out.
    Edge artifacts of the Hilbert transform are suppressed by even reflection
    padding before the FFT.
    """
    times, values = series.times, series.values
    if len(times) < 16:
        raise UndersampledSignal("need at least 16 samples to build an envelope")
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt, rtol=1e-6, atol=1e-12):
        raise UndersampledSignal("envelope requires a uniform time grid")
    omega = carrier_omega if carrier_omega is not None else _estimate_carrier(times, values)
    if omega > 0:
        dt_required = 2.0 * math.pi / (8.0 * omega)
        if dt > dt_required * (1.0 + 1e-9):
            raise UndersampledSignal(
                f"carrier at omega={omega:.4g} needs dt_out <= {dt_required:.4g}, got {dt:.4g}"
            )
    pad = min(len(values) - 1, max(64, len(values) // 4))
    padded = np.concatenate([values[pad:0:-1], values, values[-2 : -pad - 2 : -1]])
    env = np.abs(hilbert(padded))[pad : pad + len(values)]
    return TimeSeries(times, env)


def _window_mask(times, center, half_width):
    return (times >= center - half_width) & (times <= center + half_width)


def detect_echoes(
    series: TimeSeries,
    expected,
    window_half_width,
    carrier_omega: float | None = None,
    noise_multiplier: float = 5.0,
    envelope_series: TimeSeries | None = None,
) -> list[EchoEvent]:
    """Measure each expected event inside its window.

    amplitude  = max envelope in window - baseline
    baseline   = median envelope over the two flanking buffers (each one
                 window-width wide)
    noise floor = median absolute deviation of the envelope in the buffers

    An event is flagged detected only when amplitude exceeds
    noise_multiplier * noise floor.  Windows must not overlap.
    """
    expected = list(expected)
    widths = (
        [float(window_half_width)] * len(expected)
        if np.isscalar(window_half_width)
        else [float(w) for w in window_half_width]
    )
    order = np.argsort([e.time for e in expected])
    for a, b in zip(order[:-1], order[1:]):
        if expected[a].time + widths[a] > expected[b].time - widths[b]:
            raise WindowConfigError(
                f"windows around t={expected[a].time:g} and t={expected[b].time:g} overlap"
            )

    env = envelope_series if envelope_series is not None else envelope(series, carrier_omega)
    times, ev = env.times, env.values

    events = []
    for exp, w in zip(expected, widths):
        win = _window_mask(times, exp.time, w)
        if not np.any(win):
            raise WindowConfigError(f"window around t={exp.time:g} contains no samples")
        left = _window_mask(times, exp.time - 1.5 * w, 0.5 * w)
        right = _window_mask(times, exp.time + 1.5 * w, 0.5 * w)
        buf = ev[left | right]
        baseline = float(np.median(buf)) if buf.size else 0.0
        floor = float(np.median(np.abs(buf - baseline))) if buf.size else 0.0
        i_max = int(np.argmax(ev[win]))
        t_det = float(times[win][i_max])
        amp = float(ev[win][i_max] - baseline)
        events.append(
            EchoEvent(
                kind=exp.kind,
                order=exp.order,
                t_predicted=exp.time,
                t_detected=t_det,
                amplitude=max(amp, 0.0),
                baseline=baseline,
                noise_floor=floor,
                detected=amp > noise_multiplier * floor,
                prediction=exp.prediction,
            )
        )
    return events


@dataclass(frozen=True)
class DeviationRecord:
    kind: str
    order: int
    measured: float
    predicted: float
    relative_deviation: float
    exact_zero_match: bool = False


@dataclass(frozen=True)
class ComparisonReport:
    records: list[DeviationRecord]
    max_relative: float
    mean_relative: float


def compare_to_prediction(events, models=None, zero_tol=1e-12) -> ComparisonReport:
    """Relative deviation of measured vs model amplitudes.

    `models` maps (kind, order) to a predicted amplitude; events carrying
    their own prediction need no entry.  A pair that is zero on both sides
    is reported as an exact match with zero deviation.
    """
    records = []
    for ev in events:
        pred = ev.prediction
        if models and (ev.kind, ev.order) in models:
            pred = models[(ev.kind, ev.order)]
        if pred is None:
            continue
        if abs(pred) <= zero_tol and abs(ev.amplitude) <= zero_tol:
            records.append(DeviationRecord(ev.kind, ev.order, ev.amplitude, pred, 0.0, True))
        elif abs(pred) <= zero_tol:
            records.append(DeviationRecord(ev.kind, ev.order, ev.amplitude, pred, math.inf))
        else:
            records.append(
                DeviationRecord(
                    ev.kind, ev.order, ev.amplitude, pred, abs(ev.amplitude - pred) / abs(pred)
                )
            )
    if records:
        devs = [r.relative_deviation for r in records]
        return ComparisonReport(records, max(devs), sum(devs) / len(devs))
    return ComparisonReport([], 0.0, 0.0)


def sweep_cat_echo_amplitudes(
    scenario,
    theta_values,
    n_plus_values,
    engine: str = "fock",
    noise_multiplier: float = 5.0,
    n_workers: int = 1,
) -> SweepGrid:
    """First classical- and quantum-echo amplitudes over a (theta, N+) grid.

    For every grid point the cat state N+ |a0> + N- e^{i theta} |-a0>
    (N- fixed by N+^2 + N-^2 = 1) is kicked at tau and the envelope
    amplitudes at t = 2 tau and t = pi/(2 chi) - 2 tau are recorded.
    Engines: "fock" (closed system) or "lindblad" (damped).
    """
    from . import lindblad as _lindblad
    from . import quantum as _quantum
    from .model import CatSpec, validate_config

    scenario = validate_config(scenario)
    if scenario.pulse is None:
        raise ValueError("sweep requires a kick pulse in the scenario")
    if engine not in ("fock", "lindblad"):
        raise ValueError(f"unknown engine {engine!r}")

    chi = scenario.oscillator.chi
    tau = scenario.pulse.tau
    alpha0 = complex(scenario.state.alpha0)
    carrier = 1.0 + chi * (2.0 * abs(alpha0) ** 2)
    t_cl = classical_echo_time(1, tau)
    t_qu = quantum_echo_time(1, chi, tau, cat=True)
    width = tau / 2.0
    if scenario.grid.t_end < t_qu + 2.0 * width:
        raise ValueError(
            f"grid.t_end must reach {t_qu + 2.0 * width:g} to cover the quantum-echo window"
        )

    theta_values = np.asarray(theta_values, dtype=float)
    n_plus_values = np.asarray(n_plus_values, dtype=float)
    shape = (len(n_plus_values), len(theta_values))
    amp_cl = np.zeros(shape)
    amp_qu = np.zeros(shape)
    floor_cl = np.zeros(shape)
    floor_qu = np.zeros(shape)

    ops = _quantum.build_operators(chi, scenario.fock)

    def run_cell(i, j):
        n_plus = n_plus_values[i]
        n_minus = math.sqrt(max(0.0, 1.0 - n_plus**2))
        cat = CatSpec(alpha0=alpha0, n_plus=n_plus, n_minus=n_minus, theta=theta_values[j])
        cell = replace(scenario, state=cat, fock=scenario.fock, validated=False)
        try:
            if engine == "fock":
                psi0 = _quantum.cat_state_vector(cat, scenario.fock)
                trace = _quantum.kicked_expectation_trace(
                    psi0, ops, chi, scenario.pulse, scenario.grid, kick="impulsive"
                )
                series = TimeSeries(trace.times, trace.values)
            else:
                result = _lindblad.propagate_from_scenario(cell, kick_mode="unitary")
                series = result.mean_q
            expected = [
                ExpectedEcho(KIND_CLASSICAL, 1, t_cl),
                ExpectedEcho(KIND_QUANTUM, 1, t_qu),
            ]
            ev_cl, ev_qu = detect_echoes(
                series, expected, width, carrier_omega=carrier, noise_multiplier=noise_multiplier
            )
        except Exception as exc:
            raise RuntimeError(
                f"sweep cell failed at n_plus={n_plus:g}, theta={theta_values[j]:g}: {exc}"
            ) from exc
        amp_cl[i, j] = ev_cl.amplitude
        amp_qu[i, j] = ev_qu.amplitude
        floor_cl[i, j] = ev_cl.noise_floor
        floor_qu[i, j] = ev_qu.noise_floor

    cells = [(i, j) for i in range(shape[0]) for j in range(shape[1])]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(lambda ij: run_cell(*ij), cells))
    else:
        for ij in cells:
            run_cell(*ij)

    return SweepGrid(theta_values, n_plus_values, amp_cl, amp_qu, floor_cl, floor_qu)
