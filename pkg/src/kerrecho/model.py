"""Shared physical parameters, pulse shapes and scenario validation.

Everything downstream (classical Monte Carlo, Fock-space propagation,
open-system dynamics) works in the dimensionless units of the kicked Kerr
oscillator: energies in units of the quantum hbar*omega of the underlying
harmonic oscillator, times in units of 1/omega.  In these units the closed
system is governed by

    H(t) = n + 1/2 + chi * n*(n-1) - g(t)/2 * (a^dag + a)^2

with chi the dimensionless anharmonicity and g(t) an impulsive parametric
drive of total area g0 applied around t = tau.  An ideal delta kick is
represented numerically by a narrow normalized Gaussian of width sigma_g
(a square pulse of equal area is kept around purely for pulse-shape
robustness checks).

All objects defined here are immutable value types; after `validate_config`
they can be shared freely between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import poisson

# Phase-space standard deviation of a (non-squeezed) coherent state in
# dimensionless (q, p) coordinates.
SIGMA_COHERENT = 1.0 / math.sqrt(2.0)

# Numerical defaults used throughout: narrow-pulse width, micro time step
# inside the pulse window, Monte Carlo ensemble size.
DEFAULT_SIGMA_G = 1e-3
DEFAULT_MICRO_STEP = 1e-5
DEFAULT_N_SAMPLES = 200_000

# The pulse is treated as active within +/- PULSE_WINDOW_NSIGMA * sigma_g
# of tau; the truncated Gaussian tail weight is ~1e-15 of the area.
PULSE_WINDOW_NSIGMA = 8.0

# Beyond-cutoff probability allowed when truncating an initial state to a
# finite Fock basis.
FOCK_TAIL_TOLERANCE = 1e-12


class ScenarioValidationError(ValueError):
    """Aggregated invariant violations, one `section.field: message` per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class OscillatorParams:
    """Dimensionless oscillator constants.

    chi     -- anharmonicity (>= 0)
    gamma   -- damping constant (>= 0), only used by the open-system engine
    epsilon -- inverse bath temperature hbar*omega/(kB*T); None means T = 0
    """

    chi: float
    gamma: float = 0.0
    epsilon: float | None = None


@dataclass(frozen=True)
class KickPulse:
    """Impulsive parametric drive g(t) with total area g0 centered at tau.

    shape is "gaussian" (default) or "square"; the square variant exists
    only for pulse-area invariance checks and spans [tau - sigma_g/2,
    tau + sigma_g/2] at constant height g0/sigma_g.
    """

    g0: float
    tau: float
    sigma_g: float = DEFAULT_SIGMA_G
    shape: str = "gaussian"

    @property
    def window(self) -> tuple[float, float]:
        """Interval outside of which the drive is numerically zero."""
        half = PULSE_WINDOW_NSIGMA * self.sigma_g
        return (self.tau - half, self.tau + half)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Discontinuities of g(t); integrators must not step across these."""
        if self.shape == "square":
            return (self.tau - self.sigma_g / 2.0, self.tau + self.sigma_g / 2.0)
        return ()


@dataclass(frozen=True)
class CoherentSpec:
    """Initial coherent state |alpha0>; classically a Gaussian blob at
    (q0, p0) = (sqrt(2) Re alpha0, sqrt(2) Im alpha0) with sigma = 1/sqrt(2)."""

    alpha0: complex

    @property
    def q0(self) -> float:
        return math.sqrt(2.0) * complex(self.alpha0).real

    @property
    def p0(self) -> float:
        return math.sqrt(2.0) * complex(self.alpha0).imag


@dataclass(frozen=True)
class CatSpec:
    """Two-component cat state  N+ |alpha0> + N- e^{i theta} |-alpha0>.

    The squared normalization is
        D^2 = N+^2 + N-^2 + 2 N+ N- exp(-2|alpha0|^2) cos(theta)
    and must be positive for the state to exist.
    """

    alpha0: complex
    n_plus: float
    n_minus: float
    theta: float = 0.0

    @property
    def d_squared(self) -> float:
        a2 = abs(complex(self.alpha0)) ** 2
        return (
            self.n_plus**2
            + self.n_minus**2
            + 2.0 * self.n_plus * self.n_minus * math.exp(-2.0 * a2) * math.cos(self.theta)
        )


@dataclass(frozen=True)
class TimeGrid:
    """Output sampling grid; engines may take much smaller internal steps."""

    t_start: float
    t_end: float
    dt_out: float

    @property
    def times(self) -> np.ndarray:
        n = int(math.floor((self.t_end - self.t_start) / self.dt_out + 1e-9)) + 1
        return self.t_start + self.dt_out * np.arange(n)


@dataclass(frozen=True)
class EnsembleSpec:
    """Monte Carlo ensemble size and master seed for the counter-based RNG."""

    n_samples: int = DEFAULT_N_SAMPLES
    seed: int = 0


@dataclass(frozen=True)
class FockSpaceSpec:
    """Fock-basis truncation; n_max is the highest retained number state."""

    n_max: int


@dataclass(frozen=True)
class Scenario:
    """A full run description: oscillator + initial state + optional kick,
    output grid, and whichever of (ensemble, fock) the engines need.

    `extras` carries presentation-level knobs (histogram sizing, snapshot
    times) that the engines ignore.
    """

    oscillator: OscillatorParams
    state: CoherentSpec | CatSpec
    grid: TimeGrid
    pulse: KickPulse | None = None
    ensemble: EnsembleSpec | None = None
    fock: FockSpaceSpec | None = None
    extras: dict = field(default_factory=dict, compare=False)
    validated: bool = field(default=False, compare=False)


def nondimensionalize(kerr_constant, omega, pulse_area, hbar=1.0):
    """Map dimensionful constants to the dimensionless pair (chi, g0).

    chi = K / (hbar*omega) for a Kerr term  hbar*K (a^dag)^2 a^2,  and
    g0 = (area of Gamma(t)) / (hbar*omega^2) for a parametric drive that
    enters the dimensionful Hamiltonian as -Gamma(t)/(2 omega) * hbar (a^dag+a)^2.
    """
    if omega <= 0 or hbar <= 0:
        raise ValueError("omega and hbar must be positive")
    chi = kerr_constant / (hbar * omega)
    g0 = pulse_area / (hbar * omega**2)
    return chi, g0


def pulse_value(pulse: KickPulse, t):
    """Instantaneous drive strength g(t); integrates to g0 over the real line."""
    t = np.asarray(t, dtype=float)
    if pulse.shape == "square":
        half = pulse.sigma_g / 2.0
        inside = np.abs(t - pulse.tau) <= half
        out = np.where(inside, pulse.g0 / pulse.sigma_g, 0.0)
    else:
        arg = (t - pulse.tau) / pulse.sigma_g
        out = pulse.g0 / (math.sqrt(2.0 * math.pi) * pulse.sigma_g) * np.exp(-0.5 * arg * arg)
    return out if out.ndim else float(out)


def default_fock_cutoff(state: CoherentSpec | CatSpec) -> int:
    """Smallest cutoff obeying the beyond-cutoff weight tolerance.

    Starts from the Poisson tail heuristic ceil(|a0|^2 + 8|a0| + 10) and
    grows until the truncated weight of the initial state drops below
    FOCK_TAIL_TOLERANCE.
    """
    a = abs(complex(state.alpha0))
    n = int(math.ceil(a * a + 8.0 * a + 10.0))
    while truncated_weight(state, n) >= FOCK_TAIL_TOLERANCE:
        n += 8
    return n


def truncated_weight(state: CoherentSpec | CatSpec, n_max: int) -> float:
    """Upper bound on the initial-state probability left above n_max."""
    a2 = abs(complex(state.alpha0)) ** 2
    tail = float(poisson.sf(n_max, a2)) if a2 > 0 else 0.0
    if isinstance(state, CatSpec):
        d2 = state.d_squared
        if d2 <= 0:
            return math.inf
        tail *= (state.n_plus + state.n_minus) ** 2 / d2
    return tail


def _validate_oscillator(osc: OscillatorParams, errors):
    if not math.isfinite(osc.chi) or osc.chi < 0:
        errors.append("oscillator.chi: must be finite and >= 0")
    if not math.isfinite(osc.gamma) or osc.gamma < 0:
        errors.append("oscillator.gamma: must be finite and >= 0")
    if osc.epsilon is not None and not (math.isfinite(osc.epsilon) and osc.epsilon > 0):
        errors.append("oscillator.epsilon: must be finite and > 0 when present")


def _validate_pulse(pulse: KickPulse, errors):
    if not math.isfinite(pulse.g0):
        errors.append("pulse.g0: must be finite")
    if not (math.isfinite(pulse.tau) and pulse.tau > 0):
        errors.append("pulse.tau: must be finite and > 0")
    if not (math.isfinite(pulse.sigma_g) and pulse.sigma_g > 0):
        errors.append("pulse.sigma_g: must be finite and > 0")
    elif pulse.sigma_g >= pulse.tau / 10.0:
        errors.append("pulse.sigma_g: pulse not impulsive (requires sigma_g < tau/10)")
    if pulse.shape not in ("gaussian", "square"):
        errors.append(f"pulse.shape: unknown shape {pulse.shape!r}")


def _validate_state(state, errors):
    if isinstance(state, CoherentSpec):
        if not np.isfinite(complex(state.alpha0)):
            errors.append("state.alpha0: must be finite")
    elif isinstance(state, CatSpec):
        if not np.isfinite(complex(state.alpha0)):
            errors.append("state.alpha0: must be finite")
        if not (math.isfinite(state.n_plus) and state.n_plus >= 0):
            errors.append("state.n_plus: must be finite and >= 0")
        if not (math.isfinite(state.n_minus) and state.n_minus >= 0):
            errors.append("state.n_minus: must be finite and >= 0")
        if not math.isfinite(state.theta):
            errors.append("state.theta: must be finite")
        elif (
            math.isfinite(state.n_plus)
            and math.isfinite(state.n_minus)
            and state.n_plus >= 0
            and state.n_minus >= 0
            and state.d_squared <= 0
        ):
            errors.append("state: cat state not normalizable (D^2 <= 0)")
    else:
        errors.append(f"state: unsupported state type {type(state).__name__}")


def _validate_grid(grid: TimeGrid, errors):
    if not (math.isfinite(grid.t_start) and math.isfinite(grid.t_end) and grid.t_start < grid.t_end):
        errors.append("grid.t_start/t_end: require t_start < t_end, both finite")
    if not (math.isfinite(grid.dt_out) and grid.dt_out > 0):
        errors.append("grid.dt_out: must be finite and > 0")


def validate_config(scenario: Scenario) -> Scenario:
    """Check every invariant and fill defaults; raises ScenarioValidationError.

    Idempotent: validating an already-validated scenario returns the same
    object unchanged.
    """
    if scenario.validated:
        return scenario

    errors: list[str] = []
    _validate_oscillator(scenario.oscillator, errors)
    _validate_state(scenario.state, errors)
    _validate_grid(scenario.grid, errors)
    if scenario.pulse is not None:
        _validate_pulse(scenario.pulse, errors)

    ensemble = scenario.ensemble
    if ensemble is not None:
        if ensemble.n_samples < 1:
            errors.append("ensemble.n_samples: must be >= 1")
        if not (0 <= int(ensemble.seed) < 2**64):
            errors.append("ensemble.seed: must fit in 64 unsigned bits")

    fock = scenario.fock
    if not errors:
        if fock is None:
            fock = FockSpaceSpec(default_fock_cutoff(scenario.state))
        elif truncated_weight(scenario.state, fock.n_max) >= FOCK_TAIL_TOLERANCE:
            errors.append(
                f"fock.n_max: truncated initial-state weight exceeds {FOCK_TAIL_TOLERANCE:g} "
                f"(need >= {default_fock_cutoff(scenario.state)})"
            )

    if errors:
        raise ScenarioValidationError(errors)
    return replace(scenario, fock=fock, validated=True)
