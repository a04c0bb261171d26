"""Classical dynamics of the kicked Kerr oscillator.

A free oscillator with energy radius r = sqrt(q^2 + p^2) rotates clockwise in
phase space at the amplitude-dependent rate Omega = 1 + chi*r^2, so free flow
is solved exactly by a rotation matrix and numerical integration is only ever
needed inside the narrow kick window.  The ensemble engine propagates a
Gaussian cloud of initial conditions (the classical image of a coherent
state), which shears into a spiral filament and, after a weak parametric kick
at t = tau, partially re-synchronizes to produce echoes in <q(t)> at
t = 2*n*tau.

Closed forms implemented alongside the Monte Carlo engine:

* the exact co-rotating phase-space density of the sheared Gaussian,
* its ring/filament (Gaussian-sum) approximation,
* the early-time dephasing law
      <q(t)> = q0 exp(-2 q0^2 sigma^2 chi^2 t^2) cos[(1 + chi q0^2) t],
* the post-kick radial-integral echo series and its first-echo amplitude
      J_1(2 chi tau g0 q0^2).

Every closed form has a brute-force counterpart here (quadrature or Monte
Carlo) so the two routes can be cross-checked in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ive, jv

from .analysis import TimeSeries
from .model import (
    SIGMA_COHERENT,
    CoherentSpec,
    EnsembleSpec,
    KickPulse,
    TimeGrid,
    pulse_value,
)


class IntegrationFailure(RuntimeError):
    """Step-size underflow; carries the last time reached successfully."""

    def __init__(self, message, last_good_time):
        super().__init__(message)
        self.last_good_time = last_good_time


class QuadratureError(RuntimeError):
    """Quadrature refinement did not converge; carries the achieved tolerance."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class PhaseSpacePoint:
    """Dimensionless (q, p); fields may be scalars or equal-shape arrays."""

    q: float | np.ndarray
    p: float | np.ndarray

    @property
    def r_squared(self):
        return self.q * self.q + self.p * self.p

    @property
    def r(self):
        return np.sqrt(self.r_squared)

    @property
    def phi(self):
        """Polar angle increasing from +q toward -p (the direction of motion)."""
        return np.arctan2(-self.p, self.q)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class PhaseSpaceHistogram:
    time: float
    q_edges: np.ndarray
    p_edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class EnsembleResult:
    mean_q: TimeSeries
    snapshots: list[PhaseSpaceHistogram] = field(default_factory=list)


# ---------------------------------------------------------------------------
# exact free flow and the impulsive kick map
# ---------------------------------------------------------------------------

def free_rotation(q, p, chi, t):
    """Rotate (q, p) clockwise by Omega*t with Omega = 1 + chi*(q^2+p^2)."""
    omega = 1.0 + chi * (q * q + p * p)
    angle = omega * t
    c, s = np.cos(angle), np.sin(angle)
    return q * c + p * s, p * c - q * s


def exact_free_trajectory(point: PhaseSpacePoint, chi, t) -> PhaseSpacePoint:
    """Exact free solution: r is conserved; the angle advances by Omega*t."""
    q, p = free_rotation(point.q, point.p, chi, t)
    return PhaseSpacePoint(q, p)


def apply_impulsive_kick_classical(point: PhaseSpacePoint, g0) -> PhaseSpacePoint:
    """Ideal delta kick: positions are untouched, momenta gain 2*g0*q."""
    return PhaseSpacePoint(point.q, point.p + 2.0 * g0 * point.q)


def hamilton_rhs(point: PhaseSpacePoint, t, chi, pulse: KickPulse | None = None):
    """Equations of motion including the time-dependent parametric drive.

    dq/dt = chi (q^2 p + p^3) + p
    dp/dt = -chi (q^3 + q p^2) - q + 2 g(t) q
    """
    q, p = point.q, point.p
    r2 = q * q + p * p
    dq = p * (1.0 + chi * r2)
    dp = -q * (1.0 + chi * r2)
    if pulse is not None:
        dp = dp + 2.0 * pulse_value(pulse, t) * q
    return dq, dp


# ---------------------------------------------------------------------------
# embedded Dormand-Prince 5(4) stepper, vectorized over ensembles
# ---------------------------------------------------------------------------

_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
# difference between the 5th- and embedded 4th-order weights
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _integrate_window(q, p, chi, pulse, t0, t1, max_step, rtol=1e-10, atol=1e-12):
    """Adaptive Dormand-Prince integration of the kicked flow on [t0, t1].

    Steps are capped at max_step so the narrow pulse is always resolved, and
    split at pulse discontinuities (square pulses).  Operates in place on
    float arrays and returns (q, p) at t1.
    """
    breaks = [b for b in (pulse.breakpoints if pulse is not None else ()) if t0 < b < t1]
    bounds = sorted(set([t1] + breaks))

    def rhs(t, q, p):
        r2 = q * q + p * p
        omega = 1.0 + chi * r2
        dp = -q * omega
        if pulse is not None:
            dp = dp + 2.0 * pulse_value(pulse, t) * q
        return p * omega, dp

    t = t0
    h = max_step
    kq = [None] * 7
    kp = [None] * 7
    fq, fp = rhs(t, q, p)
    for edge in bounds:
        while t < edge - 1e-15 * max(1.0, abs(edge)):
            h = min(h, max_step, edge - t)
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationFailure("step size underflow", last_good_time=t)
            kq[0], kp[0] = fq, fp
            for i, row in enumerate(_DP_A, start=1):
                yq = q.copy()
                yp = p.copy()
                for aij, kqj, kpj in zip(row, kq, kp):
                    if aij != 0.0:
                        yq += h * aij * kqj
                        yp += h * aij * kpj
                kq[i], kp[i] = rhs(t + _DP_C[i] * h, yq, yp)
            # 5th-order solution is stage 6's argument (FSAL pair)
            qn, pn = yq, yp
            err_q = np.zeros_like(q)
            err_p = np.zeros_like(p)
            for ei, kqj, kpj in zip(_DP_E, kq, kp):
                if ei != 0.0:
                    err_q += ei * kqj
                    err_p += ei * kpj
            scale_q = atol + rtol * np.maximum(np.abs(q), np.abs(qn))
            scale_p = atol + rtol * np.maximum(np.abs(p), np.abs(pn))
            err = math.sqrt(
                0.5 * (np.mean((h * err_q / scale_q) ** 2) + np.mean((h * err_p / scale_p) ** 2))
            )
            if err <= 1.0:
                t = t + h
                q, p = qn, pn
                fq, fp = kq[6], kp[6]
            factor = 0.9 * (err + 1e-300) ** -0.2
            h *= min(5.0, max(0.2, factor))
        t = edge
        fq, fp = rhs(t, q, p)  # refresh across a possible discontinuity
    return q, p


def integrate_trajectory(
    start: PhaseSpacePoint,
    chi,
    grid: TimeGrid,
    pulse: KickPulse | None = None,
    max_step=1e-5,
) -> Trajectory:
    """Propagate one (or an array of) initial condition(s) over the grid.

    Free stretches use the exact rotation solution; only the interval
    [tau - 8 sigma_g, tau + 8 sigma_g] around the kick is integrated
    numerically, with micro-steps capped at max_step.
    """
    times = grid.times
    q0 = np.atleast_1d(np.asarray(start.q, dtype=float))
    p0 = np.atleast_1d(np.asarray(start.p, dtype=float))
    scalar = np.isscalar(start.q) or np.asarray(start.q).ndim == 0

    qs = np.empty((len(times),) + q0.shape)
    ps = np.empty_like(qs)

    active = pulse is not None and pulse.g0 != 0.0
    if active:
        w0, w1 = pulse.window
        active = w1 > grid.t_start  # kick after the window is inert
    if not active:
        for i, t in enumerate(times):
            qs[i], ps[i] = free_rotation(q0, p0, chi, t - grid.t_start)
        traj = Trajectory(times, qs, ps)
        return _squeeze_trajectory(traj) if scalar else traj

    w0 = max(w0, grid.t_start)
    before = times <= w0
    inside = (times > w0) & (times < w1)
    after = times >= w1

    for i in np.nonzero(before)[0]:
        qs[i], ps[i] = free_rotation(q0, p0, chi, times[i] - grid.t_start)

    qw, pw = free_rotation(q0, p0, chi, w0 - grid.t_start)
    t_prev = w0
    for i in np.nonzero(inside)[0]:
        qw, pw = _integrate_window(qw, pw, chi, pulse, t_prev, times[i], max_step)
        t_prev = times[i]
        qs[i], ps[i] = qw, pw
    qw, pw = _integrate_window(qw, pw, chi, pulse, t_prev, w1, max_step)

    for i in np.nonzero(after)[0]:
        qs[i], ps[i] = free_rotation(qw, pw, chi, times[i] - w1)

    traj = Trajectory(times, qs, ps)
    return _squeeze_trajectory(traj) if scalar else traj


def _squeeze_trajectory(traj: Trajectory) -> Trajectory:
    return Trajectory(traj.times, traj.q[:, 0], traj.p[:, 0])


# ---------------------------------------------------------------------------
# Monte Carlo ensemble
# ---------------------------------------------------------------------------

def sample_initial_ensemble(spec: CoherentSpec, ens: EnsembleSpec) -> PhaseSpacePoint:
    """Gaussian cloud at (q0, p0) with sigma = 1/sqrt(2) per axis.

    Trajectory i draws from its own counter-based stream keyed by
    (master seed, i), so any work split across processes reproduces the
    identical ensemble.
    """
    n = ens.n_samples
    q = np.empty(n)
    p = np.empty(n)
    seed = np.uint64(ens.seed)
    for i in range(n):
        g = Generator(Philox(key=np.array([seed, np.uint64(i)], dtype=np.uint64)))
        z = g.standard_normal(2)
        q[i] = z[0]
        p[i] = z[1]
    q = spec.q0 + SIGMA_COHERENT * q
    p = spec.p0 + SIGMA_COHERENT * p
    return PhaseSpacePoint(q, p)


def _compensated_mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Exactly-rounded mean (fsum in fixed index order) and its standard error."""
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _histogram(q, p, time, bins, extent) -> PhaseSpaceHistogram:
    edges = np.linspace(-extent, extent, bins + 1)
    counts, qe, pe = np.histogram2d(q, p, bins=(edges, edges))
    return PhaseSpaceHistogram(time=time, q_edges=qe, p_edges=pe, counts=counts)


def ensemble_mean_q(
    points: PhaseSpacePoint,
    chi,
    grid: TimeGrid,
    pulse: KickPulse | None = None,
    snapshot_times=(),
    hist_bins: int = 240,
    hist_range: float | None = None,
    max_step=1e-5,
) -> EnsembleResult:
    """<q(t)> with standard errors over the output grid, plus snapshots.

    The reduction is order-deterministic (fixed trajectory order, exactly
    rounded summation), so parallel and serial runs agree bit for bit.
    """
    q0 = np.asarray(points.q, dtype=float)
    p0 = np.asarray(points.p, dtype=float)
    times = grid.times
    snapshot_times = sorted(snapshot_times)
    if hist_range is None:
        hist_range = float(np.ceil(np.max(np.hypot(q0, p0)) + 2.0))

    active = pulse is not None and pulse.g0 != 0.0
    if active:
        w0, w1 = pulse.window
        active = w1 > grid.t_start

    means = np.empty(len(times))
    errs = np.empty(len(times))
    snapshots: list[PhaseSpaceHistogram] = []

    def emit_snapshot(t_snap, q, p):
        snapshots.append(_histogram(q, p, t_snap, hist_bins, hist_range))

    if not active:
        for i, t in enumerate(times):
            qt, _ = free_rotation(q0, p0, chi, t - grid.t_start)
            means[i], errs[i] = _compensated_mean_and_se(qt)
        for t_snap in snapshot_times:
            qt, pt = free_rotation(q0, p0, chi, t_snap - grid.t_start)
            emit_snapshot(t_snap, qt, pt)
        return EnsembleResult(TimeSeries(times, means, errs), snapshots)

    w0 = max(w0, grid.t_start)
    # free flank before the window (also snapshots there)
    for i, t in enumerate(times):
        if t <= w0:
            qt, _ = free_rotation(q0, p0, chi, t - grid.t_start)
            means[i], errs[i] = _compensated_mean_and_se(qt)
    for t_snap in snapshot_times:
        if t_snap <= w0:
            qt, pt = free_rotation(q0, p0, chi, t_snap - grid.t_start)
            emit_snapshot(t_snap, qt, pt)

    # through the window, landing exactly on interior output/snapshot times
    interior_outputs = {t for t in times if w0 < t < w1}
    interior_snaps = {t for t in snapshot_times if w0 < t < w1}
    qw, pw = free_rotation(q0, p0, chi, w0 - grid.t_start)
    t_prev = w0
    for mark in sorted(interior_outputs | interior_snaps | {w1}):
        qw, pw = _integrate_window(qw, pw, chi, pulse, t_prev, mark, max_step)
        t_prev = mark
        if mark in interior_outputs:
            for i in np.nonzero(times == mark)[0]:
                means[i], errs[i] = _compensated_mean_and_se(qw)
        if mark in interior_snaps:
            emit_snapshot(mark, qw, pw)

    # free flank after the window
    for i, t in enumerate(times):
        if t >= w1:
            qt, _ = free_rotation(qw, pw, chi, t - w1)
            means[i], errs[i] = _compensated_mean_and_se(qt)
    for t_snap in snapshot_times:
        if t_snap >= w1:
            qt, pt = free_rotation(qw, pw, chi, t_snap - w1)
            emit_snapshot(t_snap, qt, pt)

    snapshots.sort(key=lambda h: h.time)
    return EnsembleResult(TimeSeries(times, means, errs), snapshots)


# ---------------------------------------------------------------------------
# closed-form phase-space density and its filament approximation
# ---------------------------------------------------------------------------

def phase_space_density_analytic(phi, r, t, q0, chi, sigma=SIGMA_COHERENT):
    """Sheared Gaussian density in polar coordinates, up to 1/(2 pi sigma^2).

    For an initial blob at (q0, 0) with q0 > 0 the rotated density is
        P(phi, r, t) propto exp[-(q0^2 + r^2)/(2 sigma^2)
                               + (q0 r / sigma^2) cos(phi - Omega(r) t)],
    exact for all t; the exponents are combined before exponentiation so the
    value stays finite even at q0 r / sigma^2 of order hundreds.
    """
    phi = np.asarray(phi, dtype=float)
    r = np.asarray(r, dtype=float)
    omega = 1.0 + chi * r * r
    s2 = sigma * sigma
    arg = -(q0 * q0 + r * r) / (2.0 * s2) + (q0 * r / s2) * np.cos(phi - omega * t)
    out = np.exp(arg)
    return out if out.ndim else float(out)


def filament_rings(phi, t, q0, chi, sigma=SIGMA_COHERENT, r_max=None):
    """Radii r_k and widths sigma_k of the spiral turns crossing angle phi.

    Turn k sits where the accumulated rotation matches the angle,
        r_k(phi) = sqrt(((2 pi k + phi)/t - 1)/chi),
    with width
        sigma_k(phi) = sigma / (2 sqrt(q0) chi^{1/4} t^{1/4} (2 pi k + phi - t)^{3/4}).

    Only turns with (2 pi k + phi)/t > 1 exist; the list is truncated at
    r_max (default q0 + 6 sigma).
    """
    if t <= 0:
        raise ValueError("filament approximation requires t > 0")
    if r_max is None:
        r_max = q0 + 6.0 * sigma
    k_min = max(0, int(math.ceil((t - phi) / (2.0 * math.pi))))
    # largest k with r_k <= r_max
    k_max = int(math.floor((t * (1.0 + chi * r_max * r_max) - phi) / (2.0 * math.pi)))
    ks = np.arange(k_min, k_max + 1)
    x = (2.0 * math.pi * ks + phi) / t - 1.0
    keep = x > 0
    ks, x = ks[keep], x[keep]
    r_k = np.sqrt(x / chi)
    sigma_k = sigma / (
        2.0 * math.sqrt(q0) * chi**0.25 * t**0.25 * (2.0 * math.pi * ks + phi - t) ** 0.75
    )
    return ks, r_k, sigma_k


def filament_approximation(phi, r, t, q0, chi, sigma=SIGMA_COHERENT):
    """Ring-sum approximation of the sheared density, same normalization as
    `phase_space_density_analytic`:

        P ~ exp[-(r - q0)^2/(2 sigma^2)] * sum_k exp[-(r - r_k)^2/(2 sigma_k^2)]
    """
    _, r_k, sigma_k = filament_rings(phi, t, q0, chi, sigma, r_max=q0 + 8.0 * sigma)
    r = np.asarray(r, dtype=float)
    envelope = np.exp(-((r - q0) ** 2) / (2.0 * sigma * sigma))
    rings = np.exp(
        -((r[..., None] - r_k) ** 2) / (2.0 * sigma_k**2)
    ).sum(axis=-1)
    out = envelope * rings
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# closed-form <q(t)>: free decay, exact quadrature, post-kick echo series
# ---------------------------------------------------------------------------

def analytic_mean_q_free(t, q0, chi, sigma=SIGMA_COHERENT):
    """Early-time dephasing law of the ensemble-averaged position,

        <q(t)> = q0 exp(-2 q0^2 sigma^2 chi^2 t^2) cos[(1 + chi q0^2) t].

    Valid while 4 sigma^4 chi^2 t^2 << 1; see `free_decay_in_validity`.
    """
    t = np.asarray(t, dtype=float)
    out = q0 * np.exp(-2.0 * q0**2 * sigma**2 * chi**2 * t**2) * np.cos((1.0 + chi * q0**2) * t)
    return out if out.ndim else float(out)


def free_decay_in_validity(t, chi, sigma=SIGMA_COHERENT, bound=0.1):
    """True where the small-parameter assumption 4 sigma^4 chi^2 t^2 < bound holds."""
    t = np.asarray(t, dtype=float)
    out = 4.0 * sigma**4 * chi**2 * t * t < bound
    return out if out.ndim else bool(out)


def _gauss_legendre_refine(f, lo, hi, rtol, atol=1e-13, order=32, max_level=9):
    """Composite Gauss-Legendre quadrature, doubling panels until converged."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    prev = None
    for level in range(max_level):
        n_panels = 2**level
        edges = np.linspace(lo, hi, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        x = (mid[:, None] + half * nodes[None, :]).ravel()
        w = np.broadcast_to(half * weights, (n_panels, order)).ravel()
        val = float(np.dot(w, f(x)))
        if prev is not None and abs(val - prev) <= rtol * abs(val) + atol:
            return val
        prev = val
    raise QuadratureError(
        f"quadrature did not converge to rtol={rtol:g}", achieved=abs(val - prev)
    )


def mean_q_free_quadrature(t, q0, chi, sigma=SIGMA_COHERENT, rtol=1e-10):
    """Exact free <q(t)> by radial quadrature (brute-force oracle).

    Reducing the angular integral of the rotated Gaussian leaves
        <q(t)> = (1/sigma^2) Int_0^inf I_1(q0 r/sigma^2)
                 exp[-(q0^2+r^2)/(2 sigma^2)] cos(Omega t) r^2 dr,
    evaluated with the exponentially scaled Bessel function so the
    large-argument products stay finite.
    """
    s2 = sigma * sigma
    lo, hi = max(0.0, q0 - 8.0 * sigma), q0 + 8.0 * sigma

    def one(ti):
        def f(r):
            gauss = np.exp(-((r - q0) ** 2) / (2.0 * s2))
            return ive(1, q0 * r / s2) * gauss * np.cos((1.0 + chi * r * r) * ti) * r * r / s2

        return _gauss_legendre_refine(f, lo, hi, rtol)

    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return one(float(t))
    return np.array([one(ti) for ti in t])


def classical_echo_series(
    t, q0, chi, g0, tau, sigma=SIGMA_COHERENT, n_terms=8, rtol=1e-8
):
    """Post-kick <q(t)> as a truncated series of radial integrals.

    The angular integration of the kicked ensemble leaves one radial
    integral per echo order n,

        <q_+(t)> = Re (1/sigma^2) sum_{n>=1} Int_0^inf I_{2n-1}(q0 r/sigma^2)
                   J_n(2 chi g0 r^2 (t - tau)) exp[-(q0^2+r^2)/(2 sigma^2)]
                   exp[i Omega (t - 2 n tau)] r^2 dr,

    whose stationary phase concentrates term n around t = 2 n tau.  The
    kick-to-observation duration (t - tau) enters the Bessel argument, which
    at the first echo reduces the peak amplitude to J_1(2 chi tau g0 q0^2).
    """
    if np.any(np.asarray(t) <= tau):
        raise ValueError("echo series is defined for t > tau")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    s2 = sigma * sigma
    lo, hi = max(0.0, q0 - 8.0 * sigma), q0 + 8.0 * sigma

    def one(ti):
        total = 0.0
        for n in range(1, n_terms + 1):
            def f_re(r, n=n):
                gauss = np.exp(-((r - q0) ** 2) / (2.0 * s2))
                radial = ive(2 * n - 1, q0 * r / s2) * gauss * r * r / s2
                bess = jv(n, 2.0 * chi * g0 * r * r * (ti - tau))
                return radial * bess * np.cos((1.0 + chi * r * r) * (ti - 2.0 * n * tau))

            total += _gauss_legendre_refine(f_re, lo, hi, rtol)
        return total

    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return one(float(t))
    return np.array([one(ti) for ti in t])


def first_echo_amplitude(q0, chi, g0, tau):
    """Relative amplitude of the first echo, J_1(2 chi tau g0 q0^2); the echo
    replays the free signal scaled by this factor around t = 2 tau."""
    return float(jv(1, 2.0 * chi * tau * g0 * q0 * q0))
