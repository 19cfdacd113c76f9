"""Reference phase-domain solvers for cross-checking the event kernel.

Two abstractions of the same coupled-oscillator dynamics:

* a continuous-time ODE, dphi_i/dt = (omega_i - omega*) +
  omega_i * sum_j c_ij(phi_i - phi_j), integrated with fixed-step RK4;
* a discrete-time per-cycle recursion, where each cycle adds the
  frequency-drift term and the summed coupling shifts directly.

Coupling functions map a phase difference (self minus other, radians) to
a per-cycle phase shift in radians; they are odd and 2*pi-periodic with
zeros at 0 and pi, and a positive coupling weight pulls the difference
toward zero.  They can be built either from the same timing tables the
event kernel uses, or from a smooth tanh approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .timing import lookup_coupled, lookup_uncoupled


@dataclass
class PhaseState:
    phi: np.ndarray           # radians
    omega: np.ndarray         # rad/ps, per oscillator
    omega_star: float         # rad/ps, datum frequency
    t: float = 0.0            # ps

    @property
    def n(self):
        return len(self.phi)

    def phases_mod(self):
        return np.mod(self.phi, 2.0 * math.pi)


def uniform_phase_state(n, period, seed):
    """Identical oscillators at the nominal period, random initial phases."""
    rng = np.random.default_rng(seed)
    omega = 2.0 * math.pi / period
    return PhaseState(
        phi=rng.uniform(0.0, 2.0 * math.pi, n),
        omega=np.full(n, omega),
        omega_star=omega,
    )


def tanh_coupling(j, scale, width):
    """Smooth odd coupling function: -j * scale * tanh(sin(phi) / width).

    Zeros at 0 and pi; the leading minus makes a positive weight attract
    the phase difference to zero under the self-minus-other convention.
    """
    if width <= 0:
        raise ValidationError(f"width must be positive, got {width}")

    def c(phi):
        return -j * scale * math.tanh(math.sin(phi) / width)

    return c


def table_coupling(tf, levels, period, cell_kind="coupling"):
    """Per-cycle shift function read from the timing tables.

    ``levels`` lists the cell levels realizing one coefficient (an edge
    split across two cells passes both halves).  For a phase difference
    x = phi_self - phi_other the function sums the rise and the fall
    shift of every level: the in-window 3-D entry when the other edge
    lands within the interaction window, else the saturated end column
    picked by the other net's quiet logic value.
    """
    w = tf.window_w
    half = period / 2.0

    def one_edge_shift(level, offset, pol):
        # offset: other same-polarity edge's arrival minus ours, in (-T/2, T/2].
        pp_same = "rr" if pol else "ff"
        if abs(offset) <= w:
            d, _tt = lookup_coupled(tf, level, pp_same, tf.tt0, tf.tt0, offset,
                                    cell_kind=cell_kind)
        else:
            # Opposite-polarity edge sits half a period from the same-polarity one.
            opp = offset - half if offset > 0 else offset + half
            if abs(opp) <= w:
                pp = "rf" if pol else "fr"
                d, _tt = lookup_coupled(tf, level, pp, tf.tt0, tf.tt0, opp,
                                        cell_kind=cell_kind)
            else:
                # Other net stable: low before its rise, high before its fall.
                other_val = 0 if offset > 0 else 1
                if not pol:
                    other_val ^= 1
                da = w if other_val != pol else -w
                d, _tt = lookup_coupled(tf, level, pp_same, tf.tt0, tf.tt0, da,
                                        cell_kind=cell_kind)
        d0, _ = lookup_uncoupled(tf, cell_kind, "rise" if pol else "fall", tf.tt0)
        return d - d0

    def f(x):
        # x in radians, self minus other; other's edges trail by -x.
        offset = (-x) % (2.0 * math.pi)
        offset = offset / (2.0 * math.pi) * period
        if offset > half:
            offset -= period
        total = 0.0
        for level in levels:
            if level == 0:
                continue
            total += one_edge_shift(level, offset, 1)
            total += one_edge_shift(level, offset, 0)
        return total * 2.0 * math.pi / period

    return f


def split_levels(j):
    """Cell levels implementing coefficient ``j`` at the two array sites."""
    return ((j + 1) // 2, j // 2)


def couplings_from_tables(tf, m, period):
    """Edge-indexed coupling functions matching the array's split levels."""
    cf = {}
    for i, j, w in m.edges():
        cf[(i, j)] = table_coupling(tf, split_levels(w), period)
    return cf


def couplings_tanh(m, scale, width):
    cf = {}
    for i, j, w in m.edges():
        cf[(i, j)] = tanh_coupling(w, scale, width)
    return cf


def _rhs(state, cf):
    two_pi = 2.0 * math.pi
    rhs = state.omega - state.omega_star
    for (i, j), f in cf.items():
        v = f(state.phi[i] - state.phi[j]) / two_pi
        rhs[i] += state.omega[i] * v
        rhs[j] -= state.omega[j] * v   # odd coupling, mirrored argument
    return rhs


def genadler_step(state, cf, dt):
    """One explicit RK4 step of the phase ODE."""
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    phi0 = state.phi
    base = PhaseState(phi0, state.omega, state.omega_star, state.t)

    def at(phi):
        return PhaseState(phi, state.omega, state.omega_star, state.t)

    k1 = _rhs(base, cf)
    k2 = _rhs(at(phi0 + 0.5 * dt * k1), cf)
    k3 = _rhs(at(phi0 + 0.5 * dt * k2), cf)
    k4 = _rhs(at(phi0 + dt * k3), cf)
    phi = phi0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return PhaseState(phi, state.omega, state.omega_star, state.t + dt)


def dt_phase_step(state, f_tables, k=0):
    """One per-cycle update: frequency drift plus summed coupling shifts."""
    periods = 2.0 * math.pi / state.omega
    dphi = (state.omega - state.omega_star) * periods
    for (i, j), f in f_tables.items():
        dphi[i] += f(state.phi[i] - state.phi[j])
        dphi[j] += f(state.phi[j] - state.phi[i])
    t_step = float(np.mean(periods))
    return PhaseState(state.phi + dphi, state.omega, state.omega_star, state.t + t_step)


def spins_from_phases(state):
    """+1 when the offset to oscillator 0 is closer to 0 than to pi."""
    two_pi = 2.0 * math.pi
    spins = []
    for i in range(state.n):
        d = (state.phi[i] - state.phi[0]) % two_pi
        dist_zero = min(d, two_pi - d)
        dist_half = abs(d - math.pi)
        spins.append(1 if dist_zero < dist_half else -1)
    spins[0] = 1
    return spins


@dataclass
class PhaseSolveResult:
    """Shape-compatible with the event kernel's result for shared emitters."""

    spins: list
    reason: str
    periods: dict
    period_estimate: float
    state: PhaseState = None
    events_processed: int = 0
    wall_time_ms: float = 0.0


def solve_phases(m, tf, seed, max_cycles=3000, solver="dtphase", tol_rad=None,
                 sync_window=5, dt_frac=50):
    """Drive either reference solver on a problem until lock or budget.

    Lock means the per-cycle change of every phase difference to
    oscillator 0 stayed below ``tol_rad`` for ``sync_window`` consecutive
    cycles.
    """
    if solver not in ("genadler", "dtphase"):
        raise ValidationError(f"unknown phase solver {solver!r}")
    period = 2.0 * (4 * m.n + 1) * tf.d0   # matches the array's free period
    state = uniform_phase_state(m.n, period, seed)
    cf = couplings_from_tables(tf, m, period)
    if tol_rad is None:
        tol_rad = 1e-4
    two_pi = 2.0 * math.pi
    records = {ro: [(0, float(state.phi[ro]) / two_pi * period, None)]
               for ro in range(m.n)}
    quiet = 0
    reason = "timeout"
    for cycle in range(max_cycles):
        prev = state.phi.copy()
        if solver == "dtphase":
            state = dt_phase_step(state, cf, cycle)
        else:
            dt = period / dt_frac
            for _ in range(dt_frac):
                state = genadler_step(state, cf, dt)
        for ro in range(m.n):
            p = period * (1.0 + (state.phi[ro] - prev[ro]) / two_pi
                          - (state.omega[ro] - state.omega_star) / state.omega[ro])
            arrival = (cycle + 1) * period + float(state.phi[ro]) / two_pi * period
            records[ro].append((cycle + 1, arrival, float(p)))
        rel = (state.phi - state.phi[0]) - (prev - prev[0])
        if np.max(np.abs(rel)) < tol_rad:
            quiet += 1
            if quiet >= sync_window:
                reason = "synchronized"
                break
        else:
            quiet = 0
    return PhaseSolveResult(
        spins=spins_from_phases(state), reason=reason, periods=records,
        period_estimate=period, state=state)


def fit_tanh_to_tables(tf, level, period, n_samples=17):
    """Least-squares tanh fit of a table coupling; returns (scale, width, max residual)."""
    f = table_coupling(tf, [level], period)
    xs = np.linspace(-math.pi, math.pi, n_samples)
    ys = np.array([f(x) for x in xs])
    best = None
    for width in np.geomspace(0.01, 1.0, 25):
        basis = np.array([-math.tanh(math.sin(x) / width) for x in xs])
        denom = float(basis @ basis)
        if denom == 0:
            continue
        scale = float(basis @ ys) / denom / max(level, 1) if level else 0.0
        fit = tanh_coupling(level, scale, width)
        resid = max(abs(fit(x) - y) for x, y in zip(xs, ys))
        if best is None or resid < best[2]:
            best = (scale, width, resid)
    return best
