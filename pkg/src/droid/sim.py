"""Event-driven kernel for coupled ring-oscillator arrays.

Events are rise/fall transitions on nets, processed in arrival order from
a priority queue.  A transition on the forward arc of an active coupling
cell either pairs with the transition on the cell's other input (when the
two arrivals fall inside the interaction window), is processed with the
saturated constant shift (when the other input is quietly aiding or
opposing), or is parked until the paired transition materializes, using a
bounded backward search over predecessor nets to decide whether one can
still arrive in time.

There is deliberately no shortcut that permanently equates two oscillator
phases: near-locked oscillators keep exchanging events and may drift
apart again.
"""

from __future__ import annotations

import bisect
import heapq
import json
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (CausalityError, DeadlockError, KernelError,
                     ValidationError, WeakCouplingError)
from .timing import lookup_coupled, lookup_uncoupled

RISE = 1
FALL = 0

_POL_NAME = ("fall", "rise")
_PP = ("ff", "fr", "rf", "rr")  # indexed by self_pol * 2 + other_pol


class Event(NamedTuple):
    """One transition: net id, arrival and transition time (ps), polarity."""

    net: int
    arrival: float
    transition_time: float
    polarity: int           # RISE or FALL
    seq: int


@dataclass
class SimConfig:
    max_time: float                 # ps
    tolerance: float = 0.1          # ps, allowed period spread at lock
    sync_window: int = 5            # consecutive cycles the spread must hold
    seed: int = 0
    stagger: list | None = None     # per-RO enable delay (ps); seeded if None
    record_events: bool = False
    record_sites: bool = False


@dataclass
class SimResult:
    spins: list
    reason: str                     # synchronized | timeout
    periods: dict                   # ro -> [(cycle, arrival_ps, period_ps|None)]
    events_processed: int
    net2event: dict                 # final unconsumed events, net -> Event
    period_estimate: float
    wall_time_ms: float = 0.0
    stagger: list = field(default_factory=list)


class SimState:
    """Mutable kernel state: queue, per-net event map, pending triggers."""

    def __init__(self, nl, tf, cfg):
        self.nl = nl
        self.tf = tf
        self.cfg = cfg
        self.w = tf.window_w
        self.q = []                  # heap of (arrival, net, seq)
        self.net2event = {}          # net -> Event (at most one per net)
        self.pending_trigger = {}    # trigger net -> parked Event
        self.parked_by_net = {}      # parked event's net -> trigger net
        self.deadlines = []          # heap of (deadline, trigger_net, ev_net, ev_seq)
        self.forced = set()          # (net, seq) released by the watchdog
        self.clock = 0.0
        self.seq = 0
        self.events_created = 0
        self.events_consumed = 0
        self.net_state = [0] * nl.n_nets     # current logic value per net
        # Per-arc delay bounds of each net's driver, for the backward search.
        self.drv_bounds = []
        for net in range(nl.n_nets):
            arc = nl.driver[net]
            if arc is None:
                self.drv_bounds.append(None)
            else:
                level = arc.level if arc.interacting else 0
                self.drv_bounds.append(tf.bounds_for(arc.cell.kind, level, arc.stages))
        self.ref_ro = [None] * nl.n_nets
        for i, net in enumerate(nl.ref_net):
            self.ref_ro[net] = i
        self.last_rise = [None] * nl.n_ros
        self.rise_count = [0] * nl.n_ros
        self.period_history = [[] for _ in range(nl.n_ros)]   # period per cycle
        self.period_records = [[] for _ in range(nl.n_ros)]   # (cycle, arrival, period)
        self.cycle_completed = False
        self.event_log = [] if cfg.record_events else None
        self.site_log = [] if cfg.record_sites else None
        self._build_fast_tables()

    def _build_fast_tables(self):
        """Flatten per-net receiver-arc data so the hot loop avoids dict hops.

        For interacting arcs the two saturated end columns of the 3-D
        table (other input quietly aiding or opposing, nominal transition
        time) collapse to 1-D tables over the self transition time.
        """
        nl, tf = self.nl, self.tf
        self.rcv_1d = []    # net -> (axis, (fall_d, fall_tt), (rise_d, rise_tt))
        self.rcv_sat = []   # net -> {(pol, opposing): (axis, d, tt)} or None
        for net in range(nl.n_nets):
            arc = nl.receiver[net]
            if arc is None:
                self.rcv_1d.append(None)
                self.rcv_sat.append(None)
                continue
            tabs = []
            for pol in ("fall", "rise"):
                t = tf.tables_1d.get((arc.cell.kind, pol))
                tabs.append((t.delay, t.tt_out) if t else None)
            axis = tf.tables_1d[(arc.cell.kind, "rise")].tt_axis
            self.rcv_1d.append((axis, tabs[0], tabs[1]))
            if not arc.interacting:
                self.rcv_sat.append(None)
                continue
            sat = {}
            for pol in (FALL, RISE):
                pp = _PP[pol * 2 + pol]
                for opposing in (False, True):
                    da = tf.window_w if opposing else -tf.window_w
                    d_vals, tt_vals = [], []
                    for tt_self in axis:
                        d, tt = lookup_coupled(tf, arc.level, pp, tt_self, tf.tt0,
                                               da, cell_kind=arc.cell.kind)
                        d_vals.append(d)
                        tt_vals.append(tt)
                    sat[(pol, opposing)] = (axis, d_vals, tt_vals)
            self.rcv_sat.append(sat)

    def next_seq(self):
        self.seq += 1
        return self.seq

    def live_events(self):
        return len(self.net2event)


def _init_net_states(state):
    """Quiescent logic values, propagated forward from each enable input.

    The value ahead of a net's first transition is the complement of that
    transition's polarity, so seeding a rise at the enable input and
    walking the cycle keeps every net's first event consistent.
    """
    nl = state.nl
    for ro in range(nl.n_ros):
        order = nl.ro_nets[ro]
        length = len(order)
        start = order.index(nl.seed_net[ro])
        v = 0
        state.net_state[order[start]] = 0
        for step in range(1, length):
            prev = order[(start + step - 1) % length]
            arc = nl.receiver[prev]
            v ^= 1 if arc.inverting else 0
            state.net_state[order[(start + step) % length]] = v


def _schedule(state, ev):
    """Insert a freshly generated event (queue + per-net map + trigger check)."""
    existing = state.net2event.get(ev.net)
    if existing is not None:
        raise WeakCouplingError(
            f"second unconsumed event on net {state.nl.net_names[ev.net]} "
            f"(held {existing.arrival:.3f} ps, new {ev.arrival:.3f} ps)")
    if state.net_state[ev.net] == ev.polarity:
        raise KernelError(
            f"polarity alternation violated on net {state.nl.net_names[ev.net]}: "
            f"consecutive {_POL_NAME[ev.polarity]} transitions")
    state.net2event[ev.net] = ev
    heapq.heappush(state.q, (ev.arrival, ev.net, ev.seq))
    state.events_created += 1
    if state.event_log is not None:
        state.event_log.append(("emit", ev.net, ev.arrival, ev.transition_time, ev.polarity))
    parked = state.pending_trigger.pop(ev.net, None)
    if parked is not None:
        del state.parked_by_net[parked.net]
        heapq.heappush(state.q, (parked.arrival, parked.net, parked.seq))


def _consume(state, ev):
    state.net2event.pop(ev.net, None)
    trigger = state.parked_by_net.pop(ev.net, None)
    if trigger is not None:
        state.pending_trigger.pop(trigger, None)
    state.net_state[ev.net] = ev.polarity
    state.events_consumed += 1
    if state.event_log is not None:
        state.event_log.append(("consume", ev.net, ev.arrival, ev.transition_time, ev.polarity))
    ro = state.ref_ro[ev.net]
    if ro is not None and ev.polarity == RISE:
        prev = state.last_rise[ro]
        cycle = state.rise_count[ro]
        if prev is None:
            state.period_records[ro].append((cycle, ev.arrival, None))
        else:
            period = ev.arrival - prev
            state.period_history[ro].append(period)
            state.period_records[ro].append((cycle, ev.arrival, period))
            state.cycle_completed = True
        state.last_rise[ro] = ev.arrival
        state.rise_count[ro] = cycle + 1


def _emit(state, src, arc, delay, tt_out):
    if delay <= 0.0:
        raise CausalityError(
            f"arc {arc.cell.name}.{arc.name} produced nonpositive delay {delay}")
    arrival = src.arrival + delay
    if arrival <= src.arrival:
        raise CausalityError(
            f"generated arrival {arrival} does not follow cause at {src.arrival}")
    pol = src.polarity ^ (1 if arc.inverting else 0)
    ev = Event(arc.out_net, arrival, tt_out, pol, state.next_seq())
    _schedule(state, ev)
    return ev


def _interp_pair(axis, d_vals, tt_vals, x):
    if x <= axis[0]:
        return d_vals[0], tt_vals[0]
    if x >= axis[-1]:
        return d_vals[-1], tt_vals[-1]
    hi = bisect.bisect_right(axis, x)
    lo = hi - 1
    f = (x - axis[lo]) / (axis[hi] - axis[lo])
    return (d_vals[lo] + f * (d_vals[hi] - d_vals[lo]),
            tt_vals[lo] + f * (tt_vals[hi] - tt_vals[lo]))


def _plain_delay(state, net, arc, pol, tt_in):
    """Chained 1-D lookups through a (possibly padded) non-interacting arc."""
    axis, fall_tab, rise_tab = state.rcv_1d[net]
    total = 0.0
    tt = tt_in
    p = pol
    for _ in range(arc.stages):
        tab = rise_tab if p else fall_tab
        d, tt = _interp_pair(axis, tab[0], tab[1], tt)
        total += d
        p ^= 1
    return total, tt


def _saturated(state, arc, ev, other_val):
    """Delay with the quiet other input applying its constant end-column shift."""
    opposing = other_val != ev.polarity
    axis, d_vals, tt_vals = state.rcv_sat[ev.net][(ev.polarity, opposing)]
    d, tt = _interp_pair(axis, d_vals, tt_vals, ev.transition_time)
    if state.site_log is not None:
        da = state.w if opposing else -state.w
        state.site_log.append((arc.cell.name, ev.net, da, "saturated"))
    return d, tt


def look_back(net, window, threshold, state):
    """Can an event still arrive on ``net`` inside ``window``?

    Recursive over predecessor nets: an unconsumed event on the net
    decides immediately; otherwise the window is widened by the preceding
    cell's delay bounds and the search moves one net upstream, giving up
    once the window's right edge falls below ``threshold``.
    """
    left, right = window
    if right < threshold:
        return False
    ev = state.net2event.get(net)
    if ev is not None:
        return left <= ev.arrival <= right
    bounds = state.drv_bounds[net]
    if bounds is None:
        return False
    arc = state.nl.driver[net]
    d_min, d_max = bounds
    return look_back(arc.in_net, (left - d_max, right - d_min), threshold, state)


def process_event(e, state, nl, tf):
    """Propagate one popped event; returns the newly generated events.

    Enable cells, reverse paths, and inactive forward arcs take a single
    1-D lookup.  Active forward arcs pair with the other input when both
    transitions fall inside the interaction window (consuming both and
    producing two outputs), apply the saturated constant shift when the
    other input is quietly stable, or park the event when the backward
    search predicts a partner that has not been generated yet.
    """
    arc = nl.receiver[e.net]
    if arc is None:
        raise ValidationError(f"net {nl.net_names[e.net]} has no receiving arc")
    forced = False
    if state.forced:
        key = (e.net, e.seq)
        if key in state.forced:
            state.forced.discard(key)
            forced = True

    partner_net = arc.partner_net
    if partner_net >= 0 and not forced:
        other = state.net2event.get(partner_net)
        if other is not None:
            delta = other.arrival - e.arrival
            if abs(delta) <= state.w:
                partner_arc = nl.receiver[partner_net]
                pp_self = _PP[e.polarity * 2 + other.polarity]
                pp_other = _PP[other.polarity * 2 + e.polarity]
                d1, tt1 = lookup_coupled(tf, arc.level, pp_self,
                                         e.transition_time, other.transition_time,
                                         delta, cell_kind=arc.cell.kind)
                d2, tt2 = lookup_coupled(tf, partner_arc.level, pp_other,
                                         other.transition_time, e.transition_time,
                                         -delta, cell_kind=partner_arc.cell.kind)
                if state.site_log is not None:
                    state.site_log.append((arc.cell.name, e.net, delta, "paired"))
                _consume(state, e)
                _consume(state, other)
                out1 = _emit(state, e, arc, d1, tt1)
                out2 = _emit(state, other, partner_arc, d2, tt2)
                return [out1, out2]
            # The scheduled partner transition is outside the window, so the
            # other net is effectively stable until after this edge.
            d, tt = _saturated(state, arc, e, 1 - other.polarity)
            _consume(state, e)
            return [_emit(state, e, arc, d, tt)]
        window = (e.arrival - state.w, e.arrival + state.w)
        if look_back(partner_net, window, window[0], state):
            state.pending_trigger[partner_net] = e
            state.parked_by_net[e.net] = partner_net
            bounds = state.drv_bounds[partner_net]
            d_max = bounds[1] if bounds else 0.0
            heapq.heappush(state.deadlines,
                           (window[1] + d_max, partner_net, e.net, e.seq))
            return []
        d, tt = _saturated(state, arc, e, state.net_state[partner_net])
        _consume(state, e)
        return [_emit(state, e, arc, d, tt)]

    if partner_net >= 0 and forced:
        d, tt = _saturated(state, arc, e, state.net_state[partner_net])
        _consume(state, e)
        return [_emit(state, e, arc, d, tt)]

    d, tt = _plain_delay(state, e.net, arc, e.polarity, e.transition_time)
    _consume(state, e)
    return [_emit(state, e, arc, d, tt)]


def check_sync(state, cfg):
    """All oscillators holding a common period over the last few cycles."""
    if state.nl.n_ros < 2:
        return False   # a lone oscillator has nothing to synchronize with
    done = min(len(h) for h in state.period_history) if state.period_history else 0
    if done < cfg.sync_window:
        return False
    for idx in range(done - cfg.sync_window, done):
        vals = [state.period_history[ro][idx] for ro in range(state.nl.n_ros)]
        mean = sum(vals) / len(vals)
        if max(abs(v - mean) for v in vals) > cfg.tolerance:
            return False
    return True


def _common_period(state):
    if all(state.period_history) and min(len(h) for h in state.period_history) >= 1:
        return sum(h[-1] for h in state.period_history) / state.nl.n_ros
    return state.nl.nominal_period(state.tf)


def assign_spins(state, nl):
    """Spins from the last reference rising edges, relative to oscillator 0.

    +1 when the phase difference is closer to zero than to half a period;
    the exact quarter-period boundary resolves to -1.
    """
    t = _common_period(state)
    phases = []
    for ro in range(nl.n_ros):
        mark = state.last_rise[ro]
        if mark is None:
            mark = 0.0
        phases.append(mark % t)
    spins = []
    for ro in range(nl.n_ros):
        d = (phases[ro] - phases[0]) % t
        dist_zero = min(d, t - d)
        dist_half = abs(d - t / 2.0)
        spins.append(1 if dist_zero < dist_half else -1)
    spins[0] = 1
    return spins


def _pop_live(state):
    """Next live queue entry, skipping tombstones from joint consumption."""
    q = state.q
    while q:
        arrival, net, seq = q[0]
        ev = state.net2event.get(net)
        if ev is None or ev.seq != seq:
            heapq.heappop(q)
            continue
        return arrival, net, seq
    return None


def _release_parked(state, deadline_entry):
    _deadline, trigger_net, ev_net, ev_seq = deadline_entry
    parked = state.pending_trigger.get(trigger_net)
    if parked is None or parked.net != ev_net or parked.seq != ev_seq:
        return False
    del state.pending_trigger[trigger_net]
    del state.parked_by_net[parked.net]
    state.forced.add((parked.net, parked.seq))
    heapq.heappush(state.q, (parked.arrival, parked.net, parked.seq))
    return True


def _run_watchdog(state, head_arrival):
    """Release parked events whose predicted partner window has lapsed."""
    while state.deadlines and state.deadlines[0][0] < head_arrival:
        _release_parked(state, heapq.heappop(state.deadlines))


def make_state(nl, tf, cfg):
    """Initialized kernel state with quiescent net values and no events.

    Useful for driving :func:`process_event` and :func:`look_back`
    directly in tests and small experiments.
    """
    state = SimState(nl, tf, cfg)
    _init_net_states(state)
    return state


def inject(state, net, arrival, transition_time, polarity):
    """Schedule a boundary-condition event; returns it."""
    ev = Event(net, arrival, transition_time, polarity, state.next_seq())
    _schedule(state, ev)
    return ev


def simulate(nl, tf, cfg):
    """Run the event loop to synchronization or timeout and read out spins."""
    result, _state = simulate_debug(nl, tf, cfg)
    return result


def simulate_debug(nl, tf, cfg):
    """Like :func:`simulate` but also returns the final kernel state."""
    t_start = time.perf_counter()
    state = SimState(nl, tf, cfg)
    _init_net_states(state)

    t_nominal = nl.nominal_period(tf)
    if cfg.stagger is not None:
        if len(cfg.stagger) != nl.n_ros:
            raise ValidationError(
                f"stagger list has {len(cfg.stagger)} entries for {nl.n_ros} oscillators")
        stagger = [float(s) for s in cfg.stagger]
    else:
        rng = np.random.default_rng(cfg.seed)
        stagger = [float(v) for v in rng.uniform(0.0, t_nominal, nl.n_ros)]

    for ro in range(nl.n_ros):
        ev = Event(nl.seed_net[ro], stagger[ro], tf.tt0, RISE, state.next_seq())
        _schedule(state, ev)

    reason = "timeout"
    while True:
        head = _pop_live(state)
        if head is None:
            # Nothing runnable: let mutually parked wavefronts make
            # progress one release at a time, earliest deadline first.
            while state.deadlines and head is None:
                if _release_parked(state, heapq.heappop(state.deadlines)):
                    head = _pop_live(state)
            if head is None:
                if state.pending_trigger:
                    raise DeadlockError(
                        [nl.net_names[n] for n in sorted(state.pending_trigger)])
                break
        arrival, net, seq = head
        if state.deadlines and state.deadlines[0][0] < arrival:
            _run_watchdog(state, arrival)
            continue   # a release may now precede the old head
        if arrival > cfg.max_time:
            reason = "timeout"
            break
        heapq.heappop(state.q)
        state.clock = arrival
        ev = state.net2event[net]
        process_event(ev, state, nl, tf)
        if state.cycle_completed:
            state.cycle_completed = False
            if check_sync(state, cfg):
                reason = "synchronized"
                break

    spins = assign_spins(state, nl)
    wall_ms = (time.perf_counter() - t_start) * 1000.0
    return SimResult(
        spins=spins,
        reason=reason,
        periods={ro: list(state.period_records[ro]) for ro in range(nl.n_ros)},
        events_processed=state.events_consumed,
        net2event=dict(state.net2event),
        period_estimate=_common_period(state),
        wall_time_ms=wall_ms,
        stagger=stagger,
    ), state


def write_periods_csv(result, path):
    """Per-cycle waveform dump: ro_id,cycle,arrival_ps,period_ps."""
    with open(path, "w") as fh:
        fh.write("ro_id,cycle,arrival_ps,period_ps\n")
        for ro in sorted(result.periods):
            for cycle, arrival, period in result.periods[ro]:
                p = "" if period is None else f"{period:.6f}"
                fh.write(f"{ro},{cycle},{arrival:.6f},{p}\n")


def write_result_json(result, path, energy=None, extra=None):
    payload = {
        "spins": list(result.spins),
        "energy": energy,
        "reason": result.reason,
        "events_processed": result.events_processed,
        "wall_time_ms": round(result.wall_time_ms, 3),
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
