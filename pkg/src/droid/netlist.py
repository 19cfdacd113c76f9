"""Array and ring-testbench construction as cells, nets, and timing arcs.

Every ring oscillator is one directed cycle of timing arcs; nets have
exactly one driver and one receiver, and coupling happens inside cells
(between a cell's two forward arcs), never on nets.

The all-to-all array anchors each oscillator at its diagonal shorting
cell and interleaves its row and column interacting arcs so that for any
pair (i, j) the two coupling sites sit one stage apart in both rings,
symmetrically about the in-phase alignment.  With the stated forward rows
non-inverting and everything else inverting, a positive level then pulls
the pair toward equal reference phases and a negative level toward
opposite phases, independent of where the pair sits in the array.  The
non-interacting reverse arcs form the return half of each cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .ising import CouplingMatrix
from .timing import lookup_uncoupled


@dataclass
class Arc:
    """One timing arc: input net to output net through a cell."""

    cell: "Cell"
    name: str                 # h_f, v_f, h_r, v_r, en
    in_net: int
    out_net: int
    inverting: bool
    stages: int = 1           # enable cells may carry a padding stage
    level: int = 0            # nonzero only on interacting forward arcs
    partner_net: int = -1     # input net of the paired arc, -1 if none

    @property
    def interacting(self):
        return self.partner_net >= 0


@dataclass
class Cell:
    kind: str                         # enable, coupling, shorting
    name: str
    position: tuple | None = None     # (row, col) for array cells
    coupling_level: int = 0
    pins: dict = field(default_factory=dict)
    arcs: list = field(default_factory=list)


class Netlist:
    """Cells, nets, and per-oscillator ring structure."""

    def __init__(self, n_ros, tf=None):
        self.n_ros = n_ros
        self.tf = tf
        self.cells = []
        self.net_names = []
        self.arcs = []
        self.driver = []        # net -> Arc driving it (None for undriven)
        self.receiver = []      # net -> Arc consuming events on it
        self.net_ro = []        # net -> oscillator index
        self.ro_nets = [[] for _ in range(n_ros)]   # ordered around each cycle
        self.ref_net = [None] * n_ros    # output of each enable cell
        self.seed_net = [None] * n_ros   # input of each enable cell
        self.matrix = None

    def new_net(self, name, ro):
        net = len(self.net_names)
        self.net_names.append(name)
        self.driver.append(None)
        self.receiver.append(None)
        self.net_ro.append(ro)
        return net

    def add_arc(self, arc):
        if self.receiver[arc.in_net] is not None:
            raise ValidationError(f"net {self.net_names[arc.in_net]} already has a receiver")
        if self.driver[arc.out_net] is not None:
            raise ValidationError(f"net {self.net_names[arc.out_net]} already has a driver")
        self.receiver[arc.in_net] = arc
        self.driver[arc.out_net] = arc
        self.arcs.append(arc)
        arc.cell.arcs.append(arc)

    @property
    def n_nets(self):
        return len(self.net_names)

    def nominal_period(self, tf=None):
        """Free-running period of oscillator 0: twice the sum of its stage delays."""
        tf = tf or self.tf
        total = 0.0
        for net in self.ro_nets[0]:
            arc = self.receiver[net]
            d, _tt = lookup_uncoupled(tf, arc.cell.kind, "rise", tf.tt0)
            total += d * arc.stages
        return 2.0 * total

    def cycle_parity_odd(self, ro=0):
        inv = 0
        for net in self.ro_nets[ro]:
            arc = self.receiver[net]
            inv += arc.stages if arc.inverting or arc.stages > 1 else 0
            # a two-stage enable contributes two inversions regardless of flag
        return inv % 2 == 1


def _arc_inversions(arc):
    if arc.stages > 1:
        return arc.stages
    return 1 if arc.inverting else 0


def predecessor(nl, net):
    """Upstream net and cell whose arc produces events on ``net``.

    Returns ``(None, None)`` for undriven (primary-input) nets.
    """
    if not 0 <= net < nl.n_nets:
        raise ValidationError(f"net {net} does not exist")
    arc = nl.driver[net]
    if arc is None:
        return None, None
    return arc.in_net, arc.cell


def delay_bounds(nl, cell, tf=None):
    """Delay range (d_min, d_max) of a cell, from its timing tables."""
    tf = tf or nl.tf
    if tf is None:
        raise ValidationError("netlist has no timing file attached")
    stages = max(arc.stages for arc in cell.arcs) if cell.arcs else 1
    level = cell.coupling_level if any(a.interacting for a in cell.arcs) else 0
    return tf.bounds_for(cell.kind, level, stages)


def _split_level(j, upper):
    """Half weights for the two cells implementing one coefficient."""
    return (j + 1) // 2 if upper else j // 2


def build_a2a(n, m, tf):
    """All-to-all array: n oscillators over an n-by-n cell grid.

    Cell (i, j), i != j, carries half of J[i][j] (the other half sits at
    (j, i)); shorting cells occupy the diagonal and enable cells sit
    outside the array, one per oscillator.
    """
    if m.n > n:
        raise ValidationError(f"problem has {m.n} spins but the array only fits {n}")
    max_level = int(max(abs(int(v)) for row in m.j for v in row)) if m.n else 0
    if max_level > 2 * tf.c_max:
        raise ValidationError(
            f"|J| up to {max_level} needs cell levels beyond the timing file's c_max = {tf.c_max}")

    nl = Netlist(n, tf)
    nl.matrix = m

    def j_of(a, b):
        if a < m.n and b < m.n:
            return int(m.j[a, b])
        return 0

    enables = []
    grid = {}
    for i in range(n):
        en = Cell("enable", f"en{i}", position=None)
        enables.append(en)
        nl.cells.append(en)
    for r in range(n):
        for c in range(n):
            if r == c:
                cell = Cell("shorting", f"s{r}_{c}", position=(r, c),
                            coupling_level=2 * tf.c_max)
            else:
                lvl = _split_level(j_of(r, c), upper=(r < c))
                cell = Cell("coupling", f"c{r}_{c}", position=(r, c), coupling_level=lvl)
            grid[(r, c)] = cell
            nl.cells.append(cell)

    ring_len = 4 * n + 1
    # 3n inversions come from the fixed arcs below; the enable pad keeps the
    # cycle total odd.
    en_stages = 1 if (3 * n + 1) % 2 == 1 else 2

    pin_of = {"h_f": ("h_in_f", "h_out_f"), "v_f": ("v_in_f", "v_out_f"),
              "h_r": ("h_in_r", "h_out_r"), "v_r": ("v_in_r", "v_out_r"),
              "en": ("inp", "outp")}

    for i in range(n):
        seq = [(grid[(i, i)], "h_f"), (grid[(i, i)], "v_f")]
        for u in range(1, n):
            seq.append((grid[(i, (i + u) % n)], "h_f"))
            seq.append((grid[((i - u) % n, i)], "v_f"))
        for u in range(n - 1, 0, -1):
            seq.append((grid[(i, (i + u) % n)], "h_r"))
            seq.append((grid[((i - u) % n, i)], "v_r"))
        seq.append((grid[(i, i)], "h_r"))
        seq.append((grid[(i, i)], "v_r"))
        seq.append((enables[i], "en"))
        assert len(seq) == ring_len

        nets = [nl.new_net(f"ro{i}.n{p}", i) for p in range(ring_len)]
        nl.ro_nets[i] = nets
        for p, (cell, arc_name) in enumerate(seq):
            in_net = nets[p]
            out_net = nets[(p + 1) % ring_len]
            if arc_name == "en":
                arc = Arc(cell, arc_name, in_net, out_net,
                          inverting=(en_stages % 2 == 1), stages=en_stages)
            else:
                arc = Arc(cell, arc_name, in_net, out_net, inverting=(arc_name != "h_f"))
            nl.add_arc(arc)
            pin_in, pin_out = pin_of[arc_name]
            cell.pins[pin_in] = in_net
            cell.pins[pin_out] = out_net
        nl.ref_net[i] = nets[0]
        nl.seed_net[i] = nets[ring_len - 1]

    # Pair the forward arcs of every active coupling cell.
    for (r, c), cell in grid.items():
        if cell.kind != "coupling" or cell.coupling_level == 0:
            continue
        arcs = {a.name: a for a in cell.arcs}
        h, v = arcs["h_f"], arcs["v_f"]
        h.level = v.level = cell.coupling_level
        h.partner_net = v.in_net
        v.partner_net = h.in_net
    return nl


def build_ring_pair(stages, couplings, tf=None):
    """Chain of plain inverter-ring oscillators with stage-to-stage couplings.

    ``couplings[c] = (stage_a, stage_b, level)`` ties stage ``stage_a`` of
    oscillator ``c`` to stage ``stage_b`` of oscillator ``c + 1``; the
    resulting Ising sign follows the stage parities (equal parity behaves
    as a positive coupling, opposite parity as a negative one).  With no
    couplings this is a single free-running ring.
    """
    if stages % 2 == 0 or stages < 3:
        raise ValidationError(f"ring needs an odd stage count >= 3, got {stages}")
    n_ros = len(couplings) + 1
    nl = Netlist(n_ros, tf)

    for r in range(n_ros):
        nets = [nl.new_net(f"ro{r}.n{s}", r) for s in range(stages)]
        nl.ro_nets[r] = nets
        en = Cell("enable", f"en{r}", position=(r, 0))
        nl.cells.append(en)
        arc = Arc(en, "en", nets[stages - 1], nets[0], inverting=True)
        nl.add_arc(arc)
        en.pins["inp"] = nets[stages - 1]
        en.pins["outp"] = nets[0]
        for s in range(1, stages):
            cell = Cell("coupling", f"st{r}_{s}", position=(r, s))
            nl.cells.append(cell)
            arc = Arc(cell, "h_f", nets[s - 1], nets[s], inverting=True)
            nl.add_arc(arc)
            cell.pins["h_in_f"] = nets[s - 1]
            cell.pins["h_out_f"] = nets[s]
        nl.ref_net[r] = nets[0]
        nl.seed_net[r] = nets[stages - 1]

    for c, (sa, sb, lvl) in enumerate(couplings):
        for s in (sa, sb):
            if not 1 <= s < stages:
                raise ValidationError(f"coupled stage {s} out of range [1, {stages - 1}]")
        if lvl == 0:
            raise ValidationError("coupling level must be nonzero")
        arc_a = nl.receiver[nl.ro_nets[c][sa - 1]]
        arc_b = nl.receiver[nl.ro_nets[c + 1][sb - 1]]
        for arc in (arc_a, arc_b):
            if arc.interacting:
                raise ValidationError(f"stage {arc.cell.name} is already coupled")
        arc_a.level = arc_b.level = lvl
        arc_a.partner_net = arc_b.in_net
        arc_b.partner_net = arc_a.in_net
        arc_a.cell.coupling_level = arc_b.cell.coupling_level = lvl
    return nl


def ring_pair_matrix(stages, couplings):
    """Ising matrix the chained-ring testbench realizes (sign from parity)."""
    n = len(couplings) + 1
    j = np.zeros((n, n), dtype=np.int64)
    for c, (sa, sb, lvl) in enumerate(couplings):
        sign = 1 if (sa % 2) == (sb % 2) else -1
        j[c, c + 1] = j[c + 1, c] = sign * lvl
    c_max = max(7, int(math.ceil(max((abs(l) for _a, _b, l in couplings), default=1) / 2)))
    return CouplingMatrix(j, c_max=c_max)


def dump_netlist(nl):
    """One line per cell: kind, position, level, pin-to-net map."""
    lines = []
    for cell in nl.cells:
        pins = " ".join(f"{p}={nl.net_names[net]}" for p, net in sorted(cell.pins.items()))
        pos = f"{cell.position[0]},{cell.position[1]}" if cell.position else "-"
        lines.append(f"{cell.kind} {cell.name} pos={pos} level={cell.coupling_level} {pins}")
    return "\n".join(lines) + "\n"
