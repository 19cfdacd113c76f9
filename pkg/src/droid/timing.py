"""Lookup-table timing model for the array cells.

Per-cell timing lives in a :class:`TimingFile`: 1-D tables give the delay
and output transition time of a non-interacting arc as a function of the
input transition time; 3-D tables cover a coupled forward-arc pair and are
indexed by both transition times and the arrival-time difference of the
two edges, which is only meaningful inside the interaction window
[-W, +W].  Outside the window the two saturated end columns apply, chosen
by whether the quiet input currently opposes or aids the transition.

A closed-form surrogate characterizer fills these tables so the simulator
runs without an external circuit-level characterization; an externally
produced file in the same format drops in unchanged.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

CELL_KINDS = ("enable", "coupling", "shorting")
POLARITIES = ("rise", "fall")
POL_PAIRS = ("rr", "ff", "rf", "fr")

_Q = 6  # fractional digits stored in timing files


def _q(x):
    """Quantize to the file resolution so save/load round-trips bit-for-bit."""
    return float(f"{x:.{_Q}f}")


@dataclass
class Table1D:
    """Delay and output transition time versus input transition time."""

    tt_axis: list[float]
    delay: list[float]
    tt_out: list[float]

    def validate(self):
        if len(self.tt_axis) < 2:
            raise ValidationError("1-D table needs at least two axis points")
        if any(b <= a for a, b in zip(self.tt_axis, self.tt_axis[1:])):
            raise ValidationError("1-D table axis must be strictly increasing")
        if len(self.delay) != len(self.tt_axis) or len(self.tt_out) != len(self.tt_axis):
            raise ValidationError("1-D table value lengths must match the axis")
        if any(d <= 0 for d in self.delay):
            raise ValidationError("all delays must be strictly positive")


@dataclass
class Table3D:
    """Coupled-arc delay and output transition time.

    Values are row-major over (tt_self, tt_other, da); the da axis spans
    exactly [-W, +W].
    """

    tt_self_axis: list[float]
    tt_other_axis: list[float]
    da_axis: list[float]
    delay: np.ndarray
    tt_out: np.ndarray

    def validate(self, window_w):
        shape = (len(self.tt_self_axis), len(self.tt_other_axis), len(self.da_axis))
        for name, axis in (("tt_self", self.tt_self_axis),
                           ("tt_other", self.tt_other_axis),
                           ("da", self.da_axis)):
            if len(axis) < 2:
                raise ValidationError(f"3-D table {name} axis needs at least two points")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValidationError(f"3-D table {name} axis must be strictly increasing")
        if self.delay.shape != shape or self.tt_out.shape != shape:
            raise ValidationError(f"3-D table values must have shape {shape}")
        if self.da_axis[0] != -window_w or self.da_axis[-1] != window_w:
            raise ValidationError(
                f"da axis must span [-W, +W] = [{-window_w}, {window_w}], "
                f"got [{self.da_axis[0]}, {self.da_axis[-1]}]")
        if np.any(self.delay <= 0):
            raise ValidationError("all delays must be strictly positive")


@dataclass
class SurrogateParams:
    """Constants for the closed-form table generator.

    The weak-coupling requirement ``delta0 * 2 * c_max < d0`` keeps every
    coupled delay positive and small against the stage delay.
    """

    d0: float = 50.0          # base stage delay, ps
    tt0: float = 40.0         # base transition time, ps
    delta0: float = 1.0       # delay shift per unit coupling level, ps
    k_tt: float = 0.1         # delay sensitivity to input transition time
    rho: float = 0.05         # transition-time perturbation factor
    window_w: float = 75.0    # interaction window, ps
    tt_grid: int = 8
    da_grid: int = 17
    tt_span: tuple[float, float] = (10.0, 100.0)

    def validate(self, c_max):
        if self.d0 <= 0 or self.tt0 <= 0 or self.window_w <= 0:
            raise ValidationError("d0, tt0 and window_w must be positive")
        if self.delta0 < 0 or self.rho < 0:
            raise ValidationError("delta0 and rho must be nonnegative")
        if self.delta0 * 2 * c_max >= self.d0:
            raise ValidationError(
                f"weak coupling violated: delta0*2*c_max = {self.delta0 * 2 * c_max} "
                f"must stay below d0 = {self.d0}")
        if self.tt_grid < 2 or self.da_grid < 3 or self.da_grid % 2 == 0:
            raise ValidationError("tt grid needs >= 2 points, da grid an odd count >= 3")


@dataclass
class TimingFile:
    """All tables plus the interaction window and per-kind delay bounds."""

    window_w: float
    c_max: int
    d0: float
    tt0: float
    tables_1d: dict = field(default_factory=dict)   # (kind, polarity) -> Table1D
    tables_3d: dict = field(default_factory=dict)   # (kind, level, pol_pair) -> Table3D
    delay_bounds: dict = field(default_factory=dict)  # kind -> (d_min, d_max)

    def __post_init__(self):
        self._level_bounds = {}

    def validate(self):
        for (kind, pol), tab in self.tables_1d.items():
            if kind not in CELL_KINDS or pol not in POLARITIES:
                raise ValidationError(f"unknown 1-D table key ({kind}, {pol})")
            tab.validate()
        for (kind, level, pp), tab in self.tables_3d.items():
            if kind not in CELL_KINDS or pp not in POL_PAIRS or level == 0:
                raise ValidationError(f"unknown 3-D table key ({kind}, {level}, {pp})")
            tab.validate(self.window_w)
        for kind, (lo, hi) in self.delay_bounds.items():
            if lo <= 0 or hi < lo:
                raise ValidationError(f"bad delay bounds for {kind}: ({lo}, {hi})")

    def __eq__(self, other):
        if not isinstance(other, TimingFile):
            return NotImplemented
        if (self.window_w, self.c_max, self.d0, self.tt0) != (other.window_w, other.c_max, other.d0, other.tt0):
            return False
        if self.delay_bounds != other.delay_bounds:
            return False
        if set(self.tables_1d) != set(other.tables_1d) or set(self.tables_3d) != set(other.tables_3d):
            return False
        for key, tab in self.tables_1d.items():
            o = other.tables_1d[key]
            if tab.tt_axis != o.tt_axis or tab.delay != o.delay or tab.tt_out != o.tt_out:
                return False
        for key, tab in self.tables_3d.items():
            o = other.tables_3d[key]
            if (tab.tt_self_axis != o.tt_self_axis or tab.tt_other_axis != o.tt_other_axis
                    or tab.da_axis != o.da_axis):
                return False
            if not np.array_equal(tab.delay, o.delay) or not np.array_equal(tab.tt_out, o.tt_out):
                return False
        return True

    def levels(self, kind="coupling"):
        return sorted({lvl for (k, lvl, _pp) in self.tables_3d if k == kind})

    def bounds_for(self, kind, level=0, stages=1):
        """Delay range of one arc of the given kind/level (chained ``stages`` times)."""
        key = (kind, level)
        if key not in self._level_bounds:
            lo, hi = None, None
            for pol in POLARITIES:
                tab = self.tables_1d.get((kind, pol))
                if tab is None:
                    continue
                lo = min(tab.delay) if lo is None else min(lo, min(tab.delay))
                hi = max(tab.delay) if hi is None else max(hi, max(tab.delay))
            if lo is None:
                raise ValidationError(f"no 1-D tables for cell kind {kind!r}")
            if level:
                for pp in POL_PAIRS:
                    tab = self.tables_3d.get((kind, level, pp))
                    if tab is None:
                        continue
                    lo = min(lo, float(tab.delay.min()))
                    hi = max(hi, float(tab.delay.max()))
            self._level_bounds[key] = (lo, hi)
        lo, hi = self._level_bounds[key]
        return lo * stages, hi * stages


def _interp1(axis, values, x):
    """Piecewise-linear interpolation, clamped at the axis ends."""
    if x <= axis[0]:
        return values[0]
    if x >= axis[-1]:
        return values[-1]
    hi = bisect.bisect_right(axis, x)
    lo = hi - 1
    frac = (x - axis[lo]) / (axis[hi] - axis[lo])
    return values[lo] + frac * (values[hi] - values[lo])


def _axis_coords(axis, x, clamp):
    if clamp:
        x = min(max(x, axis[0]), axis[-1])
    elif not axis[0] <= x <= axis[-1]:
        raise ValidationError(f"coordinate {x} outside table axis [{axis[0]}, {axis[-1]}]")
    hi = min(bisect.bisect_right(axis, x), len(axis) - 1)
    lo = hi - 1
    frac = (x - axis[lo]) / (axis[hi] - axis[lo])
    return lo, frac


def lookup_uncoupled(tf, cell_kind, polarity, tt_in):
    """1-D lookup: (delay, tt_out) for a non-interacting arc."""
    tab = tf.tables_1d.get((cell_kind, polarity))
    if tab is None:
        raise ValidationError(f"timing file has no 1-D table for ({cell_kind}, {polarity})")
    return (_interp1(tab.tt_axis, tab.delay, tt_in),
            _interp1(tab.tt_axis, tab.tt_out, tt_in))


def lookup_coupled(tf, k, pol_pair, tt_self, tt_other, delta_a, cell_kind="coupling"):
    """Trilinear lookup on the 3-D table selected by (k, pol_pair).

    ``delta_a`` is the other edge's arrival minus this edge's arrival and
    must satisfy |delta_a| <= W; out-of-window callers are expected to use
    the 1-D path plus the saturated end column instead.
    """
    if k == 0:
        raise ValidationError("coupled lookup requires a nonzero coupling level")
    if abs(delta_a) > tf.window_w:
        raise ValidationError(
            f"|delta_a| = {abs(delta_a)} exceeds interaction window W = {tf.window_w}")
    tab = tf.tables_3d.get((cell_kind, k, pol_pair))
    if tab is None:
        raise ValidationError(f"timing file has no 3-D table for ({cell_kind}, {k}, {pol_pair})")
    i, fi = _axis_coords(tab.tt_self_axis, tt_self, clamp=True)
    j, fj = _axis_coords(tab.tt_other_axis, tt_other, clamp=True)
    l, fl = _axis_coords(tab.da_axis, delta_a, clamp=False)

    def tri(v):
        c00 = v[i, j, l] * (1 - fl) + v[i, j, l + 1] * fl
        c01 = v[i, j + 1, l] * (1 - fl) + v[i, j + 1, l + 1] * fl
        c10 = v[i + 1, j, l] * (1 - fl) + v[i + 1, j, l + 1] * fl
        c11 = v[i + 1, j + 1, l] * (1 - fl) + v[i + 1, j + 1, l + 1] * fl
        c0 = c00 * (1 - fj) + c01 * fj
        c1 = c10 * (1 - fj) + c11 * fj
        return float(c0 * (1 - fi) + c1 * fi)

    return tri(tab.delay), tri(tab.tt_out)


def characterize_surrogate(p, c_max):
    """Populate a :class:`TimingFile` from the closed-form surrogate.

    Uncoupled delay: d(tt_in) = d0 + k_tt * (tt_in - tt0), tt_out = tt0.
    Coupled shift for same-polarity edges: k * delta0 * clamp(da / W), so
    an edge is slowed when the other edge is later and sped up when it is
    earlier; opposite-polarity pairs negate the shift.  The coupled output
    transition time is tt0 * (1 + rho * |clamp(da / W)|).

    ``c_max`` is the per-cell level range: 3-D tables are emitted for
    k in [-c_max, +c_max] excluding zero, plus rr/ff tables for the
    shorting cell at its fixed strong level.  ``c_max = 0`` emits 1-D
    tables only.
    """
    p.validate(c_max)
    w = p.window_w
    tt_axis = [_q(v) for v in np.linspace(p.tt_span[0], p.tt_span[1], p.tt_grid)]
    da_axis = [_q(v) for v in np.linspace(-w, w, p.da_grid)]

    def d1(tt):
        return p.d0 + p.k_tt * (tt - p.tt0)

    tf = TimingFile(window_w=_q(w), c_max=c_max, d0=_q(p.d0), tt0=_q(p.tt0))
    for kind in CELL_KINDS:
        for pol in POLARITIES:
            tf.tables_1d[(kind, pol)] = Table1D(
                tt_axis=list(tt_axis),
                delay=[_q(d1(tt)) for tt in tt_axis],
                tt_out=[_q(p.tt0)] * len(tt_axis),
            )

    def fill(kind, level, pol_pair):
        sign = 1.0 if pol_pair in ("rr", "ff") else -1.0
        delay = np.empty((len(tt_axis), len(tt_axis), len(da_axis)))
        tt_out = np.empty_like(delay)
        for i, ts in enumerate(tt_axis):
            for j, _to in enumerate(tt_axis):
                for l, da in enumerate(da_axis):
                    c = max(-1.0, min(1.0, da / w))
                    delay[i, j, l] = _q(d1(ts) + sign * level * p.delta0 * c)
                    tt_out[i, j, l] = _q(p.tt0 * (1.0 + p.rho * abs(c)))
        tf.tables_3d[(kind, level, pol_pair)] = Table3D(
            tt_self_axis=list(tt_axis), tt_other_axis=list(tt_axis),
            da_axis=list(da_axis), delay=delay, tt_out=tt_out)

    if c_max > 0:
        for level in range(-c_max, c_max + 1):
            if level == 0:
                continue
            for pp in POL_PAIRS:
                fill("coupling", level, pp)
        # Aligned rise/fall at a short never cross polarities, so rr and ff
        # suffice there.
        for pp in ("rr", "ff"):
            fill("shorting", 2 * c_max, pp)

    for kind in CELL_KINDS:
        lo, hi = None, None
        for pol in POLARITIES:
            tab = tf.tables_1d[(kind, pol)]
            lo = min(tab.delay) if lo is None else min(lo, min(tab.delay))
            hi = max(tab.delay) if hi is None else max(hi, max(tab.delay))
        for (k, _lvl, _pp), tab in tf.tables_3d.items():
            if k == kind:
                lo = min(lo, float(tab.delay.min()))
                hi = max(hi, float(tab.delay.max()))
        tf.delay_bounds[kind] = (_q(lo), _q(hi))
    tf.validate()
    return tf


def _fmt(values):
    return " ".join(f"{v:.{_Q}f}" for v in values)


def save_timing(tf, path):
    """Write the structured-text timing file (picoseconds throughout)."""
    with open(path, "w") as fh:
        fh.write(f"window_w_ps {tf.window_w:.{_Q}f}\n")
        fh.write(f"c_max {tf.c_max}\n")
        fh.write(f"nominal.d0_ps {tf.d0:.{_Q}f}\n")
        fh.write(f"nominal.tt0_ps {tf.tt0:.{_Q}f}\n")
        for kind in sorted(tf.delay_bounds):
            lo, hi = tf.delay_bounds[kind]
            fh.write(f"bounds {kind} {lo:.{_Q}f} {hi:.{_Q}f}\n")
        for (kind, pol) in sorted(tf.tables_1d):
            tab = tf.tables_1d[(kind, pol)]
            fh.write(f"table1d {kind} {pol}\n")
            fh.write(f"tt_axis {_fmt(tab.tt_axis)}\n")
            fh.write(f"delay {_fmt(tab.delay)}\n")
            fh.write(f"tt_out {_fmt(tab.tt_out)}\n")
            fh.write("end\n")
        for (kind, level, pp) in sorted(tf.tables_3d):
            tab = tf.tables_3d[(kind, level, pp)]
            fh.write(f"table3d {kind} {level} {pp}\n")
            fh.write(f"tt_self_axis {_fmt(tab.tt_self_axis)}\n")
            fh.write(f"tt_other_axis {_fmt(tab.tt_other_axis)}\n")
            fh.write(f"da_axis {_fmt(tab.da_axis)}\n")
            fh.write(f"delay {_fmt(tab.delay.reshape(-1))}\n")
            fh.write(f"tt_out {_fmt(tab.tt_out.reshape(-1))}\n")
            fh.write("end\n")


def load_timing(path):
    """Parse a timing file; errors carry the file and line of the fault."""
    header = {}
    bounds = {}
    tables_1d = {}
    tables_3d = {}

    def floats(tok, lineno):
        try:
            return [float(t) for t in tok]
        except ValueError:
            raise ParseError("expected numeric values", path, lineno) from None

    with open(path) as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].split("#", 1)[0].strip()
        i += 1
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        if key in ("window_w_ps", "nominal.d0_ps", "nominal.tt0_ps"):
            if len(tok) != 2:
                raise ParseError(f"{key} takes one value", path, lineno)
            header[key] = floats(tok[1:], lineno)[0]
        elif key == "c_max":
            try:
                header[key] = int(tok[1])
            except (IndexError, ValueError):
                raise ParseError("c_max takes one integer", path, lineno) from None
        elif key == "bounds":
            if len(tok) != 4 or tok[1] not in CELL_KINDS:
                raise ParseError("bounds line must be 'bounds <kind> <d_min> <d_max>'", path, lineno)
            lo, hi = floats(tok[2:], lineno)
            bounds[tok[1]] = (lo, hi)
        elif key in ("table1d", "table3d"):
            want = {"table1d": ("tt_axis", "delay", "tt_out"),
                    "table3d": ("tt_self_axis", "tt_other_axis", "da_axis", "delay", "tt_out")}[key]
            fields = {}
            start = lineno
            while i < len(lines):
                sub_lineno = i + 1
                sub = lines[i].split("#", 1)[0].strip()
                i += 1
                if not sub:
                    continue
                if sub == "end":
                    break
                stok = sub.split()
                if stok[0] not in want:
                    raise ParseError(f"unexpected field {stok[0]!r} in {key} block", path, sub_lineno)
                fields[stok[0]] = floats(stok[1:], sub_lineno)
            else:
                raise ParseError(f"unterminated {key} block", path, start)
            missing = [f for f in want if f not in fields]
            if missing:
                raise ParseError(f"{key} block missing fields {missing}", path, start)
            if key == "table1d":
                if len(tok) != 3 or tok[1] not in CELL_KINDS or tok[2] not in POLARITIES:
                    raise ParseError("table1d header must be 'table1d <kind> <rise|fall>'", path, start)
                tables_1d[(tok[1], tok[2])] = Table1D(
                    tt_axis=fields["tt_axis"], delay=fields["delay"], tt_out=fields["tt_out"])
            else:
                if len(tok) != 4 or tok[1] not in CELL_KINDS or tok[3] not in POL_PAIRS:
                    raise ParseError("table3d header must be 'table3d <kind> <level> <pol_pair>'", path, start)
                try:
                    level = int(tok[2])
                except ValueError:
                    raise ParseError(f"bad coupling level {tok[2]!r}", path, start) from None
                shape = (len(fields["tt_self_axis"]), len(fields["tt_other_axis"]), len(fields["da_axis"]))
                size = shape[0] * shape[1] * shape[2]
                if len(fields["delay"]) != size or len(fields["tt_out"]) != size:
                    raise ParseError(
                        f"table3d values must have {size} entries for shape {shape}", path, start)
                tables_3d[(tok[1], level, tok[3])] = Table3D(
                    tt_self_axis=fields["tt_self_axis"],
                    tt_other_axis=fields["tt_other_axis"],
                    da_axis=fields["da_axis"],
                    delay=np.array(fields["delay"]).reshape(shape),
                    tt_out=np.array(fields["tt_out"]).reshape(shape))
        else:
            raise ParseError(f"unknown key {key!r}", path, lineno)

    for req in ("window_w_ps", "c_max", "nominal.d0_ps", "nominal.tt0_ps"):
        if req not in header:
            raise ParseError(f"missing required key {req!r}", path)
    tf = TimingFile(window_w=header["window_w_ps"], c_max=header["c_max"],
                    d0=header["nominal.d0_ps"], tt0=header["nominal.tt0_ps"],
                    tables_1d=tables_1d, tables_3d=tables_3d, delay_bounds=bounds)
    try:
        tf.validate()
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc
    return tf
