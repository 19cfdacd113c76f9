"""Post-processing: normalized-energy histograms and 1-D Earth Mover Distance.

Energies are normalized to the problem optimum and binned on a fixed
0.05-wide grid anchored at 1.0, so histograms from different runs share
bin edges and the equal-mass 1-D EMD reduces to the L1 distance between
cumulative distributions times the bin width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

BIN_WIDTH = 0.05


@dataclass
class SolutionSample:
    spins: list
    energy: int
    normalized_energy: float
    seed: int
    wall_time: float = 0.0


@dataclass
class Histogram:
    edges: list                # len(counts) + 1, strictly increasing, uniform
    counts: list
    total: int

    def validate(self):
        if len(self.edges) != len(self.counts) + 1:
            raise ValidationError("histogram needs one more edge than counts")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValidationError("histogram edges must be strictly increasing")
        if sum(self.counts) != self.total:
            raise ValidationError("histogram counts do not sum to total")

    @property
    def bin_width(self):
        return self.edges[1] - self.edges[0]


def _anchor_index(v, width):
    # Bin m covers [1 + m*width, 1 + (m+1)*width); tiny epsilon absorbs
    # float fuzz on exact edges.
    return math.floor((v - 1.0) / width + 1e-9)


def normalize_and_bin(energies, optimum, width=BIN_WIDTH):
    """Histogram of energy/optimum on the fixed grid anchored at 1.0."""
    if optimum == 0:
        raise ValidationError("optimum energy must be nonzero for normalization")
    values = [e / optimum for e in energies]
    if not values:
        return Histogram(edges=[1.0, 1.0 + width], counts=[0], total=0)
    idx = [_anchor_index(v, width) for v in values]
    lo, hi = min(idx), max(idx)
    counts = [0] * (hi - lo + 1)
    for m in idx:
        counts[m - lo] += 1
    edges = [1.0 + m * width for m in range(lo, hi + 2)]
    h = Histogram(edges=edges, counts=counts, total=len(values))
    h.validate()
    return h


def align_histograms(a, b):
    """Re-span two anchored histograms onto a common contiguous edge range."""
    if not math.isclose(a.bin_width, b.bin_width):
        raise ValidationError(
            f"bin widths differ: {a.bin_width} vs {b.bin_width}")
    width = a.bin_width
    lo = min(_anchor_index(a.edges[0] + width / 2, width),
             _anchor_index(b.edges[0] + width / 2, width))
    hi = max(_anchor_index(a.edges[-1] - width / 2, width),
             _anchor_index(b.edges[-1] - width / 2, width))

    def respan(h):
        base = _anchor_index(h.edges[0] + width / 2, width)
        counts = [0] * (hi - lo + 1)
        for k, c in enumerate(h.counts):
            counts[base - lo + k] = c
        edges = [1.0 + m * width for m in range(lo, hi + 2)]
        return Histogram(edges=edges, counts=counts, total=h.total)

    return respan(a), respan(b)


def emd_1d(a, b):
    """Earth Mover Distance between equal-mass 1-D histograms.

    Requires identical bin edges and nonzero totals; the distance comes
    out in normalized-energy units.
    """
    a.validate()
    b.validate()
    if len(a.edges) != len(b.edges) or any(
            not math.isclose(x, y, abs_tol=1e-12) for x, y in zip(a.edges, b.edges)):
        raise ValidationError("histograms must share identical bin edges")
    if a.total == 0 or b.total == 0:
        raise ValidationError("both histograms need positive total mass")
    width = a.bin_width
    cdf_a = cdf_b = 0.0
    dist = 0.0
    for ca, cb in zip(a.counts, b.counts):
        cdf_a += ca / a.total
        cdf_b += cb / b.total
        dist += abs(cdf_a - cdf_b) * width
    return dist


def phase_snapshots(result, cycles):
    """Phase of every oscillator relative to oscillator 0 at chosen cycles.

    Phases are reported in [0, 2*pi) using the run's settled period.
    """
    t = result.period_estimate
    two_pi = 2.0 * math.pi
    out = []
    n_ros = len(result.periods)
    for c in cycles:
        arrivals = []
        for ro in range(n_ros):
            records = result.periods[ro]
            if c < 0 or c >= len(records):
                raise ValidationError(
                    f"cycle {c} beyond run length {len(records)} for oscillator {ro}")
            arrivals.append(records[c][1])
        out.append([((arrivals[ro] - arrivals[0]) % t) / t * two_pi
                    for ro in range(n_ros)])
    return out


def write_histogram_csv(h, path):
    with open(path, "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        for k, c in enumerate(h.counts):
            fh.write(f"{h.edges[k]:.6f},{h.edges[k + 1]:.6f},{c}\n")


def emd_report(a, b):
    """JSON-ready EMD comparison of two sample histograms."""
    ra, rb = align_histograms(a, b)
    return {
        "emd": emd_1d(ra, rb),
        "n_a": a.total,
        "n_b": b.total,
        "bin_width": a.bin_width,
    }
