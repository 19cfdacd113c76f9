"""Ising problem representation, energy evaluation, and exhaustive oracle.

Energies use the double-counted convention: the quadratic term sums over
the full symmetric matrix, so every pair (i, j) contributes twice.  All
energies reported by this package follow that convention.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ParseError, ValidationError

DEFAULT_C_MAX = 7


class CouplingMatrix:
    """Symmetric integer coupling matrix plus optional field vector.

    ``j`` is an n-by-n symmetric integer matrix with a zero diagonal and
    entries bounded by ``2 * c_max``.  ``h`` is a length-n integer vector
    and defaults to zero (linear terms are usually folded into a reference
    spin instead).
    """

    def __init__(self, j, h=None, c_max=DEFAULT_C_MAX):
        j = np.asarray(j, dtype=np.int64)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValidationError(f"coupling matrix must be square, got shape {j.shape}")
        n = j.shape[0]
        if h is None:
            h = np.zeros(n, dtype=np.int64)
        h = np.asarray(h, dtype=np.int64)
        if h.shape != (n,):
            raise ValidationError(f"field vector has shape {h.shape}, expected ({n},)")
        if not np.array_equal(j, j.T):
            raise ValidationError("coupling matrix must be symmetric")
        if np.any(np.diag(j) != 0):
            raise ValidationError("coupling matrix diagonal must be zero")
        if np.any(np.abs(j) > 2 * c_max):
            worst = int(np.max(np.abs(j)))
            raise ValidationError(f"|J| entries up to {worst} exceed 2*c_max = {2 * c_max}")
        self.n = int(n)
        self.j = j
        self.h = h
        self.c_max = int(c_max)

    def __eq__(self, other):
        if not isinstance(other, CouplingMatrix):
            return NotImplemented
        return np.array_equal(self.j, other.j) and np.array_equal(self.h, other.h)

    def __repr__(self):
        edges = int(np.count_nonzero(np.triu(self.j)))
        return f"CouplingMatrix(n={self.n}, edges={edges})"

    def edges(self):
        """Yield (i, j, weight) for every nonzero upper-triangle entry."""
        ii, jj = np.nonzero(np.triu(self.j))
        for a, b in zip(ii.tolist(), jj.tolist()):
            yield a, b, int(self.j[a, b])

    def density(self):
        pairs = self.n * (self.n - 1) // 2
        if pairs == 0:
            return 0.0
        return sum(1 for _ in self.edges()) / pairs


def _check_spins(m, s):
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (m.n,):
        raise ValidationError(f"spin vector has shape {s.shape}, expected ({m.n},)")
    if np.any(np.abs(s) != 1):
        raise ValidationError("spin entries must be +1 or -1")
    return s


def hamiltonian(m, s):
    """Energy of spin vector ``s``: -sum_ij J_ij s_i s_j - sum_i h_i s_i."""
    s = _check_spins(m, s)
    return int(-(s @ m.j @ s) - m.h @ s)


def normalize_spins(s):
    """Flip the whole vector so that spin 0 reads +1 (global-flip symmetry)."""
    s = np.asarray(s, dtype=np.int64)
    if s.size and s[0] < 0:
        return (-s).tolist()
    return s.tolist()


def brute_force_ground_state(m, max_n=24):
    """Exhaustive minimum via Gray-code single-flip walk over all 2^n states.

    Returns ``(spins, energy)`` with the reference spin normalized to +1
    when the field vector is zero.  Intended as an oracle: correct, not fast.
    """
    if m.n > max_n:
        raise ValidationError(f"n = {m.n} exceeds exhaustive enumeration budget of {max_n}")
    s = np.ones(m.n, dtype=np.int64)
    field = m.j @ s  # field[k] = sum_j J_kj s_j
    energy = int(-(s @ field) - m.h @ s)
    best_energy = energy
    best = s.copy()
    # Gray code: state g(t) = t ^ (t >> 1); step t flips bit ctz(t+1).
    for t in range(1, 1 << m.n):
        b = (t & -t).bit_length() - 1
        energy += int(4 * s[b] * field[b] + 2 * m.h[b] * s[b])
        s[b] = -s[b]
        field += 2 * s[b] * m.j[:, b]
        if energy < best_energy:
            best_energy = energy
            best = s.copy()
    if not np.any(m.h) and best[0] < 0:
        best = -best
    return best.tolist(), int(best_energy)


def random_problem(n, density, j_max, seed):
    """Random symmetric problem with the requested edge density.

    Exactly ``round(density * n(n-1)/2)`` unordered pairs receive a weight
    drawn uniformly from [-j_max, +j_max] excluding zero.  Deterministic
    for a given seed.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 spins, got {n}")
    if not 0.0 <= density <= 1.0:
        raise ValidationError(f"density must lie in [0, 1], got {density}")
    if j_max < 1:
        raise ValidationError(f"j_max must be a positive integer, got {j_max}")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m_edges = int(round(density * len(pairs)))
    chosen = rng.choice(len(pairs), size=m_edges, replace=False) if m_edges else []
    j = np.zeros((n, n), dtype=np.int64)
    # Uniform over the 2*j_max nonzero integers in [-j_max, j_max].
    raw = rng.integers(0, 2 * j_max, size=m_edges)
    for idx, r in zip(chosen, raw):
        a, b = pairs[int(idx)]
        w = int(r) - j_max
        if w >= 0:
            w += 1
        j[a, b] = j[b, a] = w
    return CouplingMatrix(j, c_max=max(DEFAULT_C_MAX, (j_max + 1) // 2))


def save_problem(m, path):
    """Write the edge-list problem file (`ising <n>` header, `i j J` lines)."""
    with open(path, "w") as fh:
        fh.write(f"ising {m.n}\n")
        for i, j, w in m.edges():
            fh.write(f"{i} {j} {w}\n")
        for i, v in enumerate(m.h.tolist()):
            if v:
                fh.write(f"h {i} {v}\n")


def load_problem(path, c_max=DEFAULT_C_MAX):
    """Parse a problem file written by :func:`save_problem` (or by hand)."""
    n = None
    j = None
    h = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if n is None:
                if len(tok) != 2 or tok[0] != "ising":
                    raise ParseError("expected header 'ising <n>'", path, lineno)
                try:
                    n = int(tok[1])
                except ValueError:
                    raise ParseError(f"bad spin count {tok[1]!r}", path, lineno) from None
                if n < 1:
                    raise ParseError(f"spin count must be positive, got {n}", path, lineno)
                j = np.zeros((n, n), dtype=np.int64)
                h = np.zeros(n, dtype=np.int64)
                continue
            if tok[0] == "h":
                if len(tok) != 3:
                    raise ParseError("field line must be 'h <i> <v>'", path, lineno)
                try:
                    i, v = int(tok[1]), int(tok[2])
                except ValueError:
                    raise ParseError("field index and value must be integers", path, lineno) from None
                if not 0 <= i < n:
                    raise ParseError(f"field index {i} out of range", path, lineno)
                h[i] = v
                continue
            if len(tok) != 3:
                raise ParseError("edge line must be '<i> <j> <J>'", path, lineno)
            try:
                a, b, w = int(tok[0]), int(tok[1]), int(tok[2])
            except ValueError:
                raise ParseError("edge fields must be integers", path, lineno) from None
            if not (0 <= a < n and 0 <= b < n):
                raise ParseError(f"edge ({a}, {b}) out of range", path, lineno)
            if a >= b:
                raise ParseError(f"edges must have i < j, got ({a}, {b})", path, lineno)
            j[a, b] = j[b, a] = w
    if n is None:
        raise ParseError("empty problem file", path)
    try:
        return CouplingMatrix(j, h, c_max=c_max)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


def problem_hash(m):
    """Stable hash of the problem content, used to pair sample sets."""
    payload = [f"ising {m.n}"]
    payload += [f"{i} {j} {w}" for i, j, w in m.edges()]
    payload += [f"h {i} {v}" for i, v in enumerate(m.h.tolist()) if v]
    digest = hashlib.sha256("\n".join(payload).encode()).hexdigest()
    return digest
