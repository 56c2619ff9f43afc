"""Low-coupling expansion of eigenvalues of the hopping-perturbed cost Hamiltonian.

Around zero hopping strength, the eigenvalue anchored at an assignment x
expands in even powers of the hopping coefficient.  Each even order q is a
sum of amplitudes A(P) over flip vectors P (p_i = half the number of times
bit i is flipped, sum p_i = q/2), and A(P) vanishes whenever the support of
P is disconnected in the coupling graph, so orders 2, 4, 6 only need
singletons, coupled pairs and connected triples.

Every amplitude is assembled from closed hypercube walks that avoid the
anchor at interior steps, combined with the analytic energy derivatives the
order-4 and order-6 corrections require:

    e2 = s2
    e4 = (1/2) d/dE (s2**2) + s4
    e6 = (1/6) d^2/dE^2 (s2**3) + d/dE (s2*s4) + s6

with every term evaluated at the anchor energy.  Two numeric modes are
supported: exact rationals (tests, small instances) and doubles (bulk runs).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import sqrt
from typing import Mapping, Sequence

import numpy as np

from .core import Assignment, Instance, cost
from .errors import (
    DegenerateInstanceError,
    DegenerateNeighborError,
    InvalidParameterError,
    ResourceLimitError,
)

Number = Fraction | float

MODES = ("exact", "float")


# ---------------------------------------------------------------------------
# Result containers


@dataclass(frozen=True)
class SelfEnergyTable:
    """Walk-sum kernels and their analytic derivatives at the anchor energy."""

    sigma2: Number
    sigma2_d1: Number
    sigma2_d2: Number
    sigma4: Number
    sigma4_d1: Number
    sigma6: Number
    mode: str


@dataclass(frozen=True)
class CorrectionSeries:
    """Even-order eigenvalue corrections for one assignment (odd orders vanish)."""

    e0: int
    e2: Number
    e4: Number | None = None
    e6: Number | None = None
    mode: str = "exact"

    def evaluate(self, lam: float) -> float:
        """Truncated energy at hopping strength lam, through available orders."""
        total = float(self.e0) + lam**2 * float(self.e2)
        if self.e4 is not None:
            total += lam**4 * float(self.e4)
        if self.e6 is not None:
            total += lam**6 * float(self.e6)
        return total


@dataclass(frozen=True)
class FlipVector:
    """Half-flip counts per bit for one amplitude A(P); order q = 2 sum(p)."""

    p: Mapping[int, int]  # 1-based bit -> half flip count, entries > 0

    @property
    def support(self) -> frozenset[int]:
        return frozenset(bit for bit, count in self.p.items() if count > 0)

    @property
    def order(self) -> int:
        return 2 * sum(self.p.values())


@dataclass(frozen=True)
class SplittingResult:
    """Order-4 and order-6 corrections to the energy splitting of two solutions."""

    e12_4: Number
    e12_6: Number
    hamming_n: int
    mode: str


@dataclass(frozen=True)
class ThresholdEstimate:
    """Bit counts above which the predicted crossing sits inside the trusted range."""

    n_full_shift: float  # energy shift 4 per added clause
    n_unit_shift: float  # energy shift 1


# ---------------------------------------------------------------------------
# Walk tables: multiset permutations of bit flips, aggregated into monomials
# over the visited subset-states.  Computed once per support shape.


def _walk_table(flip_counts: tuple[int, ...]) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Aggregate closed walks avoiding the anchor into state-exponent monomials.

    ``flip_counts[i]`` is how many times support bit i is flipped.  Each valid
    ordering visits q-1 interior states (nonzero subsets of the support); the
    table maps exponent vectors over the 2**s - 1 states to multiplicities.
    """
    seq: list[int] = []
    for i, c in enumerate(flip_counts):
        seq.extend([i] * c)
    n_states = (1 << len(flip_counts)) - 1
    agg: dict[tuple[int, ...], int] = {}
    for perm in set(itertools.permutations(seq)):
        state = 0
        expo = [0] * n_states
        ok = True
        for step in perm[:-1]:
            state ^= 1 << step
            if state == 0:
                ok = False
                break
            expo[state - 1] += 1
        if not ok:
            continue
        key = tuple(expo)
        agg[key] = agg.get(key, 0) + 1
    return tuple((mult, key) for key, mult in sorted(agg.items()))


_W4_PAIR = _walk_table((2, 2))
_W6_PAIR21 = _walk_table((4, 2))  # first support bit flipped 4 times
_W6_TRIPLE = _walk_table((2, 2, 2))


def _eval_table(table, g: Sequence[Number]) -> Number:
    total: Number = 0
    for mult, expo in table:
        term: Number = mult
        for st, e in enumerate(expo):
            for _ in range(e):
                term = term * g[st]
        total = total + term
    return total


def _eval_table_d1(table, g: Sequence[Number]) -> Number:
    """d/dE of a walk table: each state factor g = 1/(E - E_state)."""
    total: Number = 0
    for mult, expo in table:
        term: Number = mult
        slope: Number = 0
        for st, e in enumerate(expo):
            for _ in range(e):
                term = term * g[st]
            if e:
                slope = slope + e * g[st]
        total = total - term * slope
    return total


# ---------------------------------------------------------------------------
# Per-instance workspace


class _Workspace:
    """0-based coupling arrays shared by all corrections on one instance."""

    def __init__(self, instance: Instance):
        n = instance.n_bits
        self.instance = instance
        self.n = n
        self.clauses = [tuple(a - 1 for a in c) for c in instance.clauses]
        self.bit_clauses: list[list[int]] = [[] for _ in range(n)]
        for ci, c in enumerate(self.clauses):
            for a in c:
                self.bit_clauses[a].append(ci)
        self.b = np.zeros(n, dtype=np.int64)
        jw: dict[tuple[int, int], int] = {}
        for i, j, k in self.clauses:
            self.b[i] += 1
            self.b[j] += 1
            self.b[k] += 1
            for p, q in ((i, j), (i, k), (j, k)):
                key = (p, q) if p < q else (q, p)
                jw[key] = jw.get(key, 0) + 1
        self.jw = jw
        self.neighbors: list[list[int]] = [[] for _ in range(n)]
        for (p, q), w in jw.items():
            self.neighbors[p].append(q)
            self.neighbors[q].append(p)
        for lst in self.neighbors:
            lst.sort()
        if jw:
            pi, pj = zip(*sorted(jw))
            self.pair_i = np.array(pi, dtype=np.int64)
            self.pair_j = np.array(pj, dtype=np.int64)
            self.pair_w = np.array([jw[p] for p in sorted(jw)], dtype=np.int64)
        else:
            self.pair_i = np.zeros(0, dtype=np.int64)
            self.pair_j = np.zeros(0, dtype=np.int64)
            self.pair_w = np.zeros(0, dtype=np.int64)
        self._triples: tuple[tuple[int, int, int], ...] | None = None

    def connected_triples(self) -> tuple[tuple[int, int, int], ...]:
        """All 3-subsets whose induced coupling graph is connected."""
        if self._triples is None:
            seen: set[tuple[int, int, int]] = set()
            for (p, q) in self.jw:
                for base in (p, q):
                    for r in self.neighbors[base]:
                        if r != p and r != q:
                            seen.add(tuple(sorted((p, q, r))))
            self._triples = tuple(sorted(seen))
        return self._triples


@lru_cache(maxsize=64)
def _workspace(instance: Instance) -> _Workspace:
    return _Workspace(instance)


# ---------------------------------------------------------------------------
# Assignment view: clause sums and flipped-subset energies


class _View:
    """One anchor assignment: clause sums, energy, memoized flip energies."""

    def __init__(self, ws: _Workspace, bits: Sequence[int]):
        self.ws = ws
        self.bits = tuple(int(v) for v in bits)
        self.sums = [0] * len(ws.clauses)
        for ci, (i, j, k) in enumerate(ws.clauses):
            self.sums[ci] = self.bits[i] + self.bits[j] + self.bits[k]
        self.e0 = sum((s - 1) * (s - 1) for s in self.sums)
        self._energy_memo: dict[frozenset[int], int] = {}

    def subset_energy(self, subset: frozenset[int]) -> int:
        """Energy of the anchor with `subset` (0-based bits) flipped."""
        memo = self._energy_memo
        if subset in memo:
            return memo[subset]
        affected: set[int] = set()
        for a in subset:
            affected.update(self.ws.bit_clauses[a])
        delta = 0
        for ci in affected:
            s = self.sums[ci]
            s_new = s
            for a in self.ws.clauses[ci]:
                if a in subset:
                    s_new += 1 - 2 * self.bits[a]
            delta += (s_new - 1) ** 2 - (s - 1) ** 2
        energy = self.e0 + delta
        memo[subset] = energy
        return energy

    def denom(self, subset: frozenset[int]) -> int:
        """E_anchor - E_flipped; zero means a degenerate neighbor."""
        d = self.e0 - self.subset_energy(subset)
        if d == 0:
            flips = tuple(sorted(a + 1 for a in subset))
            raise DegenerateNeighborError(
                f"state at flip set {flips} is degenerate with the anchor", flips
            )
        return d


def _inv(d: int, mode: str) -> Number:
    if mode == "exact":
        return Fraction(1, int(d))
    return 1.0 / d


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")


def _as_bits(assignment: Assignment | str | Sequence[int], n_bits: int) -> tuple[int, ...]:
    if isinstance(assignment, Assignment):
        text = assignment.bits
    elif isinstance(assignment, str):
        text = assignment
    else:
        vals = tuple(int(v) for v in assignment)
        if len(vals) != n_bits:
            raise InvalidParameterError("assignment length mismatch")
        return vals
    if len(text) != n_bits:
        raise InvalidParameterError(
            f"assignment length {len(text)} != n_bits {n_bits}"
        )
    return tuple(1 if ch == "1" else 0 for ch in text)


# ---------------------------------------------------------------------------
# Scalar amplitudes per flip vector


class _Scalars:
    """Memoized per-bit and per-pair walk factors for one anchor and mode."""

    def __init__(self, view: _View, mode: str):
        self.view = view
        self.mode = mode
        self._g: dict[frozenset[int], Number] = {}

    def g(self, subset: frozenset[int]) -> Number:
        val = self._g.get(subset)
        if val is None:
            val = _inv(self.view.denom(subset), self.mode)
            self._g[subset] = val
        return val

    def sigma(self, a: int) -> tuple[Number, Number, Number]:
        g = self.g(frozenset((a,)))
        g2 = g * g
        return g, -g2, 2 * g2 * g

    def pair_t(self, a: int, b: int) -> tuple[Number, Number]:
        """4-walk sum for support {a, b} and its energy derivative."""
        ga = self.g(frozenset((a,)))
        gb = self.g(frozenset((b,)))
        gab = self.g(frozenset((a, b)))
        gs = (ga, gb, gab)
        return _eval_table(_W4_PAIR, gs), _eval_table_d1(_W4_PAIR, gs)


def _amp_single(sc: _Scalars, a: int, p: int) -> Number:
    s, d1, d2 = sc.sigma(a)
    if p == 1:
        return s
    if p == 2:
        return s * d1
    if p == 3:
        # 6-walks on one bit always revisit the anchor, so only the
        # derivative combinations survive.
        return s * d1 * d1 + s * s * d2 / 2
    raise InvalidParameterError(f"unsupported flip count {p} for one bit")


def _amp_pair11(sc: _Scalars, a: int, b: int) -> Number:
    sa, da, _ = sc.sigma(a)
    sb, db, _ = sc.sigma(b)
    t, _ = sc.pair_t(a, b)
    return sa * db + sb * da + t


def _amp_pair21(sc: _Scalars, a: int, b: int) -> Number:
    """Amplitude for bit `a` flipped four times, bit `b` twice."""
    sa, da, dda = sc.sigma(a)
    sb, db, ddb = sc.sigma(b)
    t, tp = sc.pair_t(a, b)
    walk = _eval_table(
        _W6_PAIR21,
        (sc.g(frozenset((a,))), sc.g(frozenset((b,))), sc.g(frozenset((a, b)))),
    )
    return (
        2 * sa * da * db
        + sb * da * da
        + sa * sa * ddb / 2
        + sa * sb * dda
        + da * t
        + sa * tp
        + walk
    )


def _amp_triple(sc: _Scalars, a: int, b: int, c: int) -> Number:
    sa, da, dda = sc.sigma(a)
    sb, db, ddb = sc.sigma(b)
    sc_, dc, ddc = sc.sigma(c)
    t_ab, tp_ab = sc.pair_t(a, b)
    t_bc, tp_bc = sc.pair_t(b, c)
    t_ac, tp_ac = sc.pair_t(a, c)
    g = (
        sc.g(frozenset((a,))),
        sc.g(frozenset((b,))),
        sc.g(frozenset((c,))),
        sc.g(frozenset((a, b))),
        sc.g(frozenset((a, c))),
        sc.g(frozenset((b, c))),
        sc.g(frozenset((a, b, c))),
    )
    # State order must match _walk_table: bit0=a, bit1=b, bit2=c, states
    # indexed by subset bitmask - 1: a, b, ab, c, ac, bc, abc.
    g_ordered = (g[0], g[1], g[3], g[2], g[4], g[5], g[6])
    walk = _eval_table(_W6_TRIPLE, g_ordered)
    return (
        2 * (sa * db * dc + sb * da * dc + sc_ * da * db)
        + (sa * sb * ddc + sb * sc_ * dda + sa * sc_ * ddb)
        + (dc * t_ab + da * t_bc + db * t_ac)
        + (sc_ * tp_ab + sa * tp_bc + sb * tp_ac)
        + walk
    )


def flip_amplitude(
    instance: Instance,
    assignment: Assignment | str | Sequence[int],
    flips: Mapping[int, int] | FlipVector,
    mode: str = "exact",
) -> Number:
    """Amplitude A(P) for one flip vector (1-based bit -> half flip count).

    Supports every shape arising through sixth order.  Disconnected supports
    are legal inputs; their amplitudes cancel to zero exactly.
    """
    _check_mode(mode)
    ws = _workspace(instance)
    if isinstance(flips, FlipVector):
        flips = flips.p
    parts = {bit - 1: p for bit, p in flips.items() if p}
    if not parts:
        raise InvalidParameterError("flip vector is empty")
    for bit in parts:
        if not 0 <= bit < ws.n:
            raise InvalidParameterError(f"flip bit {bit + 1} out of range")
    q = 2 * sum(parts.values())
    if q > 6:
        raise InvalidParameterError("flip vectors beyond sixth order not supported")
    view = _View(ws, _as_bits(assignment, ws.n))
    sc = _Scalars(view, mode)
    items = sorted(parts.items())
    if len(items) == 1:
        (a, p), = items
        return _amp_single(sc, a, p)
    if len(items) == 2:
        (a, pa), (b, pb) = items
        if (pa, pb) == (1, 1):
            return _amp_pair11(sc, a, b)
        if (pa, pb) == (2, 1):
            return _amp_pair21(sc, a, b)
        if (pa, pb) == (1, 2):
            return _amp_pair21(sc, b, a)
        raise InvalidParameterError(f"unsupported pair flip counts {(pa, pb)}")
    if len(items) == 3 and all(p == 1 for _, p in items):
        (a, _), (b, _), (c, _) = items
        return _amp_triple(sc, a, b, c)
    raise InvalidParameterError(f"unsupported flip vector {flips}")


# ---------------------------------------------------------------------------
# Generic order-q corrections


def order_q_generic(
    instance: Instance,
    assignment: Assignment | str | Sequence[int],
    q: int,
    mode: str = "exact",
    prune: bool = True,
) -> Number:
    """Order-q eigenvalue correction by enumeration over flip vectors.

    With ``prune`` set (the default) only connected supports are visited;
    disconnected amplitudes vanish identically, so both settings agree.  Odd
    orders have no admissible flip vectors and return exactly zero.
    """
    _check_mode(mode)
    if q < 1 or q > 6:
        raise InvalidParameterError("supported orders are 1..6")
    if q % 2 == 1:
        return Fraction(0) if mode == "exact" else 0.0
    ws = _workspace(instance)
    bits = _as_bits(assignment, ws.n)

    if mode == "float" and prune and cost(instance, bits) == 0:
        if q == 2:
            return _order2_solution_fast(ws)
        if q == 4:
            return _order4_solution_fast(ws, bits)
        return _order6_solution_fast(ws, bits)

    view = _View(ws, bits)
    sc = _Scalars(view, mode)
    total: Number = Fraction(0) if mode == "exact" else 0.0
    n = ws.n
    if q == 2:
        for a in range(n):
            total = total + _amp_single(sc, a, 1)
        return total
    if q == 4:
        for a in range(n):
            total = total + _amp_single(sc, a, 2)
        for a, b in _pair_supports(ws, prune):
            total = total + _amp_pair11(sc, a, b)
        return total
    for a in range(n):
        total = total + _amp_single(sc, a, 3)
    for a, b in _pair_supports(ws, prune):
        total = total + _amp_pair21(sc, a, b) + _amp_pair21(sc, b, a)
    for a, b, c in _triple_supports(ws, prune):
        total = total + _amp_triple(sc, a, b, c)
    return total


def _pair_supports(ws: _Workspace, prune: bool):
    if prune:
        return sorted(ws.jw)
    return itertools.combinations(range(ws.n), 2)


def _triple_supports(ws: _Workspace, prune: bool):
    if prune:
        return ws.connected_triples()
    return itertools.combinations(range(ws.n), 3)


# ---------------------------------------------------------------------------
# Closed forms for solutions


def _require_solution(instance: Instance, bits: tuple[int, ...]) -> None:
    if cost(instance, bits) != 0:
        raise InvalidParameterError("assignment is not a solution (cost > 0)")


def order2_solution(
    instance: Instance,
    solution: Assignment | str | Sequence[int],
    mode: str = "exact",
) -> Number:
    """Second-order correction for a solution: minus the sum of 1/B_i."""
    _check_mode(mode)
    ws = _workspace(instance)
    bits = _as_bits(solution, ws.n)
    _require_solution(instance, bits)
    if ws.n and int(ws.b.min()) == 0:
        raise DegenerateInstanceError(
            "bit with no clauses; clean the instance before expanding"
        )
    if mode == "float":
        return _order2_solution_fast(ws)
    total = Fraction(0)
    for bi in ws.b:
        total -= Fraction(1, int(bi))
    return total


def _check_isolated_bits(ws: _Workspace) -> None:
    if ws.n and int(ws.b.min()) == 0:
        bit = int(np.argmin(ws.b)) + 1
        raise DegenerateNeighborError(
            f"bit {bit} appears in no clause; flipping it costs nothing", (bit,)
        )


def _order2_solution_fast(ws: _Workspace) -> float:
    _check_isolated_bits(ws)
    return float(-(1.0 / ws.b).sum())


def _solution_pair_energies(ws: _Workspace, bits: Sequence[int]) -> np.ndarray:
    """Energies after flipping each coupled pair of a solution.

    A clause containing both flipped bits stays satisfied when the bits
    disagree and is doubly violated when both are 0, which gives
    E = B_i + B_j - 2 J_ij + 4 J_ij [x_i == x_j].
    """
    xi = np.fromiter((bits[int(a)] for a in ws.pair_i), dtype=np.int64, count=len(ws.pair_i))
    xj = np.fromiter((bits[int(a)] for a in ws.pair_j), dtype=np.int64, count=len(ws.pair_j))
    eq = (xi == xj).astype(np.int64)
    return ws.b[ws.pair_i] + ws.b[ws.pair_j] + ws.pair_w * (4 * eq - 2)


def _raise_if_degenerate_pairs(ws: _Workspace, epair: np.ndarray) -> None:
    bad = np.nonzero(epair == 0)[0]
    if bad.size:
        k = int(bad[0])
        flips = (int(ws.pair_i[k]) + 1, int(ws.pair_j[k]) + 1)
        raise DegenerateNeighborError(
            f"another solution sits at flip set {flips}", flips
        )


def order4_solution(
    instance: Instance,
    solution: Assignment | str | Sequence[int],
    mode: str = "exact",
) -> Number:
    """Fourth-order correction for a solution.

    Only coupled pairs contribute beyond the single-bit terms: uncoupled
    pairs have additive flip energies and cancel exactly.
    """
    _check_mode(mode)
    ws = _workspace(instance)
    bits = _as_bits(solution, ws.n)
    _require_solution(instance, bits)
    if ws.n and int(ws.b.min()) == 0:
        raise DegenerateInstanceError(
            "bit with no clauses; clean the instance before expanding"
        )
    if mode == "float":
        return _order4_solution_fast(ws, bits)
    total = Fraction(0)
    for bi in ws.b:
        total += Fraction(1, int(bi) ** 3)
    for (p, q), _w in sorted(ws.jw.items()):
        bi, bj = int(ws.b[p]), int(ws.b[q])
        e_pq = _solution_pair_energy(ws, bits, p, q)
        if e_pq == 0:
            flips = (p + 1, q + 1)
            raise DegenerateNeighborError(
                f"another solution sits at flip set {flips}", flips
            )
        w2 = (Fraction(1, bi) + Fraction(1, bj)) ** 2
        total += w2 * (Fraction(1, bi + bj) - Fraction(1, e_pq))
    return total


def _solution_pair_energy(ws: _Workspace, bits: Sequence[int], p: int, q: int) -> int:
    w = ws.jw.get((p, q) if p < q else (q, p), 0)
    eq = 1 if bits[p] == bits[q] else 0
    return int(ws.b[p]) + int(ws.b[q]) + w * (4 * eq - 2)


def _order4_solution_fast(ws: _Workspace, bits: Sequence[int]) -> float:
    _check_isolated_bits(ws)
    b = ws.b.astype(np.float64)
    total = float((1.0 / b**3).sum())
    if len(ws.pair_i) == 0:
        return total
    epair = _solution_pair_energies(ws, bits)
    _raise_if_degenerate_pairs(ws, epair)
    bi = b[ws.pair_i]
    bj = b[ws.pair_j]
    w2 = (1.0 / bi + 1.0 / bj) ** 2
    total += float((w2 * (1.0 / (bi + bj) - 1.0 / epair)).sum())
    return total


def order4_solutions_batch(instance: Instance, solutions: Sequence) -> np.ndarray:
    """Fourth-order corrections for many solutions at once (float mode).

    Row-vectorized over the coupled pairs; used by the experiment harness
    where instances near the threshold can carry 10^4..10^5 solutions.
    """
    ws = _workspace(instance)
    _check_isolated_bits(ws)
    count = len(solutions)
    out = np.empty(count, dtype=np.float64)
    b = ws.b.astype(np.float64)
    base = float((1.0 / b**3).sum())
    if len(ws.pair_i) == 0:
        out.fill(base)
        return out
    bi = b[ws.pair_i]
    bj = b[ws.pair_j]
    w2 = (1.0 / bi + 1.0 / bj) ** 2
    # Same expression tree as the single-solution path so that ties and
    # near-ties resolve identically whichever path evaluated them.
    inv_pair_sum = 1.0 / (bi + bj)
    e_base = ws.b[ws.pair_i] + ws.b[ws.pair_j] - 2 * ws.pair_w
    chunk = max(1, (1 << 22) // max(len(ws.pair_i), 1))
    for start in range(0, count, chunk):
        block = solutions[start : start + chunk]
        mat = np.frombuffer(
            "".join(
                s.bits if isinstance(s, Assignment) else str(s) for s in block
            ).encode("ascii"),
            dtype=np.uint8,
        ).reshape(len(block), ws.n) - ord("0")
        xi = mat[:, ws.pair_i]
        xj = mat[:, ws.pair_j]
        epair = e_base + 4 * ws.pair_w * (xi == xj)
        if np.any(epair == 0):
            row, col = np.argwhere(epair == 0)[0]
            flips = (int(ws.pair_i[col]) + 1, int(ws.pair_j[col]) + 1)
            raise DegenerateNeighborError(
                f"another solution sits at flip set {flips}", flips
            )
        terms = np.ascontiguousarray(w2 * (inv_pair_sum - 1.0 / epair))
        # Row-wise 1-D sums reduce in the same order as the scalar path, so
        # both paths agree to the last bit (argmin ties included).
        for k in range(len(block)):
            out[start + k] = base + float(terms[k].sum())
    return out


def _order6_solution_fast(ws: _Workspace, bits: Sequence[int]) -> float:
    """Vectorized order-6 assembly for a solution (float mode, pruned)."""
    _check_isolated_bits(ws)
    b = ws.b.astype(np.float64)
    total = float((-2.0 / b**5).sum())

    if len(ws.pair_i):
        epair = _solution_pair_energies(ws, bits)
        _raise_if_degenerate_pairs(ws, epair)
        sa = -1.0 / b[ws.pair_i]
        sb = -1.0 / b[ws.pair_j]
        da = -sa * sa
        db = -sb * sb
        dda = 2.0 * sa * sa * sa
        ddb = 2.0 * sb * sb * sb
        u = -1.0 / epair
        up = -u * u
        ssum = sa + sb
        t = u * ssum * ssum
        tp = up * ssum * ssum + 2.0 * u * ssum * (da + db)
        total += float(
            (
                2.0 * sa * da * db
                + sb * da * da
                + 0.5 * sa * sa * ddb
                + sa * sb * dda
                + da * t
                + sa * tp
                + _np_table(_W6_PAIR21, (sa, sb, u))
                + 2.0 * sb * db * da
                + sa * db * db
                + 0.5 * sb * sb * dda
                + sb * sa * ddb
                + db * t
                + sb * tp
                + _np_table(_W6_PAIR21, (sb, sa, u))
            ).sum()
        )

    triples = ws.connected_triples()
    if triples:
        ta = np.array([t[0] for t in triples], dtype=np.int64)
        tb = np.array([t[1] for t in triples], dtype=np.int64)
        tc = np.array([t[2] for t in triples], dtype=np.int64)
        xs = np.fromiter((int(v) for v in bits), dtype=np.int64, count=ws.n)
        e_ab = _pair_energy_arrays(ws, xs, ta, tb)
        e_ac = _pair_energy_arrays(ws, xs, ta, tc)
        e_bc = _pair_energy_arrays(ws, xs, tb, tc)
        e_abc = (
            ws.b[ta]
            + ws.b[tb]
            + ws.b[tc]
            + (e_ab - ws.b[ta] - ws.b[tb])
            + (e_ac - ws.b[ta] - ws.b[tc])
            + (e_bc - ws.b[tb] - ws.b[tc])
        )
        for arr, pick in ((e_ab, (ta, tb)), (e_ac, (ta, tc)), (e_bc, (tb, tc)), (e_abc, None)):
            bad = np.nonzero(arr == 0)[0]
            if bad.size:
                k = int(bad[0])
                if pick is None:
                    flips = (int(ta[k]) + 1, int(tb[k]) + 1, int(tc[k]) + 1)
                else:
                    flips = (int(pick[0][k]) + 1, int(pick[1][k]) + 1)
                raise DegenerateNeighborError(
                    f"zero denominator at flip set {flips}", flips
                )
        sa = -1.0 / b[ta]
        sb = -1.0 / b[tb]
        sc_ = -1.0 / b[tc]
        da, db, dc = -sa * sa, -sb * sb, -sc_ * sc_
        dda, ddb, ddc = 2 * sa**3, 2 * sb**3, 2 * sc_**3
        u_ab, u_ac, u_bc = -1.0 / e_ab, -1.0 / e_ac, -1.0 / e_bc
        g_abc = -1.0 / e_abc

        def t_and_tp(sx, sy, dx, dy, u):
            ssum = sx + sy
            t = u * ssum * ssum
            tp = (-u * u) * ssum * ssum + 2.0 * u * ssum * (dx + dy)
            return t, tp

        t_ab, tp_ab = t_and_tp(sa, sb, da, db, u_ab)
        t_bc, tp_bc = t_and_tp(sb, sc_, db, dc, u_bc)
        t_ac, tp_ac = t_and_tp(sa, sc_, da, dc, u_ac)
        walk = _np_table(_W6_TRIPLE, (sa, sb, u_ab, sc_, u_ac, u_bc, g_abc))
        total += float(
            (
                2.0 * (sa * db * dc + sb * da * dc + sc_ * da * db)
                + (sa * sb * ddc + sb * sc_ * dda + sa * sc_ * ddb)
                + (dc * t_ab + da * t_bc + db * t_ac)
                + (sc_ * tp_ab + sa * tp_bc + sb * tp_ac)
                + walk
            ).sum()
        )
    return total


def _pair_energy_arrays(ws: _Workspace, xs: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    w = np.array(
        [ws.jw.get((int(p), int(q)) if p < q else (int(q), int(p)), 0) for p, q in zip(pa, pb)],
        dtype=np.int64,
    )
    eq = (xs[pa] == xs[pb]).astype(np.int64)
    return ws.b[pa] + ws.b[pb] + w * (4 * eq - 2)


def _np_table(table, g: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros_like(g[0])
    for mult, expo in table:
        term = np.full_like(g[0], float(mult))
        for st, e in enumerate(expo):
            if e:
                term = term * g[st] ** e
        total += term
    return total


# ---------------------------------------------------------------------------
# Self-energy table and correction series


def self_energy_table(
    instance: Instance,
    assignment: Assignment | str | Sequence[int],
    mode: str = "exact",
) -> SelfEnergyTable:
    """All walk-sum kernels through order 6, with analytic derivatives.

    Sums run over every pair and triple (no connectivity pruning), so this is
    O(N^3) and intended for small instances and tests.
    """
    _check_mode(mode)
    ws = _workspace(instance)
    if ws.n > 32:
        raise ResourceLimitError("self_energy_table enumerates all triples; n_bits <= 32")
    view = _View(ws, _as_bits(assignment, ws.n))
    sc = _Scalars(view, mode)
    zero: Number = Fraction(0) if mode == "exact" else 0.0
    s2 = s2d = s2dd = s4 = s4d = s6 = zero
    for a in range(ws.n):
        s, d1, d2 = sc.sigma(a)
        s2 = s2 + s
        s2d = s2d + d1
        s2dd = s2dd + d2
    for a, b in itertools.combinations(range(ws.n), 2):
        t, tp = sc.pair_t(a, b)
        s4 = s4 + t
        s4d = s4d + tp
        for first, second in ((a, b), (b, a)):
            g = (
                sc.g(frozenset((first,))),
                sc.g(frozenset((second,))),
                sc.g(frozenset((a, b))),
            )
            s6 = s6 + _eval_table(_W6_PAIR21, g)
    for a, b, c in itertools.combinations(range(ws.n), 3):
        g_ordered = (
            sc.g(frozenset((a,))),
            sc.g(frozenset((b,))),
            sc.g(frozenset((a, b))),
            sc.g(frozenset((c,))),
            sc.g(frozenset((a, c))),
            sc.g(frozenset((b, c))),
            sc.g(frozenset((a, b, c))),
        )
        s6 = s6 + _eval_table(_W6_TRIPLE, g_ordered)
    return SelfEnergyTable(
        sigma2=s2, sigma2_d1=s2d, sigma2_d2=s2dd, sigma4=s4, sigma4_d1=s4d,
        sigma6=s6, mode=mode,
    )


def correction_series(
    instance: Instance,
    assignment: Assignment | str | Sequence[int],
    through: int = 6,
    mode: str = "exact",
) -> CorrectionSeries:
    """Corrections e0, e2[, e4[, e6]] for one assignment's eigenvalue."""
    if through not in (2, 4, 6):
        raise InvalidParameterError("through must be 2, 4 or 6")
    ws = _workspace(instance)
    bits = _as_bits(assignment, ws.n)
    e0 = cost(instance, bits)
    e2 = order_q_generic(instance, bits, 2, mode=mode)
    e4 = order_q_generic(instance, bits, 4, mode=mode) if through >= 4 else None
    e6 = order_q_generic(instance, bits, 6, mode=mode) if through >= 6 else None
    return CorrectionSeries(e0=e0, e2=e2, e4=e4, e6=e6, mode=mode)


# ---------------------------------------------------------------------------
# Splittings between two solutions


def splitting(
    instance: Instance,
    sol_a: Assignment | str | Sequence[int],
    sol_b: Assignment | str | Sequence[int],
    mode: str = "exact",
) -> SplittingResult:
    """Order-4 and order-6 splitting corrections between two solutions.

    The single-bit terms are identical for every solution (the second order
    drops out entirely), so the order-4 splitting reduces to the coupled-pair
    difference; the order-6 splitting is the difference of the full
    corrections.
    """
    _check_mode(mode)
    ws = _workspace(instance)
    bits_a = _as_bits(sol_a, ws.n)
    bits_b = _as_bits(sol_b, ws.n)
    _require_solution(instance, bits_a)
    _require_solution(instance, bits_b)
    if ws.n and int(ws.b.min()) == 0:
        raise DegenerateInstanceError(
            "bit with no clauses; clean the instance before expanding"
        )
    n_ham = sum(1 for x, y in zip(bits_a, bits_b) if x != y)

    if mode == "float":
        if len(ws.pair_i):
            ea = _solution_pair_energies(ws, bits_a)
            eb = _solution_pair_energies(ws, bits_b)
            _raise_if_degenerate_pairs(ws, ea)
            _raise_if_degenerate_pairs(ws, eb)
            b = ws.b.astype(np.float64)
            w2 = (1.0 / b[ws.pair_i] + 1.0 / b[ws.pair_j]) ** 2
            e12_4: Number = float((w2 * (1.0 / eb - 1.0 / ea)).sum())
        else:
            e12_4 = 0.0
    else:
        e12_4 = Fraction(0)
        for (p, q), _w in sorted(ws.jw.items()):
            bi, bj = int(ws.b[p]), int(ws.b[q])
            epq_a = _solution_pair_energy(ws, bits_a, p, q)
            epq_b = _solution_pair_energy(ws, bits_b, p, q)
            for e_pq in (epq_a, epq_b):
                if e_pq == 0:
                    flips = (p + 1, q + 1)
                    raise DegenerateNeighborError(
                        f"another solution sits at flip set {flips}", flips
                    )
            w2 = (Fraction(1, bi) + Fraction(1, bj)) ** 2
            e12_4 += w2 * (Fraction(1, epq_b) - Fraction(1, epq_a))

    e6_a = order_q_generic(instance, bits_a, 6, mode=mode)
    e6_b = order_q_generic(instance, bits_b, 6, mode=mode)
    return SplittingResult(
        e12_4=e12_4, e12_6=e6_a - e6_b, hamming_n=n_ham, mode=mode
    )


# ---------------------------------------------------------------------------
# Crossing prediction and scaling constants


def crossing_lambda(
    series_a: CorrectionSeries,
    series_b: CorrectionSeries,
    lambda_max: float,
    tol: float = 1e-10,
    grid_points: int = 4096,
) -> float | None:
    """Smallest lambda in (0, lambda_max] where the truncated curves meet.

    Bracketing by sign change on a uniform grid, then bisection to ``tol``.
    Returns None when the curves never change order.
    """
    if lambda_max <= 0:
        raise InvalidParameterError("lambda_max must be positive")

    def diff(lam: float) -> float:
        return series_a.evaluate(lam) - series_b.evaluate(lam)

    lams = np.linspace(0.0, lambda_max, grid_points + 1)
    last_sign = 0
    last_lam = 0.0
    first = diff(0.0)
    if first != 0.0:
        last_sign = 1 if first > 0.0 else -1
    for lam in lams[1:]:
        cur = diff(float(lam))
        if cur == 0.0:
            continue
        sign = 1 if cur > 0.0 else -1
        if last_sign != 0 and sign != last_sign:
            lo, hi = last_lam, float(lam)
            flo = diff(lo)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fmid = diff(mid)
                if fmid == 0.0:
                    return mid
                if (flo < 0.0) != (fmid < 0.0):
                    hi = mid
                else:
                    lo, flo = mid, fmid
            return 0.5 * (lo + hi)
        last_sign = sign
        last_lam = float(lam)
    return None


def lambda_c(c4_statistic: float, n_bits: float) -> float:
    """Coupling strength above which the splitting exceeds one clause's shift."""
    if c4_statistic <= 0 or n_bits <= 0:
        raise InvalidParameterError("lambda_c needs positive arguments")
    return sqrt(2.0) * (c4_statistic * n_bits) ** (-1.0 / 8.0)


def lambda_r(c4: float, c6: float) -> float:
    """Coupling strength where the order-6 splitting term overtakes order 4."""
    if c4 <= 0 or c6 <= 0:
        raise InvalidParameterError("lambda_r needs positive arguments")
    return (c4 / c6) ** 0.25


def threshold_n(c4: float, lambda_r_value: float) -> ThresholdEstimate:
    """Bit counts where the predicted crossing enters the trusted window.

    The larger figure requires the splitting to beat the worst-case energy
    shift of one added clause (4); the smaller only a unit shift.
    """
    if c4 <= 0 or lambda_r_value <= 0:
        raise InvalidParameterError("threshold_n needs positive arguments")
    base = 1.0 / (c4 * lambda_r_value**8)
    return ThresholdEstimate(n_full_shift=16.0 * base, n_unit_shift=base)
