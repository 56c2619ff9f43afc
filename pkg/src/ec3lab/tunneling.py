"""Tunneling amplitudes between solution pairs via the pairwise-constraint reduction.

Two solutions of an EC3 instance disagree on n bits.  Restricting to those
bits, every clause containing exactly two of them becomes an inequality
constraint between the pair, and the resulting graph is bipartite; negating
one partition turns it into an equality ("Agree") instance whose two
solutions are the all-0 and all-1 strings.  The leading tunneling amplitude
between them is lam**n times a permanent-like sum over bit orderings, which
collapses to a subset dynamic program because intermediate energies depend
only on the set of flipped bits (the cut size of the set).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import exp, factorial

from .core import Assignment, Instance, cost
from .errors import (
    DegeneratePathError,
    InternalInconsistencyError,
    InvalidParameterError,
    ParseError,
    ResourceLimitError,
)
from .rng import SplitMix64

Number = Fraction | float

DP_LIMIT = 24
BRUTEFORCE_LIMIT = 9


@dataclass(frozen=True)
class AgreeInstance:
    """Pairwise equality constraints: a multigraph on n bits."""

    n_bits: int
    edges: tuple[tuple[int, int], ...]  # 1-based, i < j, duplicates allowed

    def __post_init__(self):
        for i, j in self.edges:
            if not (1 <= i < j <= self.n_bits):
                raise InvalidParameterError(f"bad edge {(i, j)} for n={self.n_bits}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def beta(self) -> float:
        return self.m / self.n_bits

    def degrees(self) -> tuple[int, ...]:
        deg = [0] * self.n_bits
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return tuple(deg)

    def pair_multiplicity(self) -> dict[tuple[int, int], int]:
        mult: dict[tuple[int, int], int] = {}
        for e in self.edges:
            mult[e] = mult.get(e, 0) + 1
        return mult

    def is_connected(self) -> bool:
        if self.n_bits == 0:
            return False
        adj: list[set[int]] = [set() for _ in range(self.n_bits)]
        for i, j in self.edges:
            adj[i - 1].add(j - 1)
            adj[j - 1].add(i - 1)
        seen = {0}
        todo = [0]
        while todo:
            a = todo.pop()
            for b in adj[a]:
                if b not in seen:
                    seen.add(b)
                    todo.append(b)
        return len(seen) == self.n_bits


@dataclass(frozen=True)
class ReductionResult:
    """Agree instance for a solution pair plus the bit bookkeeping."""

    agree: AgreeInstance
    relevant_bits: tuple[int, ...]  # original 1-based bits where the pair differs
    flipped_partition: tuple[int, ...]  # agree bits negated to map all-0 onto sol_a


@dataclass(frozen=True)
class AmplitudeResult:
    """Leading tunneling coefficient: sum of inverse energy products."""

    coefficient: Number
    order: int
    mode: str

    def amplitude_at(self, lam: float) -> float:
        return float(lam**self.order * float(self.coefficient))


@dataclass(frozen=True)
class BarrierProfile:
    """Permutation-averaged energies after j flips, and the decay threshold."""

    mean_e: tuple[float, ...]  # j = 1 .. n-1
    lambda_a: float


@dataclass(frozen=True)
class TypicalityProfile:
    """Joint bit-type frequencies of two independent solutions and derived scales."""

    p00: float
    p01: float
    p10: float
    p11: float
    typ_n: float
    typ_m: float
    typ_beta: float
    lambda_a: float


@dataclass(frozen=True)
class GapEstimate:
    value: float
    suppressed: bool  # False when the crossing sits outside the decaying regime


def reduce_to_agree(
    instance: Instance,
    sol_a: Assignment | str,
    sol_b: Assignment | str,
) -> ReductionResult:
    """Reduce a solution pair to its pairwise-constraint instance.

    Relevant clauses contain exactly two differing bits (one or three
    differing bits cannot keep a clause satisfied in both solutions, so such
    a clause signals corrupted input); each becomes an edge between its two
    differing bits.  The inequality instance is converted to an equality one
    by negating, per connected component, the bits where sol_a reads 1.
    """
    bits_a = sol_a.bits if isinstance(sol_a, Assignment) else sol_a
    bits_b = sol_b.bits if isinstance(sol_b, Assignment) else sol_b
    if len(bits_a) != instance.n_bits or len(bits_b) != instance.n_bits:
        raise InvalidParameterError("solution length mismatch")
    if bits_a == bits_b:
        raise InvalidParameterError("need two distinct solutions")
    for bits in (bits_a, bits_b):
        if cost(instance, bits) != 0:
            raise InvalidParameterError(f"{bits} is not a solution")

    relevant = [i for i in range(1, instance.n_bits + 1) if bits_a[i - 1] != bits_b[i - 1]]
    new_index = {old: new for new, old in enumerate(relevant, start=1)}
    edges: list[tuple[int, int]] = []
    for clause in instance.clauses:
        inside = [a for a in clause if a in new_index]
        if len(inside) in (1, 3):
            raise InternalInconsistencyError(
                f"clause {clause} has {len(inside)} differing bits; "
                "inputs cannot both be solutions"
            )
        if len(inside) == 2:
            p, q = new_index[inside[0]], new_index[inside[1]]
            # Both restrictions must violate equality across this edge.
            if bits_a[inside[0] - 1] == bits_a[inside[1] - 1]:
                raise InternalInconsistencyError(
                    f"clause {clause} holds two equal differing bits"
                )
            edges.append((p, q) if p < q else (q, p))

    agree = AgreeInstance(n_bits=len(relevant), edges=tuple(sorted(edges)))
    flipped = tuple(
        new_index[i] for i in relevant if bits_a[i - 1] == "1"
    )
    return ReductionResult(
        agree=agree, relevant_bits=tuple(relevant), flipped_partition=flipped
    )


def _cut_energies(agree: AgreeInstance) -> list[int]:
    """Cut size (with multiplicity) of every bit subset, indexed by bitmask."""
    n = agree.n_bits
    deg = agree.degrees()
    nbr: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j), w in agree.pair_multiplicity().items():
        nbr[i - 1].append((j - 1, w))
        nbr[j - 1].append((i - 1, w))
    energies = [0] * (1 << n)
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << low)
        inner = 0
        for other, w in nbr[low]:
            if rest >> other & 1:
                inner += w
        energies[mask] = energies[rest] + deg[low] - 2 * inner
    return energies


def amplitude_dp(agree: AgreeInstance, mode: str = "exact") -> AmplitudeResult:
    """Sum of inverse-energy products over all bit orderings, by subset DP.

    The energy after flipping a set S is its cut size, so the ordering sum
    satisfies g(S) = sum_i g(S - {i}) / E(S) with g(empty) = 1; the full set
    (energy zero) is never a divisor.  A zero energy at a proper subset means
    the graph is disconnected.
    """
    n = agree.n_bits
    if n < 1:
        raise InvalidParameterError("empty instance has no tunneling order")
    if n > DP_LIMIT:
        raise ResourceLimitError(f"subset table needs n <= {DP_LIMIT}, got {n}")
    if mode not in ("exact", "float"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    energies = _cut_energies(agree)
    full = (1 << n) - 1
    one: Number = Fraction(1) if mode == "exact" else 1.0
    g: list[Number] = [0] * (1 << n)
    g[0] = one
    for mask in range(1, full):
        e = energies[mask]
        if e == 0:
            subset = tuple(i + 1 for i in range(n) if mask >> i & 1)
            raise DegeneratePathError(
                f"flip set {subset} costs nothing: instance is disconnected"
            )
        acc: Number = 0
        rem = mask
        while rem:
            low = rem & -rem
            acc = acc + g[mask ^ low]
            rem ^= low
        g[mask] = acc / e if mode == "float" else acc * Fraction(1, e)
    coeff: Number = 0
    if n == 1:
        coeff = one
    else:
        for i in range(n):
            coeff = coeff + g[full ^ (1 << i)]
    return AmplitudeResult(coefficient=coeff, order=n, mode=mode)


def amplitude_bruteforce(agree: AgreeInstance, mode: str = "exact") -> AmplitudeResult:
    """Oracle: literal sum over all n! flip orderings."""
    n = agree.n_bits
    if n > BRUTEFORCE_LIMIT:
        raise ResourceLimitError(f"brute force limited to n <= {BRUTEFORCE_LIMIT}")
    if n < 1:
        raise InvalidParameterError("empty instance has no tunneling order")
    deg = agree.degrees()
    nbr: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j), w in agree.pair_multiplicity().items():
        nbr[i - 1].append((j - 1, w))
        nbr[j - 1].append((i - 1, w))
    one: Number = Fraction(1) if mode == "exact" else 1.0
    total: Number = 0

    def rec(mask: int, depth: int, energy: int, product: Number):
        nonlocal total
        if depth == n - 1:
            total = total + product
            return
        for i in range(n):
            if mask >> i & 1:
                continue
            inner = sum(w for other, w in nbr[i] if mask >> other & 1)
            e_new = energy + deg[i] - 2 * inner
            if e_new == 0:
                subset = tuple(
                    k + 1 for k in range(n) if (mask | 1 << i) >> k & 1
                )
                raise DegeneratePathError(
                    f"flip set {subset} costs nothing: instance is disconnected"
                )
            step = (
                product / e_new
                if mode == "float"
                else product * Fraction(1, e_new)
            )
            rec(mask | 1 << i, depth + 1, e_new, step)

    if n == 1:
        total = one
    else:
        rec(0, 0, 0, one)
    return AmplitudeResult(coefficient=total, order=n, mode=mode)


def upper_bound(n: int, lam: float) -> float:
    """Tree-identity bound on the leading amplitude: (2 lam)^n / 2."""
    if n < 1 or lam < 0:
        raise InvalidParameterError("need n >= 1 and lam >= 0")
    return 0.5 * (2.0 * lam) ** n


def barrier_profile(agree: AgreeInstance) -> BarrierProfile:
    """Exact permutation averages of the energy after j flips.

    A uniformly random j-subset cuts each edge with probability
    2 j (n-j) / (n (n-1)), so the mean barrier is an exact parabola for any
    multigraph; the decay threshold is 2 beta / e.
    """
    n = agree.n_bits
    if n < 2:
        raise InvalidParameterError("barrier profile needs n >= 2")
    m = agree.m
    mean_e = tuple(
        2.0 * m * j * (n - j) / (n * (n - 1)) for j in range(1, n)
    )
    return BarrierProfile(mean_e=mean_e, lambda_a=2.0 * agree.beta / exp(1.0))


def sampled_barrier(
    agree: AgreeInstance, n_samples: int, seed: int
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Monte-Carlo permutation averages of E_j with standard errors."""
    n = agree.n_bits
    if n < 2:
        raise InvalidParameterError("barrier sampling needs n >= 2")
    deg = agree.degrees()
    nbr: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j), w in agree.pair_multiplicity().items():
        nbr[i - 1].append((j - 1, w))
        nbr[j - 1].append((i - 1, w))
    rng = SplitMix64(seed)
    sums = [0.0] * (n - 1)
    sq_sums = [0.0] * (n - 1)
    order = list(range(n))
    for _ in range(n_samples):
        # Fisher-Yates with the deterministic stream.
        for k in range(n - 1, 0, -1):
            r = rng.randbelow(k + 1)
            order[k], order[r] = order[r], order[k]
        mask = 0
        energy = 0
        for j in range(n - 1):
            i = order[j]
            inner = sum(w for other, w in nbr[i] if mask >> other & 1)
            energy += deg[i] - 2 * inner
            mask |= 1 << i
            sums[j] += energy
            sq_sums[j] += energy * energy
    means = tuple(s / n_samples for s in sums)
    stderrs = tuple(
        (max(sq / n_samples - mean * mean, 0.0) / n_samples) ** 0.5
        for sq, mean in zip(sq_sums, means)
    )
    return means, stderrs


def typicality(alpha: float, n_bits: float) -> TypicalityProfile:
    """Typical reduction scales for two independent solutions at ratio alpha.

    Solutions set roughly a third of present bits, independently of each
    other, which fixes the joint bit-type frequencies and hence the typical
    differing-bit count, relevant-clause count and equality-instance ratio.
    """
    if alpha <= 0 or n_bits <= 0:
        raise InvalidParameterError("typicality needs positive arguments")
    e3a = exp(3.0 * alpha)
    present = n_bits * (1.0 - 1.0 / e3a)
    typ_n = present * 4.0 / 9.0
    typ_m = 2.0 * alpha * n_bits / 3.0
    typ_beta = 1.5 * alpha * e3a / (e3a - 1.0)
    lam_a = 3.0 * alpha * exp(3.0 * alpha - 1.0) / (e3a - 1.0)
    return TypicalityProfile(
        p00=4.0 / 9.0,
        p01=2.0 / 9.0,
        p10=2.0 / 9.0,
        p11=1.0 / 9.0,
        typ_n=typ_n,
        typ_m=typ_m,
        typ_beta=typ_beta,
        lambda_a=lam_a,
    )


def gap_estimate(lambda_c: float, lambda_a: float, n: int) -> GapEstimate:
    """Crossing-gap scale (lambda_c / lambda_a)^n, flagged when not decaying."""
    if lambda_c <= 0 or lambda_a <= 0 or n <= 0:
        raise InvalidParameterError("gap_estimate needs positive arguments")
    ratio = lambda_c / lambda_a
    return GapEstimate(value=ratio**n, suppressed=ratio < 1.0)


def random_tree(n: int, seed: int) -> AgreeInstance:
    """Uniform random labeled tree (random attachment order)."""
    if n < 1:
        raise InvalidParameterError("need n >= 1")
    rng = SplitMix64(seed)
    edges = []
    for v in range(2, n + 1):
        u = rng.randbelow(v - 1) + 1
        edges.append((u, v))
    return AgreeInstance(n_bits=n, edges=tuple(sorted(edges)))


def random_connected_graph(n: int, extra_edges: int, seed: int) -> AgreeInstance:
    """Random tree plus extra uniform edges (duplicates allowed)."""
    rng = SplitMix64(seed)
    edges = []
    for v in range(2, n + 1):
        u = rng.randbelow(v - 1) + 1
        edges.append((u, v))
    for _ in range(extra_edges):
        while True:
            i = rng.randbelow(n) + 1
            j = rng.randbelow(n) + 1
            if i != j:
                break
        edges.append((min(i, j), max(i, j)))
    return AgreeInstance(n_bits=n, edges=tuple(sorted(edges)))


def write_agree(agree: AgreeInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(agree_to_text(agree))


def agree_to_text(agree: AgreeInstance) -> str:
    lines = [f"p agree {agree.n_bits} {agree.m}"]
    lines.extend(f"{i} {j}" for i, j in agree.edges)
    return "\n".join(lines) + "\n"


def read_agree(path) -> AgreeInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return agree_from_text(fh.read())


def agree_from_text(text: str) -> AgreeInstance:
    n = None
    m = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "agree":
                raise ParseError(f"expected 'p agree <n> <m>', got {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"non-integer header in {line!r}", lineno)
            continue
        if n is None:
            raise ParseError("edge line before header", lineno)
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two indices, got {line!r}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer index in {line!r}", lineno)
        if i == j or min(i, j) < 1 or max(i, j) > n:
            raise ParseError(f"bad edge {line!r}", lineno)
        edges.append((min(i, j), max(i, j)))
    if n is None:
        raise ParseError("missing 'p agree' header")
    if m != len(edges):
        raise ParseError(f"header promises {m} edges, found {len(edges)}")
    return AgreeInstance(n_bits=n, edges=tuple(edges))


def components(agree: AgreeInstance) -> tuple[tuple[int, ...], ...]:
    """Connected components (1-based bit indices), isolated bits included."""
    adj: list[set[int]] = [set() for _ in range(agree.n_bits)]
    for i, j in agree.edges:
        adj[i - 1].add(j - 1)
        adj[j - 1].add(i - 1)
    seen: set[int] = set()
    comps = []
    for start in range(agree.n_bits):
        if start in seen:
            continue
        comp = {start}
        todo = [start]
        seen.add(start)
        while todo:
            a = todo.pop()
            for b in adj[a]:
                if b not in seen:
                    seen.add(b)
                    comp.add(b)
                    todo.append(b)
        comps.append(tuple(sorted(v + 1 for v in comp)))
    return tuple(comps)


def amplitude_by_component(agree: AgreeInstance, mode: str = "exact") -> list[AmplitudeResult]:
    """Per-component amplitudes for disconnected reductions.

    The leading order of the whole instance is the sum of component orders;
    the tree identity and upper bound apply per connected component only.
    """
    out = []
    for comp in components(agree):
        index = {old: new for new, old in enumerate(comp, start=1)}
        sub_edges = tuple(
            sorted(
                (index[i], index[j]) if index[i] < index[j] else (index[j], index[i])
                for i, j in agree.edges
                if i in index and j in index
            )
        )
        out.append(amplitude_dp(AgreeInstance(n_bits=len(comp), edges=sub_edges), mode=mode))
    return out


def permutation_count(n: int) -> int:
    return factorial(n)
