"""Random Exact Cover 3 instances: generation, cost, couplings, cleaning, statistics, file IO.

An instance is a list of 3-bit clauses over bits 1..N; a clause is satisfied
when exactly one of its bits is 1.  The cost of an assignment is
``sum((x_i + x_j + x_k - 1)**2)`` over clauses, so solutions are exactly the
zero-cost assignments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidParameterError, ParseError, ResourceLimitError
from .rng import GENERATOR_NAME, SplitMix64

Clause = tuple[int, int, int]


def make_clause(i: int, j: int, k: int) -> Clause:
    """Validated clause: three distinct 1-based indices, stored sorted."""
    trio = (i, j, k)
    if len(set(trio)) != 3:
        raise InvalidParameterError(f"clause bits must be distinct, got {trio}")
    if min(trio) < 1:
        raise InvalidParameterError(f"clause bits must be >= 1, got {trio}")
    return tuple(sorted(trio))  # type: ignore[return-value]


@dataclass(frozen=True)
class Instance:
    """An EC3 formula: N bits and an ordered clause list (duplicates allowed)."""

    n_bits: int
    clauses: tuple[Clause, ...]
    metadata: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for c in self.clauses:
            if c[2] > self.n_bits:
                raise InvalidParameterError(f"clause {c} exceeds n_bits={self.n_bits}")

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.n_clauses, self.n_bits)


@dataclass(frozen=True)
class Assignment:
    """An N-bit string with its integer cost."""

    bits: str
    energy: int

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class CouplingData:
    """Per-bit clause counts B_i and pairwise co-occurrence counts J_ij.

    Both count clause membership with multiplicity, so
    B_i = (1/2) sum_j J_ij and M = (1/3) sum_i B_i hold exactly.
    """

    b: np.ndarray  # shape (N,), int64
    j: np.ndarray  # shape (N, N), int64, symmetric, zero diagonal

    def pairs(self) -> Iterable[tuple[int, int, int]]:
        """Yield (i, j, J_ij) with i < j (1-based) for nonzero couplings."""
        iu, ju = np.nonzero(np.triu(self.j, k=1))
        for a, b in zip(iu, ju):
            yield int(a) + 1, int(b) + 1, int(self.j[a, b])


@dataclass(frozen=True)
class CleanResult:
    """A cleaned instance plus the bit-index remapping that produced it."""

    instance: Instance
    old_to_new: Mapping[int, int]  # surviving old index (1-based) -> new index
    rounds: int


@dataclass(frozen=True)
class InstanceStats:
    """Coupling-graph statistics: present bits, B-moments, connected-subgraph census."""

    present_bits: int
    b_mean: float
    b_var: float
    g_u: tuple[int, ...]  # g_u[u-1] = number of connected induced subgraphs of size u


def random_instance(n_bits: int, n_clauses: int, seed: int) -> Instance:
    """Draw ``n_clauses`` independent uniform clauses over distinct bit triples.

    Sampling is with replacement across clauses; the seed and generator name
    are recorded in the instance metadata so output files are reproducible.
    """
    if n_bits < 3:
        raise InvalidParameterError("need n_bits >= 3 to form a clause")
    if n_clauses < 0:
        raise InvalidParameterError("n_clauses must be >= 0")
    rng = SplitMix64(seed)
    clauses = draw_clauses(rng, n_bits, n_clauses)
    return Instance(
        n_bits=n_bits,
        clauses=clauses,
        metadata={"seed": seed, "gen": GENERATOR_NAME},
    )


def draw_clauses(rng: SplitMix64, n_bits: int, count: int) -> tuple[Clause, ...]:
    """Draw clauses from an existing stream (used by the experiment harness)."""
    out = []
    for _ in range(count):
        while True:
            i = rng.randbelow(n_bits) + 1
            j = rng.randbelow(n_bits) + 1
            k = rng.randbelow(n_bits) + 1
            if i != j and j != k and i != k:
                break
        out.append(tuple(sorted((i, j, k))))
    return tuple(out)


def cost(instance: Instance, bits: str | Sequence[int]) -> int:
    """Evaluate the clause-violation cost of an assignment."""
    vals = _bit_values(bits, instance.n_bits)
    total = 0
    for i, j, k in instance.clauses:
        s = vals[i - 1] + vals[j - 1] + vals[k - 1]
        total += (s - 1) * (s - 1)
    return total


def assignment_for(instance: Instance, bits: str | Sequence[int]) -> Assignment:
    """Build an Assignment with its cost filled in."""
    vals = _bit_values(bits, instance.n_bits)
    text = "".join("1" if v else "0" for v in vals)
    return Assignment(bits=text, energy=cost(instance, vals))


def _bit_values(bits: str | Sequence[int], n_bits: int) -> list[int]:
    if isinstance(bits, str):
        if len(bits) != n_bits:
            raise InvalidParameterError(
                f"assignment length {len(bits)} != n_bits {n_bits}"
            )
        if set(bits) - {"0", "1"}:
            raise InvalidParameterError(f"assignment must be over 0/1, got {bits!r}")
        return [1 if ch == "1" else 0 for ch in bits]
    vals = [int(v) for v in bits]
    if len(vals) != n_bits:
        raise InvalidParameterError(f"assignment length {len(vals)} != n_bits {n_bits}")
    if set(vals) - {0, 1}:
        raise InvalidParameterError("assignment entries must be 0 or 1")
    return vals


def couplings(instance: Instance) -> CouplingData:
    n = instance.n_bits
    b = np.zeros(n, dtype=np.int64)
    j = np.zeros((n, n), dtype=np.int64)
    for ci, cj, ck in instance.clauses:
        for a in (ci, cj, ck):
            b[a - 1] += 1
        for a, c in ((ci, cj), (ci, ck), (cj, ck)):
            j[a - 1, c - 1] += 1
            j[c - 1, a - 1] += 1
    return CouplingData(b=b, j=j)


def clean(instance: Instance) -> CleanResult:
    """Remove trivially degenerate clauses, then absent bits, to a fixpoint.

    A clause is trivially degenerate when at least two of its bits appear in
    no other clause.  Removing such a clause can expose new degree-1 bits, so
    the rule is iterated until nothing changes; bits left with no clause are
    then deleted and the survivors re-indexed contiguously.
    """
    clauses = list(instance.clauses)
    rounds = 0
    while True:
        counts: dict[int, int] = {}
        for c in clauses:
            for a in c:
                counts[a] = counts.get(a, 0) + 1
        kept = [c for c in clauses if sum(1 for a in c if counts[a] == 1) < 2]
        rounds += 1
        if len(kept) == len(clauses):
            break
        clauses = kept

    present = sorted({a for c in clauses for a in c})
    old_to_new = {old: new + 1 for new, old in enumerate(present)}
    new_clauses = tuple(
        tuple(sorted((old_to_new[i], old_to_new[j], old_to_new[k])))
        for i, j, k in clauses
    )
    meta = dict(instance.metadata)
    cleaned = Instance(n_bits=len(present), clauses=new_clauses, metadata=meta)
    return CleanResult(instance=cleaned, old_to_new=old_to_new, rounds=rounds)


def instance_stats(instance: Instance, u_max: int) -> InstanceStats:
    """Present-bit count, B-moments and the connected-subgraph census G_u.

    G_u counts u-subsets of bits whose induced coupling graph is connected,
    found by exhaustive expansion from single vertices (ESU enumeration).
    G_1 counts vertices with at least one incident coupling edge.
    """
    if u_max < 1:
        raise InvalidParameterError("u_max must be >= 1")
    if u_max > 6:
        raise ResourceLimitError("u_max > 6 would enumerate too many subgraphs")
    cpl = couplings(instance)
    n = instance.n_bits
    present = int(np.count_nonzero(cpl.b))
    b_mean = float(cpl.b.mean()) if n else 0.0
    # The per-instance mean of B_i is pinned at 3M/N, so the population
    # normalization is the unbiased one here.
    b_var = float(((cpl.b - cpl.b.mean()) ** 2).mean()) if n else 0.0

    neighbors: list[list[int]] = [[] for _ in range(n)]
    for a in range(n):
        neighbors[a] = [int(x) for x in np.nonzero(cpl.j[a])[0]]

    g_u = [0] * u_max

    def extend(sub: list[int], extension: list[int], root: int):
        g_u[len(sub) - 1] += 1
        if len(sub) == u_max:
            return
        ext = list(extension)
        while ext:
            w = ext.pop()
            new_ext = ext + [
                u
                for u in neighbors[w]
                if u > root and u not in sub and all(u not in neighbors[s] for s in sub)
            ]
            extend(sub + [w], new_ext, root)

    for v in range(n):
        if neighbors[v]:
            extend([v], [u for u in neighbors[v] if u > v], v)

    return InstanceStats(
        present_bits=present, b_mean=b_mean, b_var=b_var, g_u=tuple(g_u)
    )


def connected_subsets_bruteforce(instance: Instance, u: int) -> int:
    """Census oracle: test every C(N, u) subset for connectivity."""
    cpl = couplings(instance)
    n = instance.n_bits
    count = 0
    for sub in itertools.combinations(range(n), u):
        if _is_connected(sub, cpl.j):
            count += 1
    return count


def _is_connected(sub: Sequence[int], j: np.ndarray) -> bool:
    if len(sub) == 1:
        return bool(j[sub[0]].any())
    todo = [sub[0]]
    seen = {sub[0]}
    members = set(sub)
    while todo:
        a = todo.pop()
        for b in members - seen:
            if j[a, b]:
                seen.add(b)
                todo.append(b)
    return len(seen) == len(sub)


def write_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_text(instance))


def instance_to_text(instance: Instance) -> str:
    lines = []
    meta = instance.metadata
    if "seed" in meta and "gen" in meta:
        lines.append(f"c seed={meta['seed']} gen={meta['gen']}")
    for comment in meta.get("comments", ()):
        lines.append(f"c {comment}")
    lines.append(f"p ec3 {instance.n_bits} {instance.n_clauses}")
    for i, j, k in instance.clauses:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"


def read_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_text(fh.read())


def instance_from_text(text: str) -> Instance:
    n_bits = None
    n_clauses = None
    clauses: list[Clause] = []
    metadata: dict[str, object] = {}
    comments: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            body = line[1:].strip()
            parts = body.split()
            if (
                len(parts) == 2
                and parts[0].startswith("seed=")
                and parts[1].startswith("gen=")
            ):
                try:
                    metadata["seed"] = int(parts[0][5:])
                except ValueError:
                    raise ParseError(f"bad seed comment {body!r}", lineno)
                metadata["gen"] = parts[1][4:]
            else:
                comments.append(body)
            continue
        if line.startswith("p"):
            if n_bits is not None:
                raise ParseError("duplicate header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "ec3":
                raise ParseError(f"expected 'p ec3 <N> <M>', got {line!r}", lineno)
            try:
                n_bits, n_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"non-integer header fields in {line!r}", lineno)
            if n_bits < 0 or n_clauses < 0:
                raise ParseError("header counts must be non-negative", lineno)
            continue
        if n_bits is None:
            raise ParseError("clause line before header", lineno)
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected three bit indices, got {line!r}", lineno)
        try:
            i, j, k = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-integer bit index in {line!r}", lineno)
        if len({i, j, k}) != 3:
            raise ParseError(f"clause with repeated bit: {line!r}", lineno)
        if min(i, j, k) < 1 or max(i, j, k) > n_bits:
            raise ParseError(f"bit index out of range 1..{n_bits}: {line!r}", lineno)
        clauses.append(tuple(sorted((i, j, k))))  # type: ignore[arg-type]
    if n_bits is None:
        raise ParseError("missing 'p ec3' header")
    if n_clauses != len(clauses):
        raise ParseError(f"header promises {n_clauses} clauses, found {len(clauses)}")
    if comments:
        metadata["comments"] = tuple(comments)
    return Instance(n_bits=n_bits, clauses=tuple(clauses), metadata=metadata)
