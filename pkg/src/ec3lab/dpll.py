"""Complete enumeration of EC3 solutions by DPLL with 1-in-3 unit propagation."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Assignment, Instance
from .errors import InvalidParameterError

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class SolutionSet:
    """All zero-cost assignments, sorted lexicographically.

    `truncated` is set when enumeration stopped at the cap; near-threshold
    instances have few solutions, so a truncation signals a pathological or
    low-alpha input rather than a normal outcome.
    """

    solutions: tuple[Assignment, ...]
    truncated: bool


def solve_all(instance: Instance, cap: int = DEFAULT_CAP) -> SolutionSet:
    """Enumerate every satisfying assignment (up to ``cap``).

    Branches on the unassigned bit appearing in the most clauses (ties to the
    lowest index), propagating the 1-in-3 unit rules: a satisfied clause
    forces its remaining bits to 0, a clause with two 0s forces the third bit
    to 1, and a clause with two 1s or three 0s is a conflict.
    """
    if cap < 1:
        raise InvalidParameterError("cap must be >= 1")
    n = instance.n_bits
    clauses = [tuple(a - 1 for a in c) for c in instance.clauses]
    m = len(clauses)
    bit_clauses: list[list[int]] = [[] for _ in range(n)]
    for ci, c in enumerate(clauses):
        for a in c:
            bit_clauses[a].append(ci)

    # Static branch order: descending clause count, then ascending index.
    order = sorted(range(n), key=lambda a: (-len(bit_clauses[a]), a))

    val = [-1] * n
    ones = [0] * m
    zeros = [0] * m
    trail: list[int] = []
    found: list[str] = []
    truncated = False

    def assign(start_bit: int, start_val: int) -> bool:
        """Assign and propagate; return False on conflict (caller unwinds)."""
        queue = [(start_bit, start_val)]
        while queue:
            bit, v = queue.pop()
            cur = val[bit]
            if cur != -1:
                if cur != v:
                    return False
                continue
            val[bit] = v
            trail.append(bit)
            # Counters must all move before any early return so that undo
            # stays exactly symmetric.
            for ci in bit_clauses[bit]:
                if v:
                    ones[ci] += 1
                else:
                    zeros[ci] += 1
            for ci in bit_clauses[bit]:
                o, z = ones[ci], zeros[ci]
                if o >= 2 or z == 3:
                    return False
                if o == 1:
                    for a in clauses[ci]:
                        if val[a] == -1:
                            queue.append((a, 0))
                elif z == 2:
                    for a in clauses[ci]:
                        if val[a] == -1:
                            queue.append((a, 1))
        return True

    def undo(mark: int):
        while len(trail) > mark:
            bit = trail.pop()
            v = val[bit]
            val[bit] = -1
            for ci in bit_clauses[bit]:
                if v:
                    ones[ci] -= 1
                else:
                    zeros[ci] -= 1

    def search(ptr: int) -> bool:
        """Depth-first enumeration; returns False once the cap is hit."""
        nonlocal truncated
        while ptr < n and val[order[ptr]] != -1:
            ptr += 1
        if ptr == n:
            if len(found) >= cap:
                truncated = True
                return False
            found.append("".join("1" if v else "0" for v in val))
            return True
        bit = order[ptr]
        for v in (0, 1):
            mark = len(trail)
            ok = assign(bit, v)
            if ok and not search(ptr + 1):
                undo(mark)
                return False
            undo(mark)
        return True

    search(0)
    found.sort()
    solutions = tuple(Assignment(bits=s, energy=0) for s in found)
    return SolutionSet(solutions=solutions, truncated=truncated)


def hamming(a: Assignment | str, b: Assignment | str) -> int:
    """Number of bit positions where two equal-length assignments differ."""
    sa = a.bits if isinstance(a, Assignment) else a
    sb = b.bits if isinstance(b, Assignment) else b
    if len(sa) != len(sb):
        raise InvalidParameterError(f"length mismatch: {len(sa)} vs {len(sb)}")
    return sum(ca != cb for ca, cb in zip(sa, sb))
