"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from ec3lab.core import Instance, clean, random_instance
from ec3lab.dpll import solve_all
from ec3lab.spectrum import at_coupling, costs_vector, dense_matrix


@pytest.fixture
def triangle_chain() -> Instance:
    """Six bits, three overlapping clauses, four solutions; used throughout."""
    return Instance(n_bits=6, clauses=((1, 2, 3), (3, 4, 5), (1, 5, 6)))


def refined_eigenvalue(instance: Instance, lam: Fraction, index: int = 0) -> Fraction:
    """High-precision eigenvalue oracle, independent of the series machinery.

    A float eigenvector v from a standard solver is re-scored with an exact
    integer Rayleigh quotient (the hopping weight is kept rational), so the
    returned value approximates the true eigenvalue to ~residual^2/gap, far
    below double precision.
    """
    n = instance.n_bits
    dim = 1 << n
    lam_f = float(lam)
    if dim <= 512 or index != 0:
        h = dense_matrix(at_coupling(instance, lam_f))
        vals, vecs = np.linalg.eigh(h)
        v = vecs[:, index]
    else:
        spec = at_coupling(instance, lam_f)
        from ec3lab.spectrum import apply_hamiltonian

        op = spla.LinearOperator(
            (dim, dim), matvec=lambda x: apply_hamiltonian(spec, x)
        )
        vals, vecs = spla.eigsh(op, k=1, which="SA", tol=1e-12, ncv=40)
        v = vecs[:, 0]
    scale = 1 << 62
    vq = [int(round(x * scale)) for x in v.tolist()]
    costs = costs_vector(instance)
    s0 = sum(q * q for q in vq)
    s1 = sum(int(costs[i]) * vq[i] * vq[i] for i in range(dim))
    s2 = 0
    for x in range(dim):
        qx = vq[x]
        if qx == 0:
            continue
        for pos in range(n):
            y = x ^ (1 << pos)
            if y > x:
                s2 += qx * vq[y]
    s2 *= 2
    a, b = lam.numerator, lam.denominator
    return Fraction(b * s1 - a * s2, b * s0)


def unique_solution_instances(
    count: int,
    raw_bits: int,
    raw_clauses: int,
    seed_start: int = 0,
    min_bits: int = 6,
    max_bits: int = 14,
):
    """Deterministic stream of cleaned instances with exactly one solution."""
    found = []
    seed = seed_start
    while len(found) < count:
        cleaned = clean(random_instance(raw_bits, raw_clauses, seed=seed)).instance
        seed += 1
        if not (min_bits <= cleaned.n_bits <= max_bits):
            continue
        sols = solve_all(cleaned)
        if len(sols.solutions) == 1:
            found.append((cleaned, sols.solutions[0].bits))
        if seed - seed_start > 20000:
            raise RuntimeError("instance search did not terminate")
    return found
