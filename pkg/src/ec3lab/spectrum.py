"""Exact spectral ground truth on the 2^N hypercube at small N.

The interpolating Hamiltonian is diagonal in the assignment basis (clause
costs) plus a uniform nearest-neighbor hopping term on the hypercube.  Both
parameterizations are supported: the annealing schedule s in [0, 1]
(diagonal weight s, hopping weight 1-s) and the end-of-schedule coupling
lam >= 0 (diagonal weight 1, hopping weight lam, lam = (1-s)/s).

Everything is matrix free: states are 2^N vectors indexed so that bit 1 is
the most significant position, making integer order equal lexicographic
order of the bit strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .core import Assignment, Instance
from .errors import (
    ConvergenceFailureError,
    DegenerateNeighborError,
    InapplicableError,
    InvalidParameterError,
    ResourceLimitError,
)
from .perturbation import CorrectionSeries

MAX_QUBITS = 22


@dataclass(frozen=True)
class HamiltonianSpec:
    """One point on the interpolation, in either parameterization."""

    instance: Instance
    s: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if (self.s is None) == (self.lam is None):
            raise InvalidParameterError("specify exactly one of s or lam")
        if self.s is not None and not 0.0 <= self.s <= 1.0:
            raise InvalidParameterError("s must lie in [0, 1]")
        if self.lam is not None and self.lam < 0.0:
            raise InvalidParameterError("lam must be >= 0")

    @property
    def diag_weight(self) -> float:
        return self.s if self.s is not None else 1.0

    @property
    def hop_weight(self) -> float:
        return 1.0 - self.s if self.s is not None else self.lam

    @property
    def lam_equivalent(self) -> float:
        """The coupling (1-s)/s matching this point (inf at s=0)."""
        if self.lam is not None:
            return self.lam
        return (1.0 - self.s) / self.s if self.s > 0 else float("inf")


def at_schedule(instance: Instance, s: float) -> HamiltonianSpec:
    return HamiltonianSpec(instance=instance, s=s)


def at_coupling(instance: Instance, lam: float) -> HamiltonianSpec:
    return HamiltonianSpec(instance=instance, lam=lam)


@dataclass(frozen=True)
class GapScan:
    """Gap profile over a schedule grid plus the located minimum."""

    grid: tuple[tuple[float, float, float, float], ...]  # (s, e0, e1, gap)
    min_gap: float
    argmin_s: float


@dataclass(frozen=True)
class LowerBoundCertificate:
    """A proven positive lower bound on the gap at one schedule point."""

    regime: str  # "gershgorin" or "mixing"
    bound_value: float
    s: float
    n_bits: int
    energy_cap: int  # the bound's energy-scale constant: 4 * n_clauses


@dataclass(frozen=True)
class Certification:
    """Residual-based eigenvalue bracket around an estimated eigenpair."""

    estimate_energy: float
    residual: float
    interval: tuple[float, float]


@dataclass(frozen=True)
class OverlapProfile:
    """Ground-state weight on one assignment and on its distance shells."""

    overlap: float
    by_distance: tuple[float, ...]


@lru_cache(maxsize=8)
def costs_vector(instance: Instance) -> np.ndarray:
    """Clause cost of every assignment, ordered lexicographically."""
    n = instance.n_bits
    if n > MAX_QUBITS:
        raise ResourceLimitError(f"n_bits {n} exceeds the {MAX_QUBITS}-qubit limit")
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    costs = np.zeros(dim, dtype=np.int64)
    for i, j, k in instance.clauses:
        s = (
            (idx >> (n - i)) & 1
        ) + ((idx >> (n - j)) & 1) + ((idx >> (n - k)) & 1)
        costs += (s - 1) ** 2
    return costs


def index_of(instance: Instance, assignment: Assignment | str) -> int:
    bits = assignment.bits if isinstance(assignment, Assignment) else assignment
    if len(bits) != instance.n_bits:
        raise InvalidParameterError("assignment length mismatch")
    return int(bits, 2)


def apply_hamiltonian(spec: HamiltonianSpec, state: np.ndarray) -> np.ndarray:
    """Matrix-free application: diagonal costs plus N single-bit-flip hops."""
    n = spec.instance.n_bits
    dim = 1 << n
    if state.shape != (dim,):
        raise InvalidParameterError(f"state must have shape ({dim},)")
    costs = costs_vector(spec.instance)
    out = spec.diag_weight * costs * state
    hop = spec.hop_weight
    if hop:
        for pos in range(n):
            flipped = (
                state.reshape(1 << pos, 2, -1)[:, ::-1, :].reshape(dim)
            )
            out -= hop * flipped
    return out


def _operator(spec: HamiltonianSpec) -> spla.LinearOperator:
    dim = 1 << spec.instance.n_bits
    return spla.LinearOperator(
        (dim, dim), matvec=lambda v: apply_hamiltonian(spec, v), dtype=np.float64
    )


def dense_matrix(spec: HamiltonianSpec) -> np.ndarray:
    """Explicit matrix, for oracle checks at small N."""
    n = spec.instance.n_bits
    if n > 13:
        raise ResourceLimitError("dense matrix limited to n_bits <= 13")
    dim = 1 << n
    h = np.diag(spec.diag_weight * costs_vector(spec.instance).astype(np.float64))
    hop = spec.hop_weight
    for x in range(dim):
        for pos in range(n):
            h[x, x ^ (1 << pos)] -= hop
    return h


def lowest_two(
    spec: HamiltonianSpec, v0: np.ndarray | None = None
) -> tuple[float, float, np.ndarray]:
    """Two lowest eigenvalues and the ground vector.

    Small problems go through a dense solve; larger ones use an implicitly
    restarted Lanczos iteration with full reorthogonalization (ARPACK).
    Degenerate ground pairs come back with e1 - e0 ~ 0.
    """
    dim = 1 << spec.instance.n_bits
    if spec.hop_weight == 0.0:
        # Exactly diagonal: Krylov iteration cannot mix basis states (and
        # ARPACK silently stalls on the saturated Krylov space), but the
        # spectrum is just the scaled cost vector.
        diag = spec.diag_weight * costs_vector(spec.instance).astype(np.float64)
        order = np.argsort(diag, kind="stable")
        ground = np.zeros(dim)
        ground[order[0]] = 1.0
        return float(diag[order[0]]), float(diag[order[1]]), ground
    if dim <= 512:
        h = dense_matrix(spec)
        vals, vecs = np.linalg.eigh(h)
        return float(vals[0]), float(vals[1]), vecs[:, 0]
    op = _operator(spec)
    ncv = min(dim - 1, 40)
    last_exc: Exception | None = None
    for attempt in range(3):
        try:
            vals, vecs = spla.eigsh(
                op,
                k=2,
                which="SA",
                tol=1e-12,
                ncv=ncv,
                v0=v0,
                maxiter=dim * 40,
            )
            order = np.argsort(vals)
            return (
                float(vals[order[0]]),
                float(vals[order[1]]),
                vecs[:, order[0]],
            )
        except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
            last_exc = exc
            ncv = min(dim - 1, ncv * 2)
            v0 = None
    raise ConvergenceFailureError(
        f"eigensolver did not converge: {last_exc}", best_residual=None
    )


def gap_scan(
    instance: Instance, s_grid, refine: bool = False
) -> GapScan:
    """Gap profile over the grid; optional golden-section refinement.

    With ``refine`` the minimum is narrowed to an s-error below 1e-4 inside
    the bracket formed by the coarse minimum's neighbors.
    """
    s_values = sorted(float(s) for s in s_grid)
    if not s_values or s_values[0] <= 0.0 or s_values[-1] > 1.0:
        raise InvalidParameterError("grid must lie inside (0, 1]")
    rows = []
    v0 = None
    for s in s_values:
        e0, e1, vec = lowest_two(at_schedule(instance, s), v0=v0)
        v0 = vec
        rows.append((s, e0, e1, e1 - e0))
    gaps = [r[3] for r in rows]
    k = int(np.argmin(gaps))
    best_s, best_gap = rows[k][0], gaps[k]

    if refine and len(rows) > 1:
        lo = rows[k - 1][0] if k > 0 else rows[k][0]
        hi = rows[k + 1][0] if k + 1 < len(rows) else rows[k][0]
        if hi > lo:
            phi = (np.sqrt(5.0) - 1.0) / 2.0

            def gap_at(s: float) -> float:
                e0, e1, _ = lowest_two(at_schedule(instance, s))
                return e1 - e0

            a, b = lo, hi
            c = b - phi * (b - a)
            d = a + phi * (b - a)
            fc, fd = gap_at(c), gap_at(d)
            while b - a > 1e-4:
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - phi * (b - a)
                    fc = gap_at(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + phi * (b - a)
                    fd = gap_at(d)
            s_star = 0.5 * (a + b)
            g_star = gap_at(s_star)
            if g_star < best_gap:
                best_s, best_gap = s_star, g_star

    return GapScan(grid=tuple(rows), min_gap=best_gap, argmin_s=best_s)


def lower_bound(instance: Instance, s: float) -> LowerBoundCertificate:
    """Proven gap lower bound for unique-solution instances.

    Near the end of the schedule the Gershgorin discs of the solution row and
    every excited row separate; elsewhere the positivity of the N-step
    hypercube mixing matrix bounds the spectral gap away from zero.  The
    energy-scale constant is the worst-case cost 4M (each clause shifts the
    energy by at most 4).
    """
    if not 0.0 <= s <= 1.0:
        raise InvalidParameterError("s must lie in [0, 1]")
    costs = costs_vector(instance)
    zero_states = int((costs == 0).sum())
    if zero_states != 1:
        raise InapplicableError(
            f"bound needs a unique zero-cost assignment, found {zero_states}"
        )
    n = instance.n_bits
    m_cap = 4 * instance.n_clauses
    switch = (2 * n + 1) / (2 * n + 2)
    if s >= switch:
        return LowerBoundCertificate(
            regime="gershgorin",
            bound_value=s - 2 * (1 - s) * n,
            s=s,
            n_bits=n,
            energy_cap=m_cap,
        )
    value = 1.0 / ((2 * n + 2) * float(4 * m_cap * n + 2 * m_cap + 2 * n) ** (n - 1))
    return LowerBoundCertificate(
        regime="mixing", bound_value=value, s=s, n_bits=n, energy_cap=m_cap
    )


def first_order_state(
    instance: Instance, assignment: Assignment | str, lam: float
) -> np.ndarray:
    """Normalized first-order perturbed basis state around one assignment.

    Each single-flip neighbor y receives amplitude -lam / (E_x - E_y); a
    degenerate neighbor (E_y = E_x) has no first-order coefficient and raises.
    """
    n = instance.n_bits
    costs = costs_vector(instance)
    x = index_of(instance, assignment)
    state = np.zeros(1 << n)
    state[x] = 1.0
    ex = float(costs[x])
    for pos in range(n):
        y = x ^ (1 << pos)
        ey = float(costs[y])
        if ey == ex:
            raise DegenerateNeighborError(
                f"flip of bit {n - pos} is degenerate with the anchor",
                (n - pos,),
            )
        state[y] = -lam / (ex - ey)
    return state / np.linalg.norm(state)


def certify(
    spec: HamiltonianSpec, candidate_state: np.ndarray, candidate_energy: float
) -> Certification:
    """Residual bracket: some exact eigenvalue lies within ||(H - E)psi||."""
    norm = float(np.linalg.norm(candidate_state))
    if abs(norm - 1.0) > 1e-8:
        raise InvalidParameterError(f"candidate state norm {norm} != 1")
    resid_vec = apply_hamiltonian(spec, candidate_state) - candidate_energy * candidate_state
    eps = float(np.linalg.norm(resid_vec))
    return Certification(
        estimate_energy=candidate_energy,
        residual=eps,
        interval=(candidate_energy - eps, candidate_energy + eps),
    )


def certify_series(
    instance: Instance, assignment: Assignment | str, series: CorrectionSeries, lam: float
) -> Certification:
    """Certify the truncated-series energy with the first-order state."""
    state = first_order_state(instance, assignment, lam)
    return certify(at_coupling(instance, lam), state, series.evaluate(lam))


def localization_overlap(
    spec: HamiltonianSpec, assignment: Assignment | str
) -> OverlapProfile:
    """Ground-state weight on an assignment, plus its Hamming-shell profile."""
    n = spec.instance.n_bits
    _, _, ground = lowest_two(spec)
    x = index_of(spec.instance, assignment)
    weights = ground**2
    weights /= weights.sum()
    idx = np.arange(1 << n, dtype=np.int64) ^ x
    dist = np.zeros(1 << n, dtype=np.int64)
    for pos in range(n):
        dist += (idx >> pos) & 1
    by_distance = np.bincount(dist, weights=weights, minlength=n + 1)
    return OverlapProfile(
        overlap=float(weights[x]), by_distance=tuple(float(v) for v in by_distance)
    )
