"""Reduction to pairwise constraints, amplitude DP vs brute force, barriers."""

from fractions import Fraction

import pytest

from ec3lab.core import Instance, clean, random_instance
from ec3lab.dpll import solve_all
from ec3lab.errors import (
    DegeneratePathError,
    InvalidParameterError,
    ParseError,
    ResourceLimitError,
)
from ec3lab.rng import SplitMix64
from ec3lab.tunneling import (
    AgreeInstance,
    agree_from_text,
    agree_to_text,
    amplitude_bruteforce,
    amplitude_by_component,
    amplitude_dp,
    barrier_profile,
    gap_estimate,
    random_connected_graph,
    random_tree,
    reduce_to_agree,
    sampled_barrier,
    typicality,
    upper_bound,
)

FOUR_CYCLE = AgreeInstance(n_bits=4, edges=((1, 2), (1, 4), (2, 3), (3, 4)))


def test_reduce_chain(triangle_chain):
    result = reduce_to_agree(triangle_chain, "100100", "010101")
    assert result.relevant_bits == (1, 2, 6)
    assert result.agree.edges == ((1, 2), (1, 3))
    assert result.agree.is_connected()


def test_reduce_soundness_maps_solutions_to_constant_strings(triangle_chain):
    result = reduce_to_agree(triangle_chain, "100100", "010101")
    flipped = set(result.flipped_partition)
    agree_a = [
        int("100100"[orig - 1]) ^ (new in flipped)
        for new, orig in enumerate(result.relevant_bits, start=1)
    ]
    agree_b = [
        int("010101"[orig - 1]) ^ (new in flipped)
        for new, orig in enumerate(result.relevant_bits, start=1)
    ]
    assert set(agree_a) == {0}
    assert set(agree_b) == {1}


def test_reduce_free_bits_give_edgeless_instance():
    inst = Instance(n_bits=5, clauses=((1, 2, 3),))
    result = reduce_to_agree(inst, "10000", "10011")
    assert result.agree.n_bits == 2
    assert result.agree.edges == ()
    assert not result.agree.is_connected()


def test_reduce_rejects_identical_or_nonsolutions(triangle_chain):
    with pytest.raises(InvalidParameterError):
        reduce_to_agree(triangle_chain, "100100", "100100")
    with pytest.raises(InvalidParameterError):
        reduce_to_agree(triangle_chain, "100100", "111111")


def test_reduce_random_pairs_are_bipartite_disagree():
    found = 0
    for seed in range(120):
        cleaned = clean(random_instance(24, 14, seed=seed)).instance
        if cleaned.n_bits < 6:
            continue
        sols = solve_all(cleaned).solutions
        if len(sols) < 2:
            continue
        result = reduce_to_agree(cleaned, sols[0].bits, sols[1].bits)
        # each edge is a genuine inequality for both restricted solutions
        for i, j in result.agree.edges:
            oi, oj = result.relevant_bits[i - 1], result.relevant_bits[j - 1]
            assert sols[0].bits[oi - 1] != sols[0].bits[oj - 1]
            assert sols[1].bits[oi - 1] != sols[1].bits[oj - 1]
        found += 1
        if found >= 10:
            break
    assert found >= 5


def test_amplitude_single_edge():
    inst = AgreeInstance(n_bits=2, edges=((1, 2),))
    assert amplitude_dp(inst).coefficient == 2
    assert amplitude_bruteforce(inst).coefficient == 2


def test_amplitude_path3_tree_identity():
    inst = AgreeInstance(n_bits=3, edges=((1, 2), (2, 3)))
    assert amplitude_dp(inst).coefficient == 4


def test_amplitude_four_cycle():
    dp = amplitude_dp(FOUR_CYCLE)
    brute = amplitude_bruteforce(FOUR_CYCLE)
    assert dp.coefficient == Fraction(5, 2)
    assert brute.coefficient == Fraction(5, 2)


@pytest.mark.parametrize("seed", range(12))
def test_tree_identity_random(seed):
    rng = SplitMix64(seed)
    n = 2 + rng.randbelow(13)  # up to 14
    tree = random_tree(n, seed=seed * 1000 + 1)
    result = amplitude_dp(tree)
    assert result.coefficient == Fraction(2) ** (n - 1)
    assert result.order == n


@pytest.mark.parametrize("seed", range(10))
def test_dp_matches_bruteforce(seed):
    rng = SplitMix64(seed + 500)
    n = 2 + rng.randbelow(7)  # up to 8
    graph = random_connected_graph(n, extra_edges=rng.randbelow(4), seed=seed * 7 + 3)
    assert amplitude_dp(graph).coefficient == amplitude_bruteforce(graph).coefficient


def test_amplitude_float_mode():
    val = amplitude_dp(FOUR_CYCLE, mode="float")
    assert val.coefficient == pytest.approx(2.5, rel=1e-12)
    assert val.amplitude_at(0.5) == pytest.approx(2.5 * 0.5**4)


def test_amplitude_monotone_under_edge_addition():
    for seed in range(8):
        rng = SplitMix64(seed + 90)
        n = 3 + rng.randbelow(8)
        tree = random_tree(n, seed=seed * 31 + 7)
        base = amplitude_dp(tree).coefficient
        i = rng.randbelow(n) + 1
        j = rng.randbelow(n) + 1
        if i == j:
            j = i % n + 1
        new_edges = tuple(sorted(tree.edges + ((min(i, j), max(i, j)),)))
        grown = amplitude_dp(AgreeInstance(n_bits=n, edges=new_edges)).coefficient
        assert grown <= base


def test_amplitude_disconnected_raises():
    inst = AgreeInstance(n_bits=4, edges=((1, 2), (3, 4)))
    with pytest.raises(DegeneratePathError):
        amplitude_dp(inst)
    with pytest.raises(DegeneratePathError):
        amplitude_bruteforce(inst)
    parts = amplitude_by_component(inst)
    assert [p.coefficient for p in parts] == [2, 2]
    assert sum(p.order for p in parts) == 4


def test_amplitude_limits():
    big = AgreeInstance(n_bits=25, edges=tuple((i, i + 1) for i in range(1, 25)))
    with pytest.raises(ResourceLimitError):
        amplitude_dp(big)
    mid = AgreeInstance(n_bits=10, edges=tuple((i, i + 1) for i in range(1, 10)))
    with pytest.raises(ResourceLimitError):
        amplitude_bruteforce(mid)


def test_upper_bound_values_and_property():
    assert upper_bound(2, 1.0) == 2.0
    assert upper_bound(10, 0.4) == pytest.approx(0.5 * 0.8**10)
    with pytest.raises(InvalidParameterError):
        upper_bound(0, 0.4)
    for seed in range(6):
        rng = SplitMix64(seed)
        n = 2 + rng.randbelow(9)
        graph = random_connected_graph(n, extra_edges=rng.randbelow(3), seed=seed + 40)
        coeff = amplitude_dp(graph, mode="float").coefficient
        for lam in (0.1, 0.5, 1.0):
            assert coeff * lam**n <= upper_bound(n, lam) + 1e-12


def test_barrier_four_cycle():
    profile = barrier_profile(FOUR_CYCLE)
    assert profile.mean_e == pytest.approx((2.0, 8.0 / 3.0, 2.0))


def test_barrier_symmetry_and_peak():
    graph = AgreeInstance(
        n_bits=20, edges=tuple((i, i + 1) for i in range(1, 20)) + ((1, 20),)
    )
    profile = barrier_profile(graph)
    assert len(profile.mean_e) == 19
    for j in range(19):
        assert profile.mean_e[j] == pytest.approx(profile.mean_e[18 - j])
    assert max(profile.mean_e) == profile.mean_e[9]
    assert profile.mean_e[9] == pytest.approx(2 * 20 * 10 * 10 / (20 * 19))


def test_barrier_monte_carlo_agrees():
    means, errs = sampled_barrier(FOUR_CYCLE, n_samples=4000, seed=3)
    exact = barrier_profile(FOUR_CYCLE).mean_e
    for m, e, x in zip(means, errs, exact):
        assert abs(m - x) <= 3 * e + 1e-9


def test_typicality_values():
    prof = typicality(0.62, 300)
    assert prof.p00 + prof.p01 + prof.p10 + prof.p11 == pytest.approx(1.0)
    assert prof.lambda_a == pytest.approx(0.81, abs=0.005)
    import math

    assert prof.lambda_a == pytest.approx(2 * prof.typ_beta / math.e, rel=1e-12)
    assert prof.typ_m == pytest.approx(2 * 0.62 * 300 / 3)
    assert prof.typ_n == pytest.approx(300 * (1 - math.exp(-1.86)) * 4 / 9)


def test_gap_estimate():
    flagged = gap_estimate(0.81, 0.81, 5)
    assert flagged.value == pytest.approx(1.0)
    assert not flagged.suppressed
    est = gap_estimate(0.52, 0.81, 60)
    assert est.value == pytest.approx((0.52 / 0.81) ** 60, rel=1e-12)
    assert est.suppressed
    doubled = gap_estimate(0.52, 0.81, 120)
    assert doubled.value == pytest.approx(est.value**2, rel=1e-9)


def test_agree_io_roundtrip(tmp_path):
    text = agree_to_text(FOUR_CYCLE)
    assert text.splitlines()[0] == "p agree 4 4"
    assert agree_from_text(text) == FOUR_CYCLE
    path = tmp_path / "g.agree"
    path.write_text(text, encoding="utf-8")
    from ec3lab.tunneling import read_agree

    assert read_agree(path) == FOUR_CYCLE


@pytest.mark.parametrize(
    "text",
    ["p agree 2 1\n1 1\n", "1 2\n", "p agree 2 2\n1 2\n", "p agree x 1\n1 2\n"],
)
def test_agree_parse_errors(text):
    with pytest.raises(ParseError):
        agree_from_text(text)
