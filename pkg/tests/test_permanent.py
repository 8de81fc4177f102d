# tests/test_permanent.py
import math
import random
from fractions import Fraction

import pytest

from scdkit.errors import BudgetExceededError, InvalidParameterError
from scdkit.gadget import build_gadget_regular, three_level_slice
from scdkit.permanent import (
    MatchingCount,
    adjacency_from_matrix,
    bregman_certificate,
    bregman_upper,
    count_perfect_matchings,
    falikman_certificate,
    find_perfect_matching,
    iter_perfect_matchings,
    permanent_naive,
    permanent_ryser,
)

HEXAGON = ((0, 1), (1, 2), (2, 0))


def random_01(rng, k, p=0.5):
    return [[1 if rng.random() < p else 0 for _ in range(k)] for _ in range(k)]


def random_rational(rng, k):
    return [[Fraction(rng.randint(0, 5), rng.randint(1, 4)) for _ in range(k)] for _ in range(k)]


def test_known_values():
    identity = [[1 if i == j else 0 for j in range(3)] for i in range(3)]
    assert permanent_ryser(identity, workers=1).value == 1
    third = [[Fraction(1, 3)] * 3 for _ in range(3)]
    assert permanent_ryser(third, workers=1).value == Fraction(2, 9)
    assert permanent_ryser(third, arithmetic="float").value == pytest.approx(2 / 9)
    assert permanent_ryser([], workers=1).value == 1


def test_matching_counts():
    assert count_perfect_matchings([(0, 1, 2)] * 3) == 6
    assert count_perfect_matchings(HEXAGON) == 2
    assert count_perfect_matchings(((0,), (0,))) == 0


def test_ryser_agrees_with_naive_and_dp():
    rng = random.Random(20240611)
    for _ in range(150):
        k = rng.randint(1, 6)
        m = random_01(rng, k)
        ryser = permanent_ryser(m, workers=1).value
        assert ryser == permanent_naive(m).value
        assert ryser == count_perfect_matchings(adjacency_from_matrix(m))
    for _ in range(50):
        k = rng.randint(1, 5)
        m = random_rational(rng, k)
        assert permanent_ryser(m, workers=1).value == permanent_naive(m).value


def test_ryser_agrees_with_dp_up_to_12():
    rng = random.Random(7)
    for k in range(7, 13):
        m = random_01(rng, k, p=0.4)
        assert permanent_ryser(m, workers=1).value == count_perfect_matchings(adjacency_from_matrix(m))


def test_parallel_is_deterministic():
    rng = random.Random(99)
    m = random_01(rng, 14, p=0.3)
    single = permanent_ryser(m, workers=1).value
    assert permanent_ryser(m, workers=2).value == single
    assert permanent_ryser(m, workers=3).value == single


@pytest.mark.slow
def test_ryser_size_20():
    m = [[1 if (i + j) % 3 else 0 for j in range(20)] for i in range(20)]
    assert permanent_ryser(m, workers=2).value == count_perfect_matchings(adjacency_from_matrix(m))


@pytest.mark.slow
def test_ryser_agrees_with_dp_random_16_to_20():
    rng = random.Random(314)
    for k in (16, 17, 18, 19, 20, 20):
        m = random_01(rng, k, p=rng.choice((0.15, 0.25, 0.4)))
        assert permanent_ryser(m, workers=2).value == count_perfect_matchings(adjacency_from_matrix(m))


def test_size_and_input_checks():
    big = [[1 if i == j else 0 for j in range(31)] for i in range(31)]
    with pytest.raises(BudgetExceededError):
        permanent_ryser(big)
    with pytest.raises(BudgetExceededError):
        permanent_naive([[1] * 10 for _ in range(10)])
    with pytest.raises(InvalidParameterError):
        permanent_ryser([[1, 2], [3]])
    with pytest.raises(InvalidParameterError):
        permanent_ryser([[1, -1], [1, 1]])
    with pytest.raises(InvalidParameterError):
        permanent_ryser([[1]], arithmetic="complex")
    with pytest.raises(InvalidParameterError):
        MatchingCount(-1, exact=True, method="naive")


def test_iter_perfect_matchings_order():
    ms = list(iter_perfect_matchings([(0, 1, 2)] * 3))
    assert len(ms) == 6
    assert ms[0] == (0, 1, 2)
    assert ms[-1] == (2, 1, 0)
    assert ms == sorted(ms)


def test_find_perfect_matching():
    m = find_perfect_matching(HEXAGON)
    assert sorted(m) == [0, 1, 2]
    assert all(col in HEXAGON[row] for row, col in enumerate(m))
    assert find_perfect_matching(((0, 1), (), (1,))) is None


def test_bregman_upper():
    assert bregman_upper([3, 3, 3]) == pytest.approx(math.log(6))
    assert bregman_upper([1, 1]) == 0
    with pytest.raises(InvalidParameterError):
        bregman_upper([2, 0])


def test_certificates_on_gadget(boolean):
    g = build_gadget_regular(three_level_slice(boolean(4), 1))
    perm = permanent_ryser(g.matrix(), workers=1)
    falikman = falikman_certificate(g.matrix(), perm)
    assert falikman.passed
    assert Fraction(perm.value) >= Fraction(math.factorial(10), 10**10)
    bregman = bregman_certificate(g.adjacency())
    assert bregman.value == 60
    assert bregman.passed
    assert bregman.bound == pytest.approx(6 ** (10 / 3))
    assert bregman.to_json_dict()["passed"] is True


def test_gadget_permanent_is_weighted_matching_sum(boolean):
    g = build_gadget_regular(three_level_slice(boolean(4), 1))
    perm = permanent_ryser(g.matrix(), workers=1).value
    assert perm == 60 * Fraction(1, 3) ** 10


@pytest.mark.slow
def test_three_way_agreement_up_to_9():
    rng = random.Random(31337)
    for index in range(200):
        k = rng.randint(1, 9)
        m = random_01(rng, k) if index % 2 == 0 else random_rational(rng, k)
        ryser = permanent_ryser(m, workers=1).value
        assert ryser == permanent_naive(m).value
        if index % 2 == 0:
            assert ryser == count_perfect_matchings(adjacency_from_matrix(m))
