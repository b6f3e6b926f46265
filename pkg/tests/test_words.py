import pytest
from hypothesis import given
from hypothesis import strategies as st

from brennan import words
from brennan.moebius import IDENTITY, MoebiusMap


def test_counts():
    assert [words.count_reduced(n) for n in range(5)] == [1, 4, 12, 36, 108]
    for n in range(1, 11):
        assert words.count_reduced(n) == 4 * 3 ** (n - 1)
    for ell in range(1, 9):
        assert words.population_size(ell) == 2 * (3**ell - 1)
    with pytest.raises(ValueError):
        words.count_reduced(-1)


def test_iter_reduced_exhaustive():
    for n in range(0, 7):
        ws = list(words.iter_reduced(n))
        assert len(ws) == words.count_reduced(n)
        assert len(set(ws)) == len(ws)
        assert all(len(w) == n and words.is_reduced(w) for w in ws)


def test_index_bijection_first_words():
    assert [words.word_from_index(i) for i in range(4)] == list("aAbB")
    assert words.word_from_index(4) == "aa"
    pop = words.population_size(4)
    seen = {words.word_from_index(i) for i in range(pop)}
    assert len(seen) == pop
    assert max(len(w) for w in seen) == 4


@given(st.integers(0, words.population_size(12) - 1))
def test_index_round_trip(i):
    w = words.word_from_index(i)
    assert words.is_reduced(w)
    assert words.index_from_word(w) == i


def test_encode_errors():
    with pytest.raises(ValueError):
        words.encode("ax")
    with pytest.raises(ValueError):
        words.index_from_word("aA")
    with pytest.raises(ValueError):
        words.index_from_word("")


def test_evaluate_and_inverse_word():
    x = MoebiusMap(2, 1, 1, 1)
    y = MoebiusMap(1, 0, 3, 1)
    g = words.generator_table(x, y)
    m = words.evaluate("abAB", g)
    prod = x @ y @ x.inverse() @ y.inverse()
    assert abs(m.trace - prod.trace) < 1e-12
    inv = words.evaluate(words.invert_word("abAB"), g)
    assert abs((m @ inv).trace - IDENTITY.trace) < 1e-12 or abs((m @ inv).trace + 2) < 1e-12
