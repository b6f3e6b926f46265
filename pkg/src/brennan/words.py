"""Reduced words in the free group on two generators.

Letters are ``a, A, b, B`` with capitals denoting inverses. Internally a
letter is an integer code ``0..3`` in that order, so ``code ^ 1`` is the
inverse letter.
"""
from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence

from brennan.moebius import IDENTITY, MoebiusMap, compose, inverse

LETTERS = "aAbB"
_CODE = {ch: i for i, ch in enumerate(LETTERS)}


def count_reduced(n: int) -> int:
    """Number of reduced words of length exactly ``n``."""
    if n < 0:
        raise ValueError("length must be non-negative")
    return 1 if n == 0 else 4 * 3 ** (n - 1)


def population_size(max_len: int) -> int:
    """Number of non-empty reduced words of length at most ``max_len``."""
    return 2 * (3**max_len - 1)


def is_reduced(word: str) -> bool:
    codes = encode(word)
    return all(codes[i] != codes[i + 1] ^ 1 for i in range(len(codes) - 1))


def encode(word: str) -> list[int]:
    try:
        return [_CODE[ch] for ch in word]
    except KeyError as exc:
        raise ValueError(f"invalid letter {exc.args[0]!r} in word {word!r}") from None


def decode(codes: Sequence[int]) -> str:
    return "".join(LETTERS[c] for c in codes)


def invert_word(word: str) -> str:
    return word[::-1].swapcase()


def word_from_index(index: int) -> str:
    """Bijection from ``0 .. population_size(L) - 1`` onto non-empty reduced words.

    Words are ordered by length, then lexicographically where each letter after
    the first is chosen among the three letters that do not cancel its
    predecessor (in ``LETTERS`` order). Indices below ``population_size(L)``
    are exactly the words of length at most ``L``.
    """
    if index < 0:
        raise ValueError("index must be non-negative")
    n = 1
    while index >= count_reduced(n):
        index -= count_reduced(n)
        n += 1
    digits = []
    for _ in range(n - 1):
        index, r = divmod(index, 3)
        digits.append(r)
    codes = [index]
    for r in reversed(digits):
        allowed = [c for c in range(4) if c != codes[-1] ^ 1]
        codes.append(allowed[r])
    return decode(codes)


def index_from_word(word: str) -> int:
    codes = encode(word)
    if not codes:
        raise ValueError("the empty word has no index")
    offset = sum(count_reduced(k) for k in range(1, len(codes)))
    idx = codes[0]
    for prev, cur in zip(codes, codes[1:]):
        if cur == prev ^ 1:
            raise ValueError(f"word {word!r} is not reduced")
        allowed = [c for c in range(4) if c != prev ^ 1]
        idx = 3 * idx + allowed.index(cur)
    return offset + idx


def iter_reduced(length: int) -> Iterator[str]:
    """All reduced words of one length, in index order."""
    start = sum(count_reduced(k) for k in range(1, length))
    if length == 0:
        yield ""
        return
    for i in range(count_reduced(length)):
        yield word_from_index(start + i)


def generator_table(x: MoebiusMap, y: MoebiusMap) -> dict[str, MoebiusMap]:
    return {"a": x, "A": inverse(x), "b": y, "B": inverse(y)}


def evaluate(word: str, gens: Mapping[str, MoebiusMap]) -> MoebiusMap:
    """Substitute generators into ``word``; the leftmost letter acts last."""
    m = IDENTITY
    for ch in word:
        m = compose(m, gens[ch])
    return m
