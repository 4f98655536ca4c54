"""Admissible words over {1..m}, shadowing families and canonical keys."""
from __future__ import annotations

from typing import Iterable, Iterator, Sequence

from .errors import InadmissibleTau, InadmissibleWord, SymbolOutOfRange, WordError

Word = tuple


def _as_word(symbols) -> Word:
    if isinstance(symbols, str):
        return parse_word(symbols)
    return tuple(int(x) for x in symbols)


def is_admissible(symbols, m: int | None = None) -> bool:
    """Cyclic admissibility: no symbol repeats its successor, first != last."""
    w = _as_word(symbols)
    for x in w:
        if x < 1 or (m is not None and x > m):
            raise SymbolOutOfRange(f"symbol {x} outside 1..{m if m else 'm'}")
    if len(w) < 2:
        return False
    return all(w[j] != w[(j + 1) % len(w)] for j in range(len(w)))


def require_admissible(symbols, m: int | None = None) -> Word:
    w = _as_word(symbols)
    if not is_admissible(w, m):
        raise InadmissibleWord(f"word {render_word(w)} is not admissible")
    return w


def transpose(word) -> Word:
    return tuple(reversed(_as_word(word)))


def rotations(word) -> Iterator[Word]:
    w = _as_word(word)
    for k in range(len(w)):
        yield w[k:] + w[:k]


def palindromic_rotation(word) -> int | None:
    """Offset k such that rotating by k gives (c0, a1..a_{q-1}, c1, a_{q-1}..a1).

    The two centers c0 = w[k] and c1 = w[k + p/2] are the bounces the orbit
    hits perpendicularly. None if the word is not palindromic.
    """
    w = _as_word(word)
    p = len(w)
    if p % 2:
        return None
    for k in range(p):
        r = w[k:] + w[:k]
        if all(r[j] == r[p - j] for j in range(1, p // 2)):
            return k
    return None


def is_palindromic(word) -> bool:
    return palindromic_rotation(word) is not None


def build_hn(n: int) -> Word:
    """(3,2) followed by n copies of (1,2)."""
    if n < 0:
        raise WordError("n must be non-negative")
    return (3, 2) + (1, 2) * n


def tau_sigma_n(sigma: Sequence[int], tau1: int, n: int) -> Word:
    """Period-two family tau sigma^n with sigma = (s1, s0) and tau = (tau1, s0)."""
    s = _as_word(sigma)
    if len(s) != 2 or s[0] == s[1]:
        raise WordError("the tau-sigma-n family needs an admissible period-two sigma")
    if tau1 in s:
        raise InadmissibleTau(f"tau1={tau1} must differ from both symbols of sigma")
    if n < 0:
        raise WordError("n must be non-negative")
    return (tau1, s[1]) + s * n


def build_hn_general(sigma: Sequence[int], tau: Sequence[int], n: int) -> Word:
    """tau+ sigma^n tau- transpose(sigma)^n, with tau = (tau-, tau+)."""
    s = _as_word(sigma)
    if len(tau) != 2:
        raise InadmissibleTau("tau must be a pair (tau-, tau+)")
    tm, tp = int(tau[0]), int(tau[1])
    if not is_admissible(s):
        raise InadmissibleWord(f"sigma {render_word(s)} is not admissible")
    if tp == s[0] or tm == s[-1]:
        raise InadmissibleTau(f"need tau+ != {s[0]} and tau- != {s[-1]}")
    if n < 0:
        raise WordError("n must be non-negative")
    w = (tp,) + s * n + (tm,) + transpose(s) * n
    if not is_admissible(w):
        raise InadmissibleTau(f"family word {render_word(w)} is not admissible")
    return w


def canonicalize(word) -> Word:
    w = _as_word(word)
    return min(min(rotations(w)), min(rotations(transpose(w))))


def render_word(word) -> str:
    w = _as_word(word)
    if any(x > 9 for x in w):
        return ",".join(str(x) for x in w)
    return "".join(str(x) for x in w)


def parse_word(text: str) -> Word:
    text = text.strip()
    try:
        if "," in text:
            return tuple(int(x) for x in text.split(","))
        return tuple(int(c) for c in text)
    except ValueError:
        raise WordError(f"cannot parse word {text!r}") from None


def admissible_words(m: int, p: int) -> Iterable[Word]:
    """All admissible words of length p over {1..m}; a bounded test generator."""
    def rec(prefix):
        if len(prefix) == p:
            if prefix[0] != prefix[-1]:
                yield tuple(prefix)
            return
        for x in range(1, m + 1):
            if x != prefix[-1]:
                yield from rec(prefix + [x])

    for first in range(1, m + 1):
        yield from rec([first])
