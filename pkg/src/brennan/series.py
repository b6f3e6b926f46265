"""Shell sums over the free group and the critical exponent estimate.

    S_n(p) = sum_{|w| = n} |w_hat'(0)|^p |w_target'(0)|^(2 - p)

where ``w_hat`` is a word evaluated in the fitted disk automorphisms and
``w_target`` the same word in the Kleinian generators. For a matrix with
lower-right entry ``d`` the derivative at 0 is ``1 / d^2``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from brennan import words
from brennan.errors import BadBracket, InsufficientData, NonPositiveSum, PoleEncountered
from brennan.moebius import MoebiusMap, apply, preserves_unit_circle

log = logging.getLogger(__name__)

# prefer OpenMP; an outdated TBB only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

PREFIX_DEPTH = 3
POLE_EPS = 1e-300


class NonMonotoneSlope(UserWarning):
    """Fitted slopes were not monotone in ``p`` over the evaluated points."""


@dataclass(frozen=True)
class GeneratorQuadruple:
    A_hat: MoebiusMap
    B_hat: MoebiusMap
    A_target: MoebiusMap
    B_target: MoebiusMap

    def __post_init__(self):
        for name in ("A_hat", "B_hat", "A_target", "B_target"):
            m = getattr(self, name)
            if abs(m.det - 1) > 1e-12:
                raise ValueError(f"{name} does not have determinant 1")
        for name in ("A_hat", "B_hat"):
            m = getattr(self, name)
            if not preserves_unit_circle(m) or abs(apply(m, 0)) >= 1:
                raise ValueError(f"{name} does not preserve the unit disk")

    @classmethod
    def trivial(cls, A: MoebiusMap, B: MoebiusMap) -> GeneratorQuadruple:
        """Hat and target pairs equal: the identity homomorphism."""
        return cls(A, B, A, B)

    def letter_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Generator matrices in ``words.LETTERS`` order, shape ``(4, 2, 2)``."""
        hat = words.generator_table(self.A_hat, self.B_hat)
        tgt = words.generator_table(self.A_target, self.B_target)
        return (
            np.array([hat[c].matrix for c in words.LETTERS]),
            np.array([tgt[c].matrix for c in words.LETTERS]),
        )

    def conjugated(self, by: MoebiusMap) -> GeneratorQuadruple:
        """Replace the hat pair by ``by^-1 X by``; targets unchanged."""
        inv = by.inverse()
        return GeneratorQuadruple(inv @ self.A_hat @ by, inv @ self.B_hat @ by, self.A_target, self.B_target)


@dataclass
class ShellSumTable:
    p: float
    max_n: int
    sums: np.ndarray  # compensated, index n = 0..max_n
    counts: np.ndarray
    plain: np.ndarray | None = None
    summation: str = "compensated"

    @property
    def entries(self) -> list[tuple[int, float, int]]:
        return [(n, float(self.sums[n]), int(self.counts[n])) for n in range(self.max_n + 1)]

    def relative_discrepancy(self) -> np.ndarray:
        """``|plain - compensated| / compensated`` per shell."""
        if self.plain is None:
            raise ValueError("table was computed without the plain sums")
        return np.abs(self.plain - self.sums) / self.sums

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["n", "count", "S_n", "log_S_n"])
            for n, s, c in self.entries:
                wr.writerow([n, c, repr(s), repr(math.log(s)) if s > 0 else "nan"])


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    n_min: int


@dataclass
class PStarInterval:
    lower: float
    upper: float
    slope_at_lower: float
    slope_at_upper: float
    tolerance: float
    slopes: dict = field(default_factory=dict)
    n_min: int = 6
    max_n: int = 12
    monotone: bool = True

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> dict:
        return {
            "bracket": [self.lower, self.upper],
            "slopes": {repr(p): s for p, s in sorted(self.slopes.items())},
            "n_min": self.n_min,
            "max_n": self.max_n,
            "tolerance": self.tolerance,
            "monotone": self.monotone,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


# ---------------------------------------------------------------------------
# depth-first kernel


@numba.njit(cache=True, inline="always")
def _mul_norm(M, G, out):
    a = M[0, 0] * G[0, 0] + M[0, 1] * G[1, 0]
    b = M[0, 0] * G[0, 1] + M[0, 1] * G[1, 1]
    c = M[1, 0] * G[0, 0] + M[1, 1] * G[1, 0]
    d = M[1, 0] * G[0, 1] + M[1, 1] * G[1, 1]
    s = np.sqrt(a * d - b * c)
    out[0, 0] = a / s
    out[0, 1] = b / s
    out[1, 0] = c / s
    out[1, 1] = d / s


@numba.njit(cache=True, inline="always")
def _neumaier(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@numba.njit(cache=True)
def _subtree(Mh0, Mt0, last0, depth0, gh, gt, max_n, ps, sums, comps, plains):
    """Accumulate all proper descendants of one node into per-depth sums.

    ``sums``, ``comps``, ``plains`` have shape ``(len(ps), max_n + 1)``.
    Returns -1 on success or the depth at which a pole was met.
    """
    L = max_n - depth0
    if L <= 0:
        return -1
    stack_h = np.empty((L + 1, 2, 2), dtype=np.complex128)
    stack_t = np.empty((L + 1, 2, 2), dtype=np.complex128)
    last = np.empty(L + 1, dtype=np.int64)
    nxt = np.zeros(L + 1, dtype=np.int64)
    stack_h[0] = Mh0
    stack_t[0] = Mt0
    last[0] = last0
    lvl = 0
    npow = ps.shape[0]
    while lvl >= 0:
        if lvl == L or nxt[lvl] == 4:
            lvl -= 1
            continue
        c = nxt[lvl]
        nxt[lvl] += 1
        if last[lvl] >= 0 and c == (last[lvl] ^ 1):
            continue
        _mul_norm(stack_h[lvl], gh[c], stack_h[lvl + 1])
        _mul_norm(stack_t[lvl], gt[c], stack_t[lvl + 1])
        lvl += 1
        last[lvl] = c
        nxt[lvl] = 0
        dh = abs(stack_h[lvl, 1, 1])
        dt = abs(stack_t[lvl, 1, 1])
        if dh < 1e-300 or dt < 1e-300:
            return depth0 + lvl
        lh = -2.0 * math.log(dh)
        lt = -2.0 * math.log(dt)
        n = depth0 + lvl
        for i in range(npow):
            x = math.exp(ps[i] * lh + (2.0 - ps[i]) * lt)
            sums[i, n], comps[i, n] = _neumaier(sums[i, n], comps[i, n], x)
            plains[i, n] += x
    return -1


@numba.njit(cache=True, parallel=True)
def _forest(roots_h, roots_t, roots_last, depth0, gh, gt, max_n, ps):
    m = roots_h.shape[0]
    npow = ps.shape[0]
    sums = np.zeros((m, npow, max_n + 1))
    comps = np.zeros((m, npow, max_n + 1))
    plains = np.zeros((m, npow, max_n + 1))
    poles = np.full(m, -1, dtype=np.int64)
    for r in numba.prange(m):
        poles[r] = _subtree(
            roots_h[r], roots_t[r], roots_last[r], depth0, gh, gt, max_n, ps, sums[r], comps[r], plains[r]
        )
    return sums, comps, plains, poles


def _term(mh: np.ndarray, mt: np.ndarray, ps: np.ndarray) -> np.ndarray:
    dh, dt = abs(mh[1, 1]), abs(mt[1, 1])
    if dh < POLE_EPS or dt < POLE_EPS:
        raise PoleEncountered("partial product has a pole at the origin")
    return np.exp(ps * (-2 * math.log(dh)) + (2 - ps) * (-2 * math.log(dt)))


def _normalized_product(M: np.ndarray, G: np.ndarray) -> np.ndarray:
    P = M @ G
    return P / np.sqrt(P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0])


def shell_sums_multi(gens: GeneratorQuadruple, ps, max_n: int, with_plain: bool = True) -> list[ShellSumTable]:
    """Shell sums for several exponents in one traversal."""
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    gh, gt = gens.letter_arrays()
    depth0 = min(PREFIX_DEPTH, max_n)
    npow = len(ps)
    comp_s = np.zeros((npow, max_n + 1))
    comp_c = np.zeros((npow, max_n + 1))
    plain = np.zeros((npow, max_n + 1))
    comp_s[:, 0] = 1.0
    plain[:, 0] = 1.0
    # shallow words in index order; the deepest of them root the parallel subtrees
    level = [("", np.eye(2, dtype=complex), np.eye(2, dtype=complex), -1)]
    for n in range(1, depth0 + 1):
        nxt = []
        for w, mh, mt, last in level:
            for c in range(4):
                if last >= 0 and c == last ^ 1:
                    continue
                h = _normalized_product(mh, gh[c])
                t = _normalized_product(mt, gt[c])
                x = _term(h, t, ps)
                for i in range(npow):
                    comp_s[i, n], comp_c[i, n] = _neumaier(comp_s[i, n], comp_c[i, n], x[i])
                plain[:, n] += x
                nxt.append((w + words.LETTERS[c], h, t, c))
        level = nxt
    if max_n > depth0:
        roots_h = np.array([e[1] for e in level])
        roots_t = np.array([e[2] for e in level])
        roots_last = np.array([e[3] for e in level], dtype=np.int64)
        s, c, pl, poles = _forest(roots_h, roots_t, roots_last, depth0, gh, gt, max_n, ps)
        if np.any(poles >= 0):
            raise PoleEncountered(f"partial product has a pole at the origin (depth {poles.max()})")
        # deterministic merge in prefix order
        for r in range(len(level)):
            for i in range(npow):
                for n in range(depth0 + 1, max_n + 1):
                    comp_s[i, n], comp_c[i, n] = _neumaier(comp_s[i, n], comp_c[i, n], s[r, i, n])
                    comp_s[i, n], comp_c[i, n] = _neumaier(comp_s[i, n], comp_c[i, n], c[r, i, n])
                    plain[i, n] += pl[r, i, n]
    counts = np.array([words.count_reduced(n) for n in range(max_n + 1)])
    return [
        ShellSumTable(float(p), max_n, comp_s[i] + comp_c[i], counts, plain[i] if with_plain else None)
        for i, p in enumerate(ps)
    ]


def shell_sums(gens: GeneratorQuadruple, p: float, max_n: int) -> ShellSumTable:
    return shell_sums_multi(gens, [p], max_n)[0]


def shell_sums_bruteforce(gens: GeneratorQuadruple, p: float, max_n: int) -> np.ndarray:
    """Independent oracle: materialize every word and sum each shell exactly."""
    hat = words.generator_table(gens.A_hat, gens.B_hat)
    tgt = words.generator_table(gens.A_target, gens.B_target)
    out = np.zeros(max_n + 1)
    for n in range(max_n + 1):
        terms = []
        for w in words.iter_reduced(n):
            dh = words.evaluate(w, hat).d
            dt = words.evaluate(w, tgt).d
            terms.append(abs(1 / dh**2) ** p * abs(1 / dt**2) ** (2 - p))
        out[n] = math.fsum(sorted(terms))
    return out


# ---------------------------------------------------------------------------
# decay fit and bisection


def fit_decay(table: ShellSumTable | np.ndarray, n_min: int = 6) -> DecayFit:
    """Ordinary least squares of ``log S_n`` on ``n`` for ``n >= n_min``."""
    sums = table.sums if isinstance(table, ShellSumTable) else np.asarray(table, dtype=float)
    n = np.arange(len(sums))
    sel = n >= n_min
    if np.count_nonzero(sel) < 3:
        raise InsufficientData(f"need at least 3 shells with n >= {n_min}")
    y = sums[sel]
    if np.any(~(y > 0)):
        raise NonPositiveSum("shell sums must be positive")
    x = n[sel].astype(float)
    ly = np.log(y)
    xm, ym = x.mean(), ly.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((ly - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1 - ss_res / ss_tot))
    return DecayFit(slope, intercept, r2, n_min)


def slope_at(gens: GeneratorQuadruple, p: float, max_n: int, n_min: int) -> float:
    return fit_decay(shell_sums_multi(gens, [p], max_n, with_plain=False)[0], n_min).slope


def estimate_p_star(
    gens: GeneratorQuadruple,
    max_n: int = 12,
    n_min: int = 6,
    p_lo: float = 5.0,
    p_hi: float = 6.0,
    tol: float = 0.02,
) -> PStarInterval:
    """Bisect on the sign of the fitted slope of ``log S_n(p)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not p_lo < p_hi:
        raise ValueError("need p_lo < p_hi")
    slopes = {}

    def f(p):
        if p not in slopes:
            slopes[p] = slope_at(gens, p, max_n, n_min)
        return slopes[p]

    s_lo, s_hi = f(p_lo), f(p_hi)
    if not (s_lo < 0 < s_hi):
        raise BadBracket(f"slopes {s_lo:.4g} at p={p_lo} and {s_hi:.4g} at p={p_hi} do not straddle 0")
    lo, hi = p_lo, p_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    ordered = [slopes[p] for p in sorted(slopes)]
    monotone = all(b >= a for a, b in zip(ordered, ordered[1:]))
    if not monotone:
        warnings.warn("fitted slopes are not monotone in p", NonMonotoneSlope, stacklevel=2)
    return PStarInterval(lo, hi, slopes[lo], slopes[hi], tol, dict(slopes), n_min, max_n, monotone)
